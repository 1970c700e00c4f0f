#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "asl/nn.hpp"

using namespace asl::nn;

namespace {

// Relative error between the analytic gradient of every parameter (and the
// input) and a central finite difference of the scalarized output.
double max_grad_rel_error(std::function<double()> loss_forward_backward,
                          std::span<Param* const> params, double h = 1e-6) {
  for (Param* p : params) p->zero_grad();
  loss_forward_backward();
  double worst = 0.0;
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->val.v.size(); ++i) {
      double saved = p->val.v[i];
      p->val.v[i] = saved + h;
      double up = loss_forward_backward();
      p->val.v[i] = saved - h;
      double down = loss_forward_backward();
      p->val.v[i] = saved;
      double numeric = (up - down) / (2 * h);
      double analytic = p->grad.v[i];
      double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  Matrix m(r, c);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (double& x : m.v) x = nd(rng);
  return m;
}

double dot(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

}  // namespace

TEST_CASE("dense layer gradients match finite differences") {
  std::mt19937_64 rng(1);
  Dense layer(4, 3, "d", rng);
  Matrix x = random_matrix(5, 4, rng);
  Matrix c = random_matrix(5, 3, rng);  // fixed scalarization weights

  auto run = [&]() {
    for (Param* p : layer.params()) p->zero_grad();
    Matrix y = layer.forward(x);
    layer.backward(c);
    return dot(y, c);
  };
  auto params = layer.params();
  CHECK(max_grad_rel_error(run, params) < 1e-4);
}

TEST_CASE("dense backward returns the input gradient") {
  std::mt19937_64 rng(2);
  Dense layer(3, 2, "d", rng);
  Matrix x = random_matrix(2, 3, rng);
  Matrix c = random_matrix(2, 2, rng);
  layer.forward(x);
  Matrix dx = layer.backward(c);

  const double h = 1e-6;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) {
      double saved = x.at(i, j);
      x.at(i, j) = saved + h;
      double up = dot(layer.forward(x), c);
      x.at(i, j) = saved - h;
      double down = dot(layer.forward(x), c);
      x.at(i, j) = saved;
      CHECK(dx.at(i, j) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("conv1d gradients match finite differences") {
  std::mt19937_64 rng(3);
  for (int width : {1, 3}) {
    Conv1d layer(4, 2, width, "c", rng);
    Matrix x = random_matrix(6, 4, rng);
    Matrix c = random_matrix(6 - width + 1, 2, rng);
    auto run = [&]() {
      for (Param* p : layer.params()) p->zero_grad();
      Matrix y = layer.forward(x);
      layer.backward(c);
      return dot(y, c);
    };
    auto params = layer.params();
    CHECK(max_grad_rel_error(run, params) < 1e-4);
  }
}

TEST_CASE("relu + dense composition gradients match finite differences") {
  std::mt19937_64 rng(4);
  Dense d1(3, 5, "d1", rng), d2(5, 2, "d2", rng);
  Relu relu;
  Matrix x = random_matrix(4, 3, rng);
  Matrix c = random_matrix(4, 2, rng);
  std::vector<Param*> params;
  for (Param* p : d1.params()) params.push_back(p);
  for (Param* p : d2.params()) params.push_back(p);

  auto run = [&]() {
    for (Param* p : params) p->zero_grad();
    Matrix y = d2.forward(relu.forward(d1.forward(x)));
    d1.backward(relu.backward(d2.backward(c)));
    return dot(y, c);
  };
  CHECK(max_grad_rel_error(run, params) < 1e-4);
}

TEST_CASE("masked softmax zeroes invalid entries and renormalizes") {
  std::vector<double> logits{1.0, 2.0, 3.0, 4.0};
  std::vector<std::uint8_t> mask{1, 0, 1, 0};
  auto probs = masked_softmax(logits, mask);
  CHECK(probs[1] == 0.0);
  CHECK(probs[3] == 0.0);
  CHECK(probs[0] + probs[2] == doctest::Approx(1.0));
  CHECK(probs[2] / probs[0] == doctest::Approx(std::exp(2.0)));

  std::vector<std::uint8_t> none{0, 0, 0, 0};
  CHECK_THROWS_AS(masked_softmax(logits, none), std::exception);

  // no mask: plain softmax
  auto full = masked_softmax(logits, {});
  double sum = 0.0;
  for (double q : full) sum += q;
  CHECK(sum == doctest::Approx(1.0));

  // huge logits must not overflow
  std::vector<double> big{1000.0, 999.0};
  auto stable = masked_softmax(big, {});
  CHECK(std::isfinite(stable[0]));
  CHECK(stable[0] > stable[1]);
}

TEST_CASE("categorical log-prob and entropy gradients match finite differences") {
  std::vector<double> logits{0.3, -1.2, 0.7, 2.0};
  std::vector<std::uint8_t> mask{1, 1, 0, 1};
  const int action = 3;
  const double lp_coef = 0.8, ent_coef = 0.2;

  CategoricalEval ev = categorical_eval(logits, mask, action);
  auto grad = categorical_backward(ev, action, lp_coef, ent_coef, mask);
  CHECK(grad[2] == 0.0);

  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    if (!mask[i]) continue;
    auto perturbed = logits;
    perturbed[i] += h;
    CategoricalEval up = categorical_eval(perturbed, mask, action);
    perturbed[i] -= 2 * h;
    CategoricalEval down = categorical_eval(perturbed, mask, action);
    double numeric = (lp_coef * (up.log_prob - down.log_prob) +
                      ent_coef * (up.entropy - down.entropy)) /
                     (2 * h);
    CHECK(grad[i] == doctest::Approx(numeric).epsilon(1e-4));
  }
}

TEST_CASE("categorical sampling respects the mask exactly") {
  std::vector<double> logits{5.0, 1.0, -2.0};
  std::vector<std::uint8_t> mask{0, 1, 1};
  auto probs = masked_softmax(logits, mask);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20000; ++i) CHECK(categorical_sample(probs, rng) != 0);
}

TEST_CASE("adam takes a bias-corrected first step of size ~lr") {
  Param p(1, 1, "p");
  p.val.v[0] = 1.0;
  p.grad.v[0] = 0.37;  // any nonzero gradient
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam opt(cfg);
  std::vector<Param*> params{&p};
  opt.step(params);
  // first step: m_hat = g, v_hat = g^2, so delta = -lr * g / (|g| + eps)
  CHECK(p.val.v[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));

  Param q(1, 1, "q");
  CHECK_THROWS_AS(opt.step(std::vector<Param*>{&p, &q}), std::exception);
}

TEST_CASE("checkpoints round-trip bit-exactly and validate shapes") {
  std::mt19937_64 rng(9);
  Dense a(4, 6, "a", rng), b(6, 2, "b", rng);
  std::vector<Param*> params;
  for (Param* p : a.params()) params.push_back(p);
  for (Param* p : b.params()) params.push_back(p);

  std::stringstream ss;
  save_params(params, ss);

  Dense a2(4, 6, "a", rng), b2(6, 2, "b", rng);
  std::vector<Param*> params2;
  for (Param* p : a2.params()) params2.push_back(p);
  for (Param* p : b2.params()) params2.push_back(p);
  load_params(params2, ss);
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(params[i]->val.v == params2[i]->val.v);

  std::stringstream ss2;
  save_params(params, ss2);
  Dense wrong(4, 7, "w", rng);
  std::vector<Param*> mismatched;
  for (Param* p : wrong.params()) mismatched.push_back(p);
  CHECK_THROWS_AS(load_params(mismatched, ss2), std::exception);
}
