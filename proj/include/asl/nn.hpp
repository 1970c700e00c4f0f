#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace asl::nn {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {v.data() + static_cast<std::size_t>(r) * cols,
                                         static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {v.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
};

/// Trainable parameter: value plus accumulated gradient of the same shape.
struct Param {
  Matrix val;
  Matrix grad;
  std::string name;

  Param() = default;
  Param(int r, int c, std::string n) : val(r, c), grad(r, c), name(std::move(n)) {}
  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

void glorot_init(Param& p, int fan_in, int fan_out, std::mt19937_64& rng);
void check_finite(const Matrix& m, const char* where);

/// Fully connected layer, applied row-wise: Y = X W + b.
class Dense {
public:
  Dense() = default;
  Dense(int in, int out, std::string name, std::mt19937_64& rng);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);  // accumulates into W.grad / b.grad
  Param& weight() { return w_; }
  Param& bias() { return b_; }
  std::vector<Param*> params() { return {&w_, &b_}; }
  int in_dim() const { return w_.val.rows; }
  int out_dim() const { return w_.val.cols; }

private:
  Param w_, b_;
  Matrix x_cache_;
};

/// 1-D convolution along the row (node) axis, valid padding: input n x in_ch
/// becomes (n - width + 1) x out_ch.
class Conv1d {
public:
  Conv1d() = default;
  Conv1d(int in_ch, int out_ch, int width, std::string name, std::mt19937_64& rng);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);
  std::vector<Param*> params() { return {&w_, &b_}; }
  int width() const { return width_; }
  Param& weight() { return w_; }

private:
  Param w_;  // (width * in_ch) x out_ch
  Param b_;
  int width_ = 1;
  int in_ch_ = 0;
  Matrix x_cache_;
};

class Relu {
public:
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

private:
  Matrix x_cache_;
};

/// Softmax over one logit row where masked-out entries get probability
/// exactly 0 (logit pushed to -1e9 before normalization). Throws if no entry
/// is valid.
std::vector<double> masked_softmax(std::span<const double> logits,
                                   std::span<const std::uint8_t> mask);

struct CategoricalEval {
  double log_prob = 0.0;
  double entropy = 0.0;
  std::vector<double> probs;
};
CategoricalEval categorical_eval(std::span<const double> logits,
                                 std::span<const std::uint8_t> mask, int action);

int categorical_sample(std::span<const double> probs, std::mt19937_64& rng);

/// d(loss)/d(logits) for loss = lp_coef * log pi(action) + ent_coef * entropy,
/// given the masked softmax probabilities. Masked entries receive 0.
std::vector<double> categorical_backward(const CategoricalEval& eval, int action,
                                         double lp_coef, double ent_coef,
                                         std::span<const std::uint8_t> mask);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(std::span<Param* const> params);
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Checkpoint format: little-endian int64 count, then per parameter rows/cols
// as int64 followed by row-major little-endian doubles.
void save_params(std::span<Param* const> params, std::ostream& out);
void load_params(std::span<Param* const> params, std::istream& in);

}  // namespace asl::nn
