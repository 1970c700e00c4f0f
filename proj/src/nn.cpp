#include "asl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace asl::nn {

void glorot_init(Param& p, int fan_in, int fan_out, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& w : p.val.v) w = dist(rng);
}

void check_finite(const Matrix& m, const char* where) {
  for (double x : m.v)
    if (!std::isfinite(x)) throw std::runtime_error(std::string("non-finite value in ") + where);
}

Dense::Dense(int in, int out, std::string name, std::mt19937_64& rng)
    : w_(in, out, name + ".w"), b_(1, out, name + ".b") {
  glorot_init(w_, in, out, rng);
}

Matrix Dense::forward(const Matrix& x) {
  if (x.cols != w_.val.rows) throw std::invalid_argument("dense: input width mismatch");
  x_cache_ = x;
  Matrix y(x.rows, w_.val.cols);
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < y.cols; ++c) {
      double acc = b_.val.at(0, c);
      for (int i = 0; i < x.cols; ++i) acc += x.at(r, i) * w_.val.at(i, c);
      y.at(r, c) = acc;
    }
  }
  return y;
}

Matrix Dense::backward(const Matrix& dy) {
  if (x_cache_.rows != dy.rows || dy.cols != w_.val.cols)
    throw std::logic_error("dense: backward before forward or shape mismatch");
  Matrix dx(x_cache_.rows, x_cache_.cols);
  for (int r = 0; r < dy.rows; ++r) {
    for (int c = 0; c < dy.cols; ++c) {
      double d = dy.at(r, c);
      if (d == 0.0) continue;
      b_.grad.at(0, c) += d;
      for (int i = 0; i < x_cache_.cols; ++i) {
        w_.grad.at(i, c) += x_cache_.at(r, i) * d;
        dx.at(r, i) += w_.val.at(i, c) * d;
      }
    }
  }
  return dx;
}

Conv1d::Conv1d(int in_ch, int out_ch, int width, std::string name, std::mt19937_64& rng)
    : w_(width * in_ch, out_ch, name + ".w"), b_(1, out_ch, name + ".b"),
      width_(width), in_ch_(in_ch) {
  glorot_init(w_, width * in_ch, out_ch, rng);
}

Matrix Conv1d::forward(const Matrix& x) {
  if (x.cols != in_ch_) throw std::invalid_argument("conv1d: channel mismatch");
  if (x.rows < width_) throw std::invalid_argument("conv1d: input shorter than kernel");
  x_cache_ = x;
  const int out_rows = x.rows - width_ + 1;
  const int out_ch = w_.val.cols;
  Matrix y(out_rows, out_ch);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_ch; ++c) {
      double acc = b_.val.at(0, c);
      for (int t = 0; t < width_; ++t)
        for (int i = 0; i < in_ch_; ++i)
          acc += x.at(r + t, i) * w_.val.at(t * in_ch_ + i, c);
      y.at(r, c) = acc;
    }
  }
  return y;
}

Matrix Conv1d::backward(const Matrix& dy) {
  const int out_rows = x_cache_.rows - width_ + 1;
  if (dy.rows != out_rows || dy.cols != w_.val.cols)
    throw std::logic_error("conv1d: backward shape mismatch");
  Matrix dx(x_cache_.rows, x_cache_.cols);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < dy.cols; ++c) {
      double d = dy.at(r, c);
      if (d == 0.0) continue;
      b_.grad.at(0, c) += d;
      for (int t = 0; t < width_; ++t)
        for (int i = 0; i < in_ch_; ++i) {
          w_.grad.at(t * in_ch_ + i, c) += x_cache_.at(r + t, i) * d;
          dx.at(r + t, i) += w_.val.at(t * in_ch_ + i, c) * d;
        }
    }
  }
  return dx;
}

Matrix Relu::forward(const Matrix& x) {
  x_cache_ = x;
  Matrix y = x;
  for (double& v : y.v) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix Relu::backward(const Matrix& dy) {
  if (dy.rows != x_cache_.rows || dy.cols != x_cache_.cols)
    throw std::logic_error("relu: backward shape mismatch");
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i)
    if (x_cache_.v[i] <= 0.0) dx.v[i] = 0.0;
  return dx;
}

constexpr double kMaskedLogit = -1e9;

std::vector<double> masked_softmax(std::span<const double> logits,
                                   std::span<const std::uint8_t> mask) {
  if (!mask.empty() && mask.size() != logits.size())
    throw std::invalid_argument("masked_softmax: mask length mismatch");
  double max_logit = kMaskedLogit;
  bool any_valid = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    any_valid = true;
    max_logit = std::max(max_logit, logits[i]);
  }
  if (!any_valid) throw std::runtime_error("masked_softmax: no valid action");
  std::vector<double> probs(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    probs[i] = std::exp(logits[i] - max_logit);
    total += probs[i];
  }
  for (double& q : probs) q /= total;
  return probs;
}

CategoricalEval categorical_eval(std::span<const double> logits,
                                 std::span<const std::uint8_t> mask, int action) {
  CategoricalEval ev;
  ev.probs = masked_softmax(logits, mask);
  if (action < 0 || action >= static_cast<int>(ev.probs.size()) || ev.probs[action] <= 0.0)
    throw std::invalid_argument("categorical_eval: action invalid under mask");
  ev.log_prob = std::log(ev.probs[action]);
  for (double q : ev.probs)
    if (q > 0.0) ev.entropy -= q * std::log(q);
  return ev;
}

int categorical_sample(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double r = u01(rng);
  double acc = 0.0;
  int last_valid = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_valid = static_cast<int>(i);
    acc += probs[i];
    if (r < acc) return last_valid;
  }
  if (last_valid < 0) throw std::runtime_error("categorical_sample: degenerate distribution");
  return last_valid;
}

std::vector<double> categorical_backward(const CategoricalEval& ev, int action,
                                         double lp_coef, double ent_coef,
                                         std::span<const std::uint8_t> mask) {
  const auto& p = ev.probs;
  std::vector<double> dlogits(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (p[i] <= 0.0) continue;
    double one_hot = static_cast<int>(i) == action ? 1.0 : 0.0;
    // d log_prob / d logit_i = one_hot - p_i
    // d entropy  / d logit_i = -p_i (log p_i + H)
    dlogits[i] = lp_coef * (one_hot - p[i]) - ent_coef * p[i] * (std::log(p[i]) + ev.entropy);
  }
  return dlogits;
}

void Adam::step(std::span<Param* const> params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->val.v.size(), 0.0);
      v_[i].assign(params[i]->val.v.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("adam: parameter set changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& val = params[i]->val.v;
    auto& grad = params[i]->grad.v;
    for (std::size_t j = 0; j < val.size(); ++j) {
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * grad[j];
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * grad[j] * grad[j];
      double mhat = m_[i][j] / bc1;
      double vhat = v_[i][j] / bc2;
      val[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

namespace {

void write_i64(std::ostream& out, std::int64_t v) {
  unsigned char buf[8];
  auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::int64_t read_i64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("checkpoint stream truncated");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<std::int64_t>(u);
}

void write_f64(std::ostream& out, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  write_i64(out, static_cast<std::int64_t>(u));
}

double read_f64(std::istream& in) {
  auto u = static_cast<std::uint64_t>(read_i64(in));
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

}  // namespace

void save_params(std::span<Param* const> params, std::ostream& out) {
  write_i64(out, static_cast<std::int64_t>(params.size()));
  for (const Param* p : params) {
    write_i64(out, p->val.rows);
    write_i64(out, p->val.cols);
    for (double v : p->val.v) write_f64(out, v);
  }
}

void load_params(std::span<Param* const> params, std::istream& in) {
  auto count = read_i64(in);
  if (count != static_cast<std::int64_t>(params.size()))
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (Param* p : params) {
    auto rows = read_i64(in);
    auto cols = read_i64(in);
    if (rows != p->val.rows || cols != p->val.cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
    for (double& v : p->val.v) v = read_f64(in);
  }
}

}  // namespace asl::nn
