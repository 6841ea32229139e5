#include "mcma/adam.hpp"

#include <cmath>

#include "mcma/errors.hpp"

namespace mcma {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      throw NoGradient("parameter " + std::to_string(i) + " " + shape_str(params_[i].shape()) +
                       " has no gradient");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
    p.clear_grad();
  }
}

}  // namespace mcma
