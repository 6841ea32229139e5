#pragma once

// Test-only oracles: seeded generators and a central finite-difference
// gradient checker that never looks at the analytic backward code.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mcma/tensor.hpp"

namespace mcma::testing {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Tensor random_param(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  const auto n = numel(shape);
  return Tensor::parameter(std::move(shape), random_values(n, rng, lo, hi));
}

inline Tensor random_const(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  const auto n = numel(shape);
  return Tensor::from(std::move(shape), random_values(n, rng, lo, hi));
}

struct GradCheckResult {
  double worst_rel = 0.0;
  std::size_t checked = 0;
  std::size_t failures = 0;
};

/// Compares analytic gradients of `loss_fn()` w.r.t. every element of
/// `params` against central differences with step h. An element passes when
/// |analytic - numeric| <= abs_floor or the relative error <= rel_tol.
inline GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                  double h = 1e-5, double rel_tol = 1e-3, double abs_floor = 1e-6) {
  for (auto& p : params) p.clear_grad();
  loss_fn().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    analytic.emplace_back(p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                                       : std::vector<double>(p.size(), 0.0));
  }
  GradCheckResult res;
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto vals = params[pi].mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double up = loss_fn().item();
      vals[i] = orig - h;
      const double down = loss_fn().item();
      vals[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[pi][i];
      const double diff = std::abs(a - numeric);
      const double rel = diff / std::max({std::abs(a), std::abs(numeric), 1e-300});
      ++res.checked;
      if (std::max(std::abs(a), std::abs(numeric)) > abs_floor) res.worst_rel = std::max(res.worst_rel, rel);
      if (diff > abs_floor && rel > rel_tol) ++res.failures;
    }
  }
  for (auto& p : params) p.clear_grad();
  return res;
}

}  // namespace mcma::testing
