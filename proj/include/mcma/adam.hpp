#pragma once

#include <cstddef>
#include <vector>

#include "mcma/tensor.hpp"

namespace mcma {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Each step consumes the parameters' gradients: they are
/// released afterwards, so a step without a fresh backward() throws
/// NoGradient.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  void step();

  std::size_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace mcma
