#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mcma {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense float64 tensor that records the operations applied to it so that
/// backward() can propagate gradients to every leaf marked requires_grad.
///
/// Copies share storage (handle semantics), which is what parameters held by
/// a model and referenced from the graph need.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  /// A leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const double> values() const;
  /// Mutable access for leaves (parameter updates, initialisation).
  std::span<double> mutable_values();

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void clear_grad();

  /// Value of a one-element tensor.
  double item() const;

  /// Reverse-mode sweep from this scalar. Throws NotScalar otherwise.
  void backward() const;

  /// Same values, no history.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(detail::Node&)>);

  std::shared_ptr<detail::Node> node_;
};

/// Creates an op output. The backward closure is only attached when gradient
/// recording is on and some input requires grad.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn);

/// While alive, ops on this thread build no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Operators. Sequence ops accept [C, L] or batched [B, C, L] inputs and
// return the same rank.

/// weight [C_out, C_in, k], bias [C_out] or undefined.
/// L_out = floor((L + 2 pad - k) / stride) + 1.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// weight [C_in, C_out, k] (same layout conv1d uses for its adjoint), bias
/// [C_out] or undefined. L_out = (L - 1) stride - 2 pad + k + out_pad.
Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride, std::size_t pad, std::size_t out_pad);

inline constexpr double kNormEps = 1e-5;

/// Normalises each channel of each sample over its length; gamma/beta [C].
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps = kNormEps);

/// Normalises each sample over all C*L elements; per-channel gamma/beta [C].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kNormEps);

/// x * Phi(x) with the exact Gaussian CDF.
Tensor gelu(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);

/// c * x.
Tensor scale(const Tensor& x, double c);

/// Mean of squared differences, returned as a one-element tensor.
Tensor mse(const Tensor& a, const Tensor& b);

/// Scalar helpers shared with tests.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace mcma
