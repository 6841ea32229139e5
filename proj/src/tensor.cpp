#include "mcma/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "mcma/errors.hpp"

namespace mcma {

namespace {

thread_local bool g_grad_enabled = true;

// Views any [C, L] / [B, C, L] tensor as batched.
struct Seq {
  std::size_t batch, channels, length;
};

Seq as_seq(const Tensor& t, const char* op) {
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  throw ShapeError(std::string(op) + ": expected [C, L] or [B, C, L], got " + shape_str(t.shape()));
}

Shape seq_shape(const Tensor& like, std::size_t channels, std::size_t length) {
  if (like.rank() == 2) return {channels, length};
  return {like.dim(0), channels, length};
}

void expect_shape(const Tensor& t, const Shape& want, const char* op, const char* what) {
  if (t.shape() != want) {
    throw ShapeError(std::string(op) + ": " + what + " has shape " + shape_str(t.shape()) +
                     ", expected " + shape_str(want));
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (values.size() != numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::clear_grad() { node_->grad.clear(); }

double Tensor::item() const {
  if (size() != 1) throw NotScalar("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return from(shape(), node_->value); }

void Tensor::backward() const {
  if (!node_ || size() != 1) {
    throw NotScalar("backward() needs a one-element loss, got " +
                    (node_ ? shape_str(shape()) : std::string("undefined")));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); })) {
    node->requires_grad = true;
    node->backward_fn = std::move(backward_fn);
    for (auto& t : inputs) {
      if (t.defined()) node->parents.push_back(t.node_ptr());
    }
  }
  return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Convolutions
//
// Both convolutions relate a "long" row of length N to a "short" row of
// length T through n = t * stride + (j - pad). Splitting the long row into
// `stride` phases, phase r holding samples r, r + stride, ..., turns every
// tap into a contiguous shifted access: n = t * stride + d with
// d = q * stride + r maps to phase r, offset t + q.

namespace {

struct Polyphase {
  std::size_t stride, phase_len;

  static Polyphase of(std::size_t n, std::size_t stride) { return {stride, (n + stride - 1) / stride}; }

  // Phase and offset of tap j.
  std::pair<std::size_t, std::ptrdiff_t> tap(std::size_t j, std::size_t pad) const {
    const auto d = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(pad);
    const auto s = static_cast<std::ptrdiff_t>(stride);
    std::ptrdiff_t q = d >= 0 ? d / s : -((-d + s - 1) / s);
    return {static_cast<std::size_t>(d - q * s), q};
  }

  // Valid t range for offset q over a short row of length t_len.
  std::pair<std::size_t, std::size_t> range(std::ptrdiff_t q, std::size_t t_len) const {
    const auto lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -q));
    const auto end = static_cast<std::ptrdiff_t>(phase_len) - q;
    const auto hi = static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(end, 0, static_cast<std::ptrdiff_t>(t_len)));
    return {lo, std::max(lo, hi)};
  }

  // rows x n (row-major) -> rows x stride x phase_len, zero-filled tails.
  std::vector<double> split(const double* src, std::size_t rows, std::size_t n) const {
    std::vector<double> out(rows * stride * phase_len, 0.0);
    for (std::size_t row = 0; row < rows; ++row) {
      const double* s = src + row * n;
      double* d = out.data() + row * stride * phase_len;
      for (std::size_t i = 0; i < n; ++i) d[(i % stride) * phase_len + i / stride] = s[i];
    }
    return out;
  }

  // Inverse of split, accumulating into dst and dropping the tails.
  void merge_add(const std::vector<double>& poly, double* dst, std::size_t rows, std::size_t n) const {
    for (std::size_t row = 0; row < rows; ++row) {
      const double* p = poly.data() + row * stride * phase_len;
      double* d = dst + row * n;
      for (std::size_t i = 0; i < n; ++i) d[i] += p[(i % stride) * phase_len + i / stride];
    }
  }

  const double* phase(const std::vector<double>& poly, std::size_t row, std::size_t r) const {
    return poly.data() + (row * stride + r) * phase_len;
  }
  double* phase(std::vector<double>& poly, std::size_t row, std::size_t r) const {
    return poly.data() + (row * stride + r) * phase_len;
  }
};

// short[t] += w * long_phase[t + q]
inline void gather_axpy(double* __restrict shortrow, const double* __restrict ph, double w,
                        std::ptrdiff_t q, std::size_t lo, std::size_t hi) {
  const double* src = ph + q;
  for (std::size_t t = lo; t < hi; ++t) shortrow[t] += w * src[t];
}

// long_phase[t + q] += w * short[t]
inline void scatter_axpy(double* __restrict ph, const double* __restrict shortrow, double w,
                         std::ptrdiff_t q, std::size_t lo, std::size_t hi) {
  double* dst = ph + q;
  for (std::size_t t = lo; t < hi; ++t) dst[t] += w * shortrow[t];
}

inline double shifted_dot(const double* __restrict shortrow, const double* __restrict ph,
                          std::ptrdiff_t q, std::size_t lo, std::size_t hi) {
  const double* src = ph + q;
  double s = 0.0;
  for (std::size_t t = lo; t < hi; ++t) s += shortrow[t] * src[t];
  return s;
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  const Seq in = as_seq(x, "conv1d");
  if (weight.rank() != 3 || weight.dim(1) != in.channels) {
    throw ShapeError("conv1d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                     shape_str(x.shape()));
  }
  const std::size_t c_out = weight.dim(0);
  const std::size_t k = weight.dim(2);
  if (stride == 0) throw ShapeError("conv1d: stride must be positive");
  if (in.length + 2 * pad < k) {
    throw ShapeError("conv1d: input length " + std::to_string(in.length) +
                     " too short for kernel " + std::to_string(k));
  }
  if (bias.defined()) expect_shape(bias, {c_out}, "conv1d", "bias");
  const std::size_t l_out = (in.length + 2 * pad - k) / stride + 1;
  const Polyphase poly = Polyphase::of(in.length, stride);

  const double* xv = x.values().data();
  const double* wv = weight.values().data();
  std::vector<double> out(in.batch * c_out * l_out, 0.0);
  for (std::size_t b = 0; b < in.batch; ++b) {
    const auto px = poly.split(xv + b * in.channels * in.length, in.channels, in.length);
    for (std::size_t o = 0; o < c_out; ++o) {
      double* orow = out.data() + (b * c_out + o) * l_out;
      if (bias.defined()) std::fill(orow, orow + l_out, bias.values()[o]);
      for (std::size_t c = 0; c < in.channels; ++c) {
        const double* wrow = wv + (o * in.channels + c) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const auto [r, q] = poly.tap(j, pad);
          const auto [lo, hi] = poly.range(q, l_out);
          gather_axpy(orow, poly.phase(px, c, r), wrow[j], q, lo, hi);
        }
      }
    }
  }

  return make_result(
      seq_shape(x, c_out, l_out), std::move(out), {x, weight, bias},
      [x, weight, bias, in, c_out, k, l_out, pad, poly](detail::Node& self) {
        const double* g = self.grad.data();
        const double* xv = x.values().data();
        const double* wv = weight.values().data();
        double* gx = x.requires_grad() ? x.node()->ensure_grad().data() : nullptr;
        double* gw = weight.requires_grad() ? weight.node()->ensure_grad().data() : nullptr;
        double* gb = bias.requires_grad() ? bias.node()->ensure_grad().data() : nullptr;
        for (std::size_t b = 0; b < in.batch; ++b) {
          const auto px = gw ? poly.split(xv + b * in.channels * in.length, in.channels, in.length)
                             : std::vector<double>{};
          std::vector<double> pgx(gx ? in.channels * poly.stride * poly.phase_len : 0, 0.0);
          for (std::size_t o = 0; o < c_out; ++o) {
            const double* grow = g + (b * c_out + o) * l_out;
            if (gb) {
              double s = 0.0;
              for (std::size_t t = 0; t < l_out; ++t) s += grow[t];
              gb[o] += s;
            }
            for (std::size_t c = 0; c < in.channels; ++c) {
              const std::size_t woff = (o * in.channels + c) * k;
              for (std::size_t j = 0; j < k; ++j) {
                const auto [r, q] = poly.tap(j, pad);
                const auto [lo, hi] = poly.range(q, l_out);
                if (gw) gw[woff + j] += shifted_dot(grow, poly.phase(px, c, r), q, lo, hi);
                if (gx) scatter_axpy(poly.phase(pgx, c, r), grow, wv[woff + j], q, lo, hi);
              }
            }
          }
          if (gx) poly.merge_add(pgx, gx + b * in.channels * in.length, in.channels, in.length);
        }
      });
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride, std::size_t pad, std::size_t out_pad) {
  const Seq in = as_seq(x, "conv_transpose1d");
  if (weight.rank() != 3 || weight.dim(0) != in.channels) {
    throw ShapeError("conv_transpose1d: weight " + shape_str(weight.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  }
  if (stride == 0) throw ShapeError("conv_transpose1d: stride must be positive");
  if (out_pad >= stride) {
    throw ShapeError("conv_transpose1d: out_pad " + std::to_string(out_pad) +
                     " must be smaller than stride " + std::to_string(stride));
  }
  const std::size_t c_out = weight.dim(1);
  const std::size_t k = weight.dim(2);
  if (bias.defined()) expect_shape(bias, {c_out}, "conv_transpose1d", "bias");
  const std::size_t span = (in.length - 1) * stride + k + out_pad;
  if (span <= 2 * pad) throw ShapeError("conv_transpose1d: padding consumes the whole output");
  const std::size_t l_out = span - 2 * pad;
  const Polyphase poly = Polyphase::of(l_out, stride);

  const double* xv = x.values().data();
  const double* wv = weight.values().data();
  std::vector<double> out(in.batch * c_out * l_out, 0.0);
  for (std::size_t b = 0; b < in.batch; ++b) {
    std::vector<double> pout(c_out * poly.stride * poly.phase_len, 0.0);
    for (std::size_t o = 0; o < c_out; ++o) {
      for (std::size_t c = 0; c < in.channels; ++c) {
        const double* xrow = xv + (b * in.channels + c) * in.length;
        const double* wrow = wv + (c * c_out + o) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const auto [r, q] = poly.tap(j, pad);
          const auto [lo, hi] = poly.range(q, in.length);
          scatter_axpy(poly.phase(pout, o, r), xrow, wrow[j], q, lo, hi);
        }
      }
    }
    double* ob = out.data() + b * c_out * l_out;
    if (bias.defined()) {
      for (std::size_t o = 0; o < c_out; ++o) std::fill(ob + o * l_out, ob + (o + 1) * l_out, bias.values()[o]);
    }
    poly.merge_add(pout, ob, c_out, l_out);
  }

  return make_result(
      seq_shape(x, c_out, l_out), std::move(out), {x, weight, bias},
      [x, weight, bias, in, c_out, k, l_out, pad, poly](detail::Node& self) {
        const double* g = self.grad.data();
        const double* xv = x.values().data();
        const double* wv = weight.values().data();
        double* gx = x.requires_grad() ? x.node()->ensure_grad().data() : nullptr;
        double* gw = weight.requires_grad() ? weight.node()->ensure_grad().data() : nullptr;
        double* gb = bias.requires_grad() ? bias.node()->ensure_grad().data() : nullptr;
        for (std::size_t b = 0; b < in.batch; ++b) {
          const double* gbatch = g + b * c_out * l_out;
          if (gb) {
            for (std::size_t o = 0; o < c_out; ++o) {
              double s = 0.0;
              for (std::size_t t = 0; t < l_out; ++t) s += gbatch[o * l_out + t];
              gb[o] += s;
            }
          }
          const auto pg = poly.split(gbatch, c_out, l_out);
          for (std::size_t c = 0; c < in.channels; ++c) {
            const std::size_t xoff = (b * in.channels + c) * in.length;
            for (std::size_t o = 0; o < c_out; ++o) {
              const std::size_t woff = (c * c_out + o) * k;
              for (std::size_t j = 0; j < k; ++j) {
                const auto [r, q] = poly.tap(j, pad);
                const auto [lo, hi] = poly.range(q, in.length);
                const double* ph = poly.phase(pg, o, r);
                if (gw) gw[woff + j] += shifted_dot(xv + xoff, ph, q, lo, hi);
                if (gx) gather_axpy(gx + xoff, ph, wv[woff + j], q, lo, hi);
              }
            }
          }
        }
      });
}
// ---------------------------------------------------------------------------
// Normalisation

namespace {

// Normalises `groups` contiguous runs of `group_len` values. The affine
// parameters are indexed by channel; channel_of(group, offset) maps a value
// to its channel.
struct NormSaved {
  std::vector<double> xhat;
  std::vector<double> invstd;
};

template <typename ChannelOf>
Tensor normalize(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                 std::size_t groups, std::size_t group_len, ChannelOf channel_of) {
  auto saved = std::make_shared<NormSaved>();
  saved->xhat.resize(x.size());
  saved->invstd.resize(groups);
  std::vector<double> out(x.size());
  const double* xv = x.values().data();
  const double* gv = gamma.values().data();
  const double* bv = beta.values().data();
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const double* xs = xv + gi * group_len;
    double mean = 0.0;
    for (std::size_t i = 0; i < group_len; ++i) mean += xs[i];
    mean /= static_cast<double>(group_len);
    double var = 0.0;
    for (std::size_t i = 0; i < group_len; ++i) var += (xs[i] - mean) * (xs[i] - mean);
    var /= static_cast<double>(group_len);
    const double invstd = 1.0 / std::sqrt(var + eps);
    saved->invstd[gi] = invstd;
    for (std::size_t i = 0; i < group_len; ++i) {
      const double xh = (xs[i] - mean) * invstd;
      const std::size_t c = channel_of(gi, i);
      saved->xhat[gi * group_len + i] = xh;
      out[gi * group_len + i] = gv[c] * xh + bv[c];
    }
  }

  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, saved, groups, group_len, channel_of](detail::Node& self) {
        const double* g = self.grad.data();
        const double* gv = gamma.values().data();
        double* gx = x.requires_grad() ? x.node()->ensure_grad().data() : nullptr;
        double* ggamma = gamma.requires_grad() ? gamma.node()->ensure_grad().data() : nullptr;
        double* gbeta = beta.requires_grad() ? beta.node()->ensure_grad().data() : nullptr;
        std::vector<double> dxhat(group_len);
        const double n = static_cast<double>(group_len);
        for (std::size_t gi = 0; gi < groups; ++gi) {
          const std::size_t off = gi * group_len;
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t i = 0; i < group_len; ++i) {
            const std::size_t c = channel_of(gi, i);
            const double xh = saved->xhat[off + i];
            if (ggamma) ggamma[c] += g[off + i] * xh;
            if (gbeta) gbeta[c] += g[off + i];
            dxhat[i] = g[off + i] * gv[c];
            sum_d += dxhat[i];
            sum_dx += dxhat[i] * xh;
          }
          if (gx) {
            const double scale = saved->invstd[gi] / n;
            for (std::size_t i = 0; i < group_len; ++i) {
              gx[off + i] += scale * (n * dxhat[i] - sum_d - saved->xhat[off + i] * sum_dx);
            }
          }
        }
      });
}

}  // namespace

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Seq in = as_seq(x, "instance_norm");
  if (in.length < 2) throw DegenerateNorm("instance_norm needs length >= 2");
  expect_shape(gamma, {in.channels}, "instance_norm", "gamma");
  expect_shape(beta, {in.channels}, "instance_norm", "beta");
  const std::size_t channels = in.channels;
  return normalize(x, gamma, beta, eps, in.batch * in.channels, in.length,
                   [channels](std::size_t group, std::size_t) { return group % channels; });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Seq in = as_seq(x, "layer_norm");
  if (in.channels * in.length < 2) throw DegenerateNorm("layer_norm needs at least 2 elements");
  expect_shape(gamma, {in.channels}, "layer_norm", "gamma");
  expect_shape(beta, {in.channels}, "layer_norm", "beta");
  const std::size_t length = in.length;
  return normalize(x, gamma, beta, eps, in.batch, in.channels * in.length,
                   [length](std::size_t, std::size_t i) { return i / length; });
}

// ---------------------------------------------------------------------------
// Elementwise

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [x](detail::Node& self) {
    auto& gx = x.node()->ensure_grad();
    auto xv = x.values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * gelu_derivative(xv[i]);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](detail::Node& self) {
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto& g = t->node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= c;
  return make_result(x.shape(), std::move(out), {x}, [x, c](detail::Node& self) {
    if (!x.requires_grad()) return;
    auto& g = x.node()->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mse: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.size() == 0) throw ShapeError("mse of empty tensors");
  auto av = a.values();
  auto bv = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) sum += (av[i] - bv[i]) * (av[i] - bv[i]);
  const double n = static_cast<double>(av.size());
  return make_result({1}, {sum / n}, {a, b}, [a, b, n](detail::Node& self) {
    const double scale = 2.0 * self.grad[0] / n;
    auto av = a.values();
    auto bv = b.values();
    if (a.requires_grad()) {
      auto& g = a.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * (av[i] - bv[i]);
    }
    if (b.requires_grad()) {
      auto& g = b.node()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= scale * (av[i] - bv[i]);
    }
  });
}

}  // namespace mcma
