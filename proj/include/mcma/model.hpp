#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcma/signal.hpp"
#include "mcma/tensor.hpp"

namespace mcma {

enum class NormKind : std::uint8_t { Instance = 0, Layer = 1 };

std::string_view to_string(NormKind kind);

/// Architecture of the masked autoencoder. kernel_size and window_size are the
/// k and s of every strided (transposed) convolution; channel_plan lists the
/// widths from the 12-lead input down to the bottleneck.
struct ModelConfig {
  std::size_t kernel_size = 5;
  std::size_t window_size = 2;
  std::vector<std::size_t> channel_plan{12, 32, 64, 128, 256};
  std::size_t segment_len = kSegmentLen;
  std::uint64_t seed = 0;
  NormKind encoder_norm = NormKind::Instance;
  NormKind decoder_norm = NormKind::Layer;

  std::size_t depth() const { return channel_plan.empty() ? 0 : channel_plan.size() - 1; }
  std::size_t padding() const { return (kernel_size - 1) / 2; }
  std::size_t output_padding() const { return window_size - 1; }

  /// Throws ConfigError naming the violated constraint.
  void validate() const;

  /// True when two configs describe the same parameter layout (seed ignored).
  bool same_architecture(const ModelConfig& other) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parses "12,32,64" into a channel plan.
std::vector<std::size_t> parse_channel_plan(std::string_view text);
std::string format_channel_plan(std::span<const std::size_t> plan);

struct ConvParams {
  Tensor weight;
  Tensor bias;
};

struct NormParams {
  Tensor gamma;
  Tensor beta;
};

/// Downsampling block: strided conv -> norm -> GELU.
struct MCBlock {
  ConvParams conv;
  NormParams norm;
};

/// Upsampling block: transposed conv -> norm -> GELU, except the last block
/// which is a bare transposed conv so amplitudes stay signed and unbounded.
struct MCTBlock {
  ConvParams conv;
  std::optional<NormParams> norm;
};

/// The multi-channel masked autoencoder. Decoder stage d receives the
/// encoder activation of matching resolution additively; the final stage
/// adds the masked input itself.
///
/// Parameters are tensors with shared storage, so the class is move-only;
/// use clone() for an independent copy.
class MCMANet {
 public:
  /// Throws ConfigError.
  static MCMANet build(const ModelConfig& config);

  MCMANet(MCMANet&&) = default;
  MCMANet& operator=(MCMANet&&) = default;
  MCMANet(const MCMANet&) = delete;
  MCMANet& operator=(const MCMANet&) = delete;

  MCMANet clone() const;

  /// masked: [12, L] or [B, 12, L] with L == config().segment_len.
  Tensor forward(const Tensor& masked) const;

  const ModelConfig& config() const { return config_; }
  const std::vector<MCBlock>& down_blocks() const { return down_; }
  const std::vector<MCTBlock>& up_blocks() const { return up_; }

  /// All trainable tensors in checkpoint order: encoder blocks shallow to
  /// deep (weight, bias, gamma, beta), then decoder blocks deep to shallow.
  std::vector<Tensor> parameters() const;
  std::size_t param_count() const;

  /// Overwrites this net's parameter values with `other`'s. Architectures
  /// must match.
  void copy_parameters_from(const MCMANet& other);

 private:
  MCMANet() = default;

  ModelConfig config_;
  std::vector<MCBlock> down_;
  std::vector<MCTBlock> up_;
};

/// Parameter count as a pure function of the configuration.
std::size_t param_count(const ModelConfig& config);

/// Runs a batch of already-padded 12 x L windows without building a graph.
std::vector<Matrix> forward_batch(const MCMANet& net, std::span<const Matrix> masked);

/// Generates all 12 leads from one lead of arbitrary length: segments it,
/// pads each window, runs the net and stitches the output back to the input
/// length.
EcgRecord reconstruct(const MCMANet& net, std::span<const double> single_lead, LeadId lead,
                      double fs, PaddingStrategy strategy = PaddingStrategy::Zero,
                      std::string record_id = "generated");

/// Checkpoint file: "MCMA", u32 version, u32-length-prefixed config record,
/// u64 parameter count, then little-endian float64 parameters.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save(const MCMANet& net, const std::string& path);
/// Throws CorruptCheckpoint or IncompatibleCheckpoint.
MCMANet load(const std::string& path);
/// As load(), and additionally requires the stored architecture to equal
/// `expected`.
MCMANet load(const std::string& path, const ModelConfig& expected);

}  // namespace mcma
