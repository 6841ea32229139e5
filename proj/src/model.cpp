#include "mcma/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>

#include "binary_io.hpp"
#include "mcma/errors.hpp"

namespace mcma {

std::string_view to_string(NormKind kind) {
  return kind == NormKind::Instance ? "instance" : "layer";
}

void ModelConfig::validate() const {
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw ConfigError("kernel size must be odd, got " + std::to_string(kernel_size));
  }
  if (window_size == 0) throw ConfigError("window size must be positive");
  if (channel_plan.size() < 2) throw ConfigError("channel plan needs at least two entries");
  if (channel_plan.front() != kNumLeads) {
    throw ConfigError("channel plan must start at 12, got " + std::to_string(channel_plan.front()));
  }
  if (std::any_of(channel_plan.begin(), channel_plan.end(), [](auto c) { return c == 0; })) {
    throw ConfigError("channel widths must be positive");
  }
  std::size_t len = segment_len;
  for (std::size_t d = 0; d < depth(); ++d) {
    if (len % window_size != 0) {
      throw ConfigError("segment length " + std::to_string(segment_len) +
                        " is not divisible by window^depth");
    }
    len /= window_size;
  }
  const std::size_t min_len = encoder_norm == NormKind::Instance ? 2 : 1;
  if (len < min_len) {
    throw ConfigError("bottleneck length " + std::to_string(len) + " too short for normalisation");
  }
}

bool ModelConfig::same_architecture(const ModelConfig& other) const {
  return kernel_size == other.kernel_size && window_size == other.window_size &&
         channel_plan == other.channel_plan && segment_len == other.segment_len &&
         encoder_norm == other.encoder_norm && decoder_norm == other.decoder_norm;
}

std::vector<std::size_t> parse_channel_plan(std::string_view text) {
  std::vector<std::size_t> plan;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    auto item = text.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || item.empty()) {
      throw ConfigError("bad channel plan '" + std::string(text) + "'");
    }
    plan.push_back(v);
    pos = comma + 1;
  }
  return plan;
}

std::string format_channel_plan(std::span<const std::size_t> plan) {
  std::string s;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(plan[i]);
  }
  return s;
}

namespace {

Tensor uniform_param(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

NormParams make_norm(std::size_t channels) {
  return {Tensor::parameter({channels}, std::vector<double>(channels, 1.0)),
          Tensor::parameter({channels}, std::vector<double>(channels, 0.0))};
}

Tensor apply_norm(NormKind kind, const Tensor& x, const NormParams& p) {
  return kind == NormKind::Instance ? instance_norm(x, p.gamma, p.beta)
                                    : layer_norm(x, p.gamma, p.beta);
}

Tensor clone_tensor(const Tensor& t) {
  return Tensor::parameter(t.shape(), {t.values().begin(), t.values().end()});
}

}  // namespace

MCMANet MCMANet::build(const ModelConfig& config) {
  config.validate();
  MCMANet net;
  net.config_ = config;
  std::mt19937_64 rng(config.seed);
  const auto& plan = config.channel_plan;
  const std::size_t k = config.kernel_size;
  for (std::size_t d = 1; d <= config.depth(); ++d) {
    const double bound = std::sqrt(1.0 / static_cast<double>(plan[d - 1] * k));
    MCBlock block;
    block.conv.weight = uniform_param({plan[d], plan[d - 1], k}, bound, rng);
    block.conv.bias = uniform_param({plan[d]}, bound, rng);
    block.norm = make_norm(plan[d]);
    net.down_.push_back(std::move(block));
  }
  for (std::size_t d = config.depth(); d >= 1; --d) {
    const double bound = std::sqrt(1.0 / static_cast<double>(plan[d] * k));
    MCTBlock block;
    block.conv.weight = uniform_param({plan[d], plan[d - 1], k}, bound, rng);
    block.conv.bias = uniform_param({plan[d - 1]}, bound, rng);
    if (d > 1) block.norm = make_norm(plan[d - 1]);
    net.up_.push_back(std::move(block));
  }
  return net;
}

MCMANet MCMANet::clone() const {
  MCMANet out;
  out.config_ = config_;
  for (const auto& b : down_) {
    out.down_.push_back({{clone_tensor(b.conv.weight), clone_tensor(b.conv.bias)},
                         {clone_tensor(b.norm.gamma), clone_tensor(b.norm.beta)}});
  }
  for (const auto& b : up_) {
    MCTBlock c{{clone_tensor(b.conv.weight), clone_tensor(b.conv.bias)}, std::nullopt};
    if (b.norm) c.norm = NormParams{clone_tensor(b.norm->gamma), clone_tensor(b.norm->beta)};
    out.up_.push_back(std::move(c));
  }
  return out;
}

Tensor MCMANet::forward(const Tensor& masked) const {
  const bool batched = masked.rank() == 3;
  if (!(masked.rank() == 2 || batched) || masked.dim(batched ? 1 : 0) != kNumLeads ||
      masked.dim(batched ? 2 : 1) != config_.segment_len) {
    throw ShapeError("forward expects [12, " + std::to_string(config_.segment_len) + "] or [B, 12, " +
                     std::to_string(config_.segment_len) + "], got " + shape_str(masked.shape()));
  }
  const std::size_t s = config_.window_size;
  const std::size_t p = config_.padding();
  const std::size_t q = config_.output_padding();

  std::vector<Tensor> skips{masked};
  Tensor h = masked;
  for (const auto& block : down_) {
    h = conv1d(h, block.conv.weight, block.conv.bias, s, p);
    h = gelu(apply_norm(config_.encoder_norm, h, block.norm));
    skips.push_back(h);
  }
  for (std::size_t i = 0; i < up_.size(); ++i) {
    const auto& block = up_[i];
    h = conv_transpose1d(h, block.conv.weight, block.conv.bias, s, p, q);
    if (block.norm) h = gelu(apply_norm(config_.decoder_norm, h, *block.norm));
    h = add(h, skips[skips.size() - 2 - i]);
  }
  return h;
}

std::vector<Tensor> MCMANet::parameters() const {
  std::vector<Tensor> out;
  for (const auto& b : down_) {
    out.insert(out.end(), {b.conv.weight, b.conv.bias, b.norm.gamma, b.norm.beta});
  }
  for (const auto& b : up_) {
    out.insert(out.end(), {b.conv.weight, b.conv.bias});
    if (b.norm) out.insert(out.end(), {b.norm->gamma, b.norm->beta});
  }
  return out;
}

std::size_t MCMANet::param_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

void MCMANet::copy_parameters_from(const MCMANet& other) {
  if (!config_.same_architecture(other.config_)) {
    throw IncompatibleCheckpoint("cannot copy parameters between different architectures");
  }
  auto dst = parameters();
  auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::copy(src[i].values().begin(), src[i].values().end(), dst[i].mutable_values().begin());
  }
}

std::size_t param_count(const ModelConfig& config) {
  config.validate();
  const auto& plan = config.channel_plan;
  const std::size_t k = config.kernel_size;
  std::size_t n = 0;
  for (std::size_t d = 1; d <= config.depth(); ++d) {
    n += plan[d] * plan[d - 1] * k + plan[d] + 2 * plan[d];    // encoder conv + norm
    n += plan[d] * plan[d - 1] * k + plan[d - 1];              // decoder conv
    if (d > 1) n += 2 * plan[d - 1];                           // decoder norm
  }
  return n;
}

std::vector<Matrix> forward_batch(const MCMANet& net, std::span<const Matrix> masked) {
  constexpr std::size_t kChunk = 16;
  NoGradGuard no_grad;
  const std::size_t len = net.config().segment_len;
  std::vector<Matrix> out;
  out.reserve(masked.size());
  for (std::size_t start = 0; start < masked.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, masked.size() - start);
    std::vector<double> buf;
    buf.reserve(n * kNumLeads * len);
    for (std::size_t i = 0; i < n; ++i) {
      const Matrix& m = masked[start + i];
      if (m.rows() != kNumLeads || m.cols() != len) {
        throw ShapeError("forward_batch: window " + std::to_string(start + i) + " is " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
      }
      buf.insert(buf.end(), m.flat().begin(), m.flat().end());
    }
    Tensor y = net.forward(Tensor::from({n, kNumLeads, len}, std::move(buf)));
    auto yv = y.values();
    for (std::size_t i = 0; i < n; ++i) {
      Matrix m(kNumLeads, len);
      std::copy_n(yv.begin() + static_cast<std::ptrdiff_t>(i * kNumLeads * len), kNumLeads * len,
                  m.flat().begin());
      out.push_back(std::move(m));
    }
  }
  return out;
}

EcgRecord reconstruct(const MCMANet& net, std::span<const double> single_lead, LeadId lead,
                      double fs, PaddingStrategy strategy, std::string record_id) {
  const SegmentPlan plan = plan_segments(single_lead.size(), net.config().segment_len);
  std::vector<Matrix> masked;
  for (const auto& window : split(single_lead, plan)) {
    masked.push_back(apply_padding(window, lead, strategy));
  }
  auto generated = forward_batch(net, masked);
  auto all = LeadId::all();
  return make_record(reassemble(generated, plan), fs, {all.begin(), all.end()},
                     std::move(record_id));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'M', 'C', 'M', 'A'};

std::vector<std::uint8_t> encode_config(const ModelConfig& c) {
  binio::Writer w;
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.kernel_size));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.window_size));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.segment_len));
  w.uint<std::uint64_t>(c.seed);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(c.encoder_norm));
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(c.decoder_norm));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.channel_plan.size()));
  for (auto ch : c.channel_plan) w.uint<std::uint32_t>(static_cast<std::uint32_t>(ch));
  return w.data();
}

ModelConfig decode_config(binio::Reader& r, std::size_t len) {
  constexpr std::size_t kFixed = 4 + 4 + 4 + 8 + 1 + 1 + 4;
  if (len < kFixed) throw CorruptCheckpoint("config record too short");
  ModelConfig c;
  c.kernel_size = r.uint<std::uint32_t>();
  c.window_size = r.uint<std::uint32_t>();
  c.segment_len = r.uint<std::uint32_t>();
  c.seed = r.uint<std::uint64_t>();
  const auto enc = r.uint<std::uint8_t>();
  const auto dec = r.uint<std::uint8_t>();
  if (enc > 1 || dec > 1) throw CorruptCheckpoint("unknown norm kind in config record");
  c.encoder_norm = static_cast<NormKind>(enc);
  c.decoder_norm = static_cast<NormKind>(dec);
  const auto n = r.uint<std::uint32_t>();
  if (len != kFixed + 4ull * n) throw CorruptCheckpoint("config record length disagrees with its plan");
  c.channel_plan.clear();
  for (std::uint32_t i = 0; i < n; ++i) c.channel_plan.push_back(r.uint<std::uint32_t>());
  return c;
}

}  // namespace

void save(const MCMANet& net, const std::string& path) {
  binio::Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);
  const auto cfg = encode_config(net.config());
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());
  w.uint<std::uint64_t>(net.param_count());
  for (const auto& t : net.parameters()) {
    for (double v : t.values()) w.f64(v);
  }
  binio::write_file(path, w.data());
}

MCMANet load(const std::string& path) {
  const auto bytes = binio::read_file(path);
  binio::Reader r(bytes.data(), bytes.size());
  if (!r.can_read(12)) throw CorruptCheckpoint("'" + path + "' is truncated");
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw CorruptCheckpoint("'" + path + "' has bad magic");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IncompatibleCheckpoint("checkpoint version " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
  }
  const auto cfg_len = r.uint<std::uint32_t>();
  if (!r.can_read(cfg_len)) throw CorruptCheckpoint("'" + path + "' is truncated in config record");
  ModelConfig config = decode_config(r, cfg_len);
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw CorruptCheckpoint(std::string("stored config is invalid: ") + e.what());
  }
  if (!r.can_read(8)) throw CorruptCheckpoint("'" + path + "' is truncated");
  const auto count = r.uint<std::uint64_t>();
  if (count != param_count(config)) {
    throw CorruptCheckpoint("parameter count " + std::to_string(count) + " disagrees with config");
  }
  if (r.remaining() != count * 8) {
    throw CorruptCheckpoint("'" + path + "' holds " + std::to_string(r.remaining()) +
                            " parameter bytes, expected " + std::to_string(count * 8));
  }
  MCMANet net = MCMANet::build(config);
  for (auto& t : net.parameters()) {
    for (double& v : t.mutable_values()) v = r.f64();
  }
  return net;
}

MCMANet load(const std::string& path, const ModelConfig& expected) {
  MCMANet net = load(path);
  if (!net.config().same_architecture(expected)) {
    const auto& got = net.config();
    throw IncompatibleCheckpoint(
        "checkpoint architecture (k=" + std::to_string(got.kernel_size) +
        ", s=" + std::to_string(got.window_size) + ", plan=" + format_channel_plan(got.channel_plan) +
        ") differs from requested (k=" + std::to_string(expected.kernel_size) +
        ", s=" + std::to_string(expected.window_size) +
        ", plan=" + format_channel_plan(expected.channel_plan) + ")");
  }
  return net;
}

}  // namespace mcma
