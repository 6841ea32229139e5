#include "mcma/synth.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mcma/errors.hpp"

namespace mcma {

using namespace morphology;

namespace {

constexpr double kMinBpm = 20.0;
constexpr double kMaxBpm = 300.0;
constexpr double kMinFs = 100.0;
constexpr double kBumpReach = 5.0;  // sigmas

std::string num(double v) {
  std::string s = std::to_string(v);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

void add_bump(std::span<double> row, double centre, double sigma, double amp) {
  if (amp == 0.0) return;
  const auto n = static_cast<std::ptrdiff_t>(row.size());
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(centre - kBumpReach * sigma)));
  const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::floor(centre + kBumpReach * sigma)));
  for (auto i = lo; i <= hi; ++i) {
    const double z = (static_cast<double>(i) - centre) / sigma;
    row[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * z * z);
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (!(bpm >= kMinBpm && bpm <= kMaxBpm)) {
    throw ConfigError("bpm " + num(bpm) + " outside the valid range [20, 300]");
  }
  if (!(fs >= kMinFs) || !std::isfinite(fs)) throw ConfigError("fs " + num(fs) + " must be at least 100 Hz");
  if (!(duration_s > 0) || !std::isfinite(duration_s)) throw ConfigError("duration must be positive");
  if (!(noise_std >= 0) || !std::isfinite(noise_std)) throw ConfigError("noise std must be non-negative");
  if (std::llround(fs * duration_s) < 1) throw ConfigError("fs * duration yields no samples");
  for (double g : lead_scale) {
    if (!std::isfinite(g)) throw ConfigError("lead scale must be finite");
  }
  for (double g : wave_scale) {
    if (!std::isfinite(g)) throw ConfigError("wave scale must be finite");
  }
  for (const auto& row : lead_wave_scale) {
    for (double g : row) {
      if (!std::isfinite(g)) throw ConfigError("lead wave scale must be finite");
    }
  }
  if (first_beat_s && !std::isfinite(*first_beat_s)) throw ConfigError("first beat must be finite");
}

SynthRecord synthesize(const SynthConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(std::llround(cfg.fs * cfg.duration_s));
  const double rr_s = 60.0 / cfg.bpm;
  const double rate_factor = std::sqrt(rr_s);
  const double first_s = cfg.first_beat_s.value_or(rr_s / 2);

  // I and II carry the independent limb morphology; the other four limb leads
  // follow from them so the Einthoven and Goldberger relations hold exactly.
  std::array<std::array<double, kWaves>, kNumLeads> amp{};
  for (std::size_t w = 0; w < kWaves; ++w) {
    const double a1 = kAmplitudeMv[0][w] * cfg.wave_scale[w] * cfg.lead_wave_scale[0][w] * cfg.lead_scale[0];
    const double a2 = kAmplitudeMv[1][w] * cfg.wave_scale[w] * cfg.lead_wave_scale[1][w] * cfg.lead_scale[1];
    amp[0][w] = a1;
    amp[1][w] = a2;
    amp[2][w] = (a2 - a1) * cfg.lead_scale[2];
    amp[3][w] = -(a1 + a2) / 2 * cfg.lead_scale[3];
    amp[4][w] = (a1 - a2 / 2) * cfg.lead_scale[4];
    amp[5][w] = (a2 - a1 / 2) * cfg.lead_scale[5];
    for (std::size_t lead = 6; lead < kNumLeads; ++lead) {
      amp[lead][w] = kAmplitudeMv[lead][w] * cfg.wave_scale[w] * cfg.lead_wave_scale[lead][w] * cfg.lead_scale[lead];
    }
  }

  Matrix data(kNumLeads, n);
  std::vector<std::size_t> rpeaks;
  // Beats just outside the window still leak P or T waves into it.
  const double margin_s = 1.0;
  const auto k_lo = static_cast<long>(std::floor((-margin_s - first_s) / rr_s));
  const auto k_hi = static_cast<long>(std::ceil((cfg.duration_s + margin_s - first_s) / rr_s));
  for (long k = k_lo; k <= k_hi; ++k) {
    const double r_idx = std::round((first_s + static_cast<double>(k) * rr_s) * cfg.fs);
    if (r_idx >= 0 && r_idx < static_cast<double>(n)) rpeaks.push_back(static_cast<std::size_t>(r_idx));
    for (std::size_t w = 0; w < kWaves; ++w) {
      const double scale = kRateScaled[w] ? rate_factor : 1.0;
      const double centre = r_idx + kOffsetS[w] * scale * cfg.fs;
      const double sigma = kWidthS[w] * cfg.fs;
      for (std::size_t lead = 0; lead < kNumLeads; ++lead) add_bump(data.row(lead), centre, sigma, amp[lead][w]);
    }
  }
  if (cfg.noise_std > 0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    for (double& v : data.flat()) v += noise(rng);
  }
  auto all = LeadId::all();
  return {make_record(std::move(data), cfg.fs, {all.begin(), all.end()}, cfg.record_id), std::move(rpeaks)};
}

void CorpusConfig::validate() const {
  base.validate();
  if (count == 0) throw ConfigError("corpus count must be at least 1");
  if (!(bpm_spread >= 0 && bpm_spread < 1)) throw ConfigError("bpm spread must be in [0, 1)");
  if (!(morphology_spread >= 0 && morphology_spread < 1)) {
    throw ConfigError("morphology spread must be in [0, 1)");
  }
  if (!(lead_wave_spread >= 0 && lead_wave_spread < 1)) {
    throw ConfigError("lead wave spread must be in [0, 1)");
  }
}

std::vector<SynthRecord> synthesize_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.base.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.3, 1.0);
  const int width = static_cast<int>(std::to_string(cfg.count - 1).size());
  std::vector<SynthRecord> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    SynthConfig rc = cfg.base;
    rc.bpm = std::clamp(cfg.base.bpm * (1 + cfg.bpm_spread * unit(rng)), kMinBpm, kMaxBpm);
    for (auto& g : rc.wave_scale) g *= 1 + cfg.morphology_spread * unit(rng);
    // derived limb leads keep their Einthoven relation to I and II
    for (std::size_t lead : {0, 1, 6, 7, 8, 9, 10, 11}) {
      rc.lead_scale[lead] *= 1 + cfg.morphology_spread * unit(rng);
    }
    if (cfg.lead_wave_spread > 0) {
      for (std::size_t lead : {0, 1, 6, 7, 8, 9, 10, 11}) {
        for (auto& g : rc.lead_wave_scale[lead]) g *= 1 + cfg.lead_wave_spread * unit(rng);
      }
    }
    rc.first_beat_s = phase(rng) * 60.0 / rc.bpm;
    rc.seed = rng();
    std::string idx = std::to_string(i);
    rc.record_id = "rec" + std::string(static_cast<std::size_t>(width) - idx.size(), '0') + idx;
    out.push_back(synthesize(rc));
  }
  return out;
}

}  // namespace mcma
