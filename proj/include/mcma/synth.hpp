#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "mcma/signal.hpp"

namespace mcma {

/// Beat morphology. Every beat is a sum of five Gaussian bumps (P, Q, R, S, T)
/// centred at fixed offsets from the R instant. P and T offsets scale with
/// sqrt(RR / 1 s) so that fast rhythms do not overlap neighbouring beats.
namespace morphology {
enum Wave : std::size_t { P = 0, Q, R, S, T, kWaves };

inline constexpr std::array<double, kWaves> kOffsetS{-0.160, -0.030, 0.0, 0.030, 0.250};
inline constexpr std::array<double, kWaves> kWidthS{0.025, 0.010, 0.012, 0.010, 0.045};
inline constexpr std::array<bool, kWaves> kRateScaled{true, false, false, false, true};

/// Amplitudes in mV per lead (rows in clinical order) and wave. Limb leads
/// satisfy III = II - I, aVR = -(I + II)/2, aVL = I - II/2, aVF = II - I/2.
/// The R bump carries the dominant deflection of every lead.
inline constexpr std::array<std::array<double, kWaves>, kNumLeads> kAmplitudeMv{{
    {0.100, -0.050, 0.700, -0.100, 0.200},     // I
    {0.150, -0.070, 1.100, -0.150, 0.300},     // II
    {0.050, -0.020, 0.400, -0.050, 0.100},     // III
    {-0.125, 0.060, -0.900, 0.125, -0.250},    // aVR
    {0.025, -0.015, 0.150, -0.025, 0.050},     // aVL
    {0.100, -0.045, 0.750, -0.100, 0.200},     // aVF
    {0.080, 0.000, -0.900, 0.000, 0.150},      // V1
    {0.080, 0.000, -1.100, 0.150, 0.300},      // V2
    {0.090, -0.030, 0.900, -0.250, 0.300},     // V3
    {0.100, -0.050, 1.400, -0.300, 0.350},     // V4
    {0.100, -0.070, 1.300, -0.150, 0.300},     // V5
    {0.100, -0.060, 1.000, -0.080, 0.250},     // V6
}};
}  // namespace morphology

constexpr std::array<std::array<double, morphology::kWaves>, kNumLeads> unit_lead_wave_scale() {
  std::array<std::array<double, morphology::kWaves>, kNumLeads> g{};
  for (auto& row : g) row.fill(1.0);
  return g;
}

struct SynthConfig {
  double bpm = 72.0;
  double fs = 500.0;
  double duration_s = 10.0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::array<double, kNumLeads> lead_scale = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  /// Multiplies each wave across all leads.
  std::array<double, morphology::kWaves> wave_scale = {1, 1, 1, 1, 1};
  /// Per lead and wave gain; entries of III, aVR, aVL and aVF are ignored
  /// because those leads are derived from I and II.
  std::array<std::array<double, morphology::kWaves>, kNumLeads> lead_wave_scale = unit_lead_wave_scale();
  /// Time of the first R instant; defaults to half an RR interval.
  std::optional<double> first_beat_s;
  std::string record_id = "synth";

  /// Throws ConfigError naming the violated range.
  void validate() const;
};

struct SynthRecord {
  EcgRecord record;
  /// Ground-truth R instants as sample indices, shared by all leads.
  std::vector<std::size_t> rpeaks;
};

SynthRecord synthesize(const SynthConfig& cfg);

/// Varied corpus around a base configuration: per record the rate, wave
/// sizes, lead gains and first-beat phase are drawn from the corpus seed.
struct CorpusConfig {
  SynthConfig base;
  std::size_t count = 200;
  /// Relative half-width of the uniform bpm draw around base.bpm.
  double bpm_spread = 0.25;
  /// Relative half-width of the wave and lead scale draws.
  double morphology_spread = 0.2;
  /// Relative half-width of the independent draw per lead and wave.
  double lead_wave_spread = 0.0;

  void validate() const;
};

std::vector<SynthRecord> synthesize_corpus(const CorpusConfig& cfg);

}  // namespace mcma
