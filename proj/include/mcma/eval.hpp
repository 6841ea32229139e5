#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mcma/model.hpp"
#include "mcma/signal.hpp"

namespace mcma {

// ---------------------------------------------------------------------------
// Signal level

/// Pearson correlation with population standard deviations. Throws
/// ShapeError on length mismatch or fewer than two samples, and
/// UndefinedCorrelation when either input is constant.
double pcc(std::span<const double> r, std::span<const double> g);
/// Mean squared difference. Throws ShapeError on length mismatch.
double mse_metric(std::span<const double> r, std::span<const double> g);

enum class Metric { MSE, PCC };
std::string_view to_string(Metric m);

using LeadGrid = std::array<std::array<double, kNumLeads>, kNumLeads>;
using CountGrid = std::array<std::array<std::size_t, kNumLeads>, kNumLeads>;

/// 12 x 12 table indexed (input lead, output lead). A cell averages the
/// metric over the segments where it is defined; cells with no defined
/// segment hold NaN and are left out of every mean.
struct MetricMatrix {
  Metric metric = Metric::MSE;
  LeadGrid cells{};
  CountGrid counts{};
  CountGrid excluded{};
  std::array<double, kNumLeads> row_means{};
  std::array<double, kNumLeads> col_means{};
  double grand_mean = 0.0;

  /// Builds a matrix from finished cell values and fills the means.
  static MetricMatrix from_cells(Metric metric, const LeadGrid& cells);
  void refresh_means();
  std::size_t excluded_total() const;
  std::size_t undefined_cells() const;
};

/// Produces a 12-lead record from `real` using only lead `input` of it (test
/// oracles may peek at the rest).
using Reconstructor = std::function<EcgRecord(const EcgRecord& real, LeadId input)>;

Reconstructor model_reconstructor(const MCMANet& net, PaddingStrategy strategy = PaddingStrategy::Zero);
/// Oracle returning the real record unchanged.
Reconstructor identity_reconstructor();

struct SignalReport {
  MetricMatrix mse;
  MetricMatrix pcc;
  std::size_t segments = 0;
};

/// For each input lead, reconstructs every test segment from that lead alone
/// and scores every output lead against the real one. Test records must
/// carry all 12 leads.
SignalReport signal_matrix(const Reconstructor& recon, std::span<const EcgRecord> testset);
SignalReport signal_matrix(const MCMANet& net, std::span<const EcgRecord> testset,
                           PaddingStrategy strategy = PaddingStrategy::Zero);

// ---------------------------------------------------------------------------
// Feature level

struct DetectorConfig {
  double baseline_window_s = 0.300;
  double smooth_window_s = 0.025;
  double integration_window_s = 0.150;
  double refractory_s = 0.200;
  double threshold_ratio = 0.5;
  double block_s = 2.0;
  /// Blocks on each side included in the rolling median.
  std::size_t median_reach = 2;
};

/// Strictly increasing R-peak sample indices, at least refractory_s apart.
/// Peaks within half an integration window of either end are dropped.
/// Throws InsufficientPeaks when fewer than two peaks are found.
std::vector<std::size_t> detect_rpeaks(std::span<const double> x, double fs,
                                       const DetectorConfig& cfg = {});

/// 60 (n - 1) / sum of RR intervals in seconds. Throws InsufficientPeaks.
double mean_heart_rate(std::span<const std::size_t> peaks, double fs);

struct HeartRateSummary {
  /// Per-lead MHR in beats per minute; nullopt for excluded leads.
  std::array<std::optional<double>, kNumLeads> mhr{};
  std::vector<LeadId> excluded;
  double mmhr = 0.0;
  double sd = 0.0;
  double range = 0.0;
  /// sd / mmhr, dimensionless.
  double cv = 0.0;
};

/// Aggregates per-lead rates; the SD divisor is the number of included leads
/// (12 when none is excluded). Throws NoFeasibleLeads when all are missing.
HeartRateSummary summarize_heart_rates(const std::array<std::optional<double>, kNumLeads>& mhr);
HeartRateSummary heart_rate_summary(const EcgRecord& rec, const DetectorConfig& cfg = {});

struct FeatureRow {
  std::string label;
  double sd = 0.0;
  double cv = 0.0;
  double range = 0.0;
  std::size_t records = 0;
  std::size_t skipped = 0;
};

/// Table of mean SD / CV / Range: an "Original" row from the real records,
/// one row per input lead from the reconstructions, and their "Mean".
std::vector<FeatureRow> feature_table(const Reconstructor& recon, std::span<const EcgRecord> testset,
                                      const DetectorConfig& cfg = {});

// ---------------------------------------------------------------------------
// Diagnostic level

using LabelMap = std::map<std::string, std::set<std::string>>;

struct LabelTable {
  std::vector<std::string> classes;
  LabelMap labels;
};

/// CSV with header "record_id,<class>,..." and 0/1 cells.
LabelTable read_labels(const std::string& path);
void write_labels(const LabelTable& table, const std::string& path);

struct ClassMetrics {
  std::string name;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double pre = 0, rec = 0, spe = 0, f1 = 0;
  /// Set when the matching denominator was zero and the value defaulted to 0.
  bool pre_undefined = false, rec_undefined = false, spe_undefined = false, f1_undefined = false;
};

struct DiagnosticReport {
  std::vector<ClassMetrics> classes;
  double macro_pre = 0, macro_rec = 0, macro_spe = 0, macro_f1 = 0;
};

/// Throws UnknownClass for labels outside `classes` and RecordMismatch when
/// the two maps cover different record ids.
DiagnosticReport diagnostic_report(const LabelMap& truth, const LabelMap& pred,
                                   const std::vector<std::string>& classes);

struct DiagnosticGain {
  double pre = 0, rec = 0, spe = 0, f1 = 0;
};

/// improved - base on the macro means. Throws ClassMismatch.
DiagnosticGain diagnostic_gain(const DiagnosticReport& base, const DiagnosticReport& improved);

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double pre, double rec);

// ---------------------------------------------------------------------------
// Report files

void write_matrix_csv(const MetricMatrix& m, const std::string& path);
void write_signal_json(const SignalReport& report, const std::string& path);
void write_feature_csv(std::span<const FeatureRow> rows, const std::string& path);
void write_diagnostic_csv(const DiagnosticReport& report, const std::string& path);
void write_gain_csv(const DiagnosticGain& gain, const std::string& path);

}  // namespace mcma
