#include "mcma/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "mcma/errors.hpp"
#include "mcma/parallel.hpp"

namespace mcma {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, ptr);
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Signal level

double pcc(std::span<const double> r, std::span<const double> g) {
  if (r.size() != g.size()) {
    throw ShapeError("pcc: lengths " + std::to_string(r.size()) + " and " + std::to_string(g.size()));
  }
  if (r.size() < 2) throw ShapeError("pcc needs at least two samples");
  const double mr = mean_of(r);
  const double mg = mean_of(g);
  double cov = 0, vr = 0, vg = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double a = r[i] - mr;
    const double b = g[i] - mg;
    cov += a * b;
    vr += a * a;
    vg += b * b;
  }
  if (vr == 0.0 || vg == 0.0) throw UndefinedCorrelation("an input has zero variance");
  return std::clamp(cov / std::sqrt(vr * vg), -1.0, 1.0);
}

double mse_metric(std::span<const double> r, std::span<const double> g) {
  if (r.size() != g.size()) {
    throw ShapeError("mse: lengths " + std::to_string(r.size()) + " and " + std::to_string(g.size()));
  }
  if (r.empty()) throw ShapeError("mse of empty vectors");
  double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += (r[i] - g[i]) * (r[i] - g[i]);
  return s / static_cast<double>(r.size());
}

std::string_view to_string(Metric m) { return m == Metric::MSE ? "mse" : "pcc"; }

MetricMatrix MetricMatrix::from_cells(Metric metric, const LeadGrid& cells) {
  MetricMatrix m;
  m.metric = metric;
  m.cells = cells;
  for (std::size_t i = 0; i < kNumLeads; ++i) {
    for (std::size_t j = 0; j < kNumLeads; ++j) m.counts[i][j] = std::isnan(cells[i][j]) ? 0 : 1;
  }
  m.refresh_means();
  return m;
}

void MetricMatrix::refresh_means() {
  double total = 0;
  std::size_t n_total = 0;
  std::array<double, kNumLeads> col_sum{};
  std::array<std::size_t, kNumLeads> col_n{};
  for (std::size_t i = 0; i < kNumLeads; ++i) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < kNumLeads; ++j) {
      const double v = cells[i][j];
      if (std::isnan(v)) continue;
      s += v;
      ++n;
      col_sum[j] += v;
      ++col_n[j];
    }
    row_means[i] = n ? s / static_cast<double>(n) : kNaN;
    total += s;
    n_total += n;
  }
  for (std::size_t j = 0; j < kNumLeads; ++j) {
    col_means[j] = col_n[j] ? col_sum[j] / static_cast<double>(col_n[j]) : kNaN;
  }
  grand_mean = n_total ? total / static_cast<double>(n_total) : kNaN;
}

std::size_t MetricMatrix::excluded_total() const {
  std::size_t n = 0;
  for (const auto& row : excluded) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

std::size_t MetricMatrix::undefined_cells() const {
  std::size_t n = 0;
  for (const auto& row : cells) n += static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](double v) { return std::isnan(v); }));
  return n;
}

Reconstructor model_reconstructor(const MCMANet& net, PaddingStrategy strategy) {
  return [&net, strategy](const EcgRecord& real, LeadId input) {
    return reconstruct(net, extract_lead(real, input), input, real.fs, strategy, real.record_id);
  };
}

Reconstructor identity_reconstructor() {
  return [](const EcgRecord& real, LeadId) { return real; };
}

SignalReport signal_matrix(const Reconstructor& recon, std::span<const EcgRecord> testset) {
  if (testset.empty()) throw EmptyDataset("signal-level evaluation needs at least one segment");
  const std::size_t n = testset.size();
  // per (segment, input lead): 12 mse values and 12 pcc values (NaN = undefined)
  std::vector<std::array<std::array<double, kNumLeads>, 2>> scores(n * kNumLeads);
  parallel_for(n * kNumLeads, [&](std::size_t task) {
    const EcgRecord& real = testset[task / kNumLeads];
    const LeadId input(task % kNumLeads);
    if (real.num_leads() != kNumLeads) {
      throw LeadNotFound("record '" + real.record_id + "' does not carry all 12 leads");
    }
    const EcgRecord gen = recon(real, input);
    if (gen.num_leads() != kNumLeads || gen.length() != real.length()) {
      throw ShapeError("reconstruction of '" + real.record_id + "' has the wrong shape");
    }
    auto& out = scores[task];
    for (std::size_t j = 0; j < kNumLeads; ++j) {
      out[0][j] = mse_metric(real.data.row(j), gen.data.row(j));
      try {
        out[1][j] = pcc(real.data.row(j), gen.data.row(j));
      } catch (const UndefinedCorrelation&) {
        out[1][j] = kNaN;
      }
    }
  });

  SignalReport report;
  report.segments = n;
  report.mse.metric = Metric::MSE;
  report.pcc.metric = Metric::PCC;
  LeadGrid mse_sum{}, pcc_sum{};
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < kNumLeads; ++i) {
      const auto& sc = scores[s * kNumLeads + i];
      for (std::size_t j = 0; j < kNumLeads; ++j) {
        mse_sum[i][j] += sc[0][j];
        ++report.mse.counts[i][j];
        if (std::isnan(sc[1][j])) {
          ++report.pcc.excluded[i][j];
        } else {
          pcc_sum[i][j] += sc[1][j];
          ++report.pcc.counts[i][j];
        }
      }
    }
  }
  for (std::size_t i = 0; i < kNumLeads; ++i) {
    for (std::size_t j = 0; j < kNumLeads; ++j) {
      report.mse.cells[i][j] = mse_sum[i][j] / static_cast<double>(n);
      const auto c = report.pcc.counts[i][j];
      report.pcc.cells[i][j] = c ? pcc_sum[i][j] / static_cast<double>(c) : kNaN;
    }
  }
  report.mse.refresh_means();
  report.pcc.refresh_means();
  return report;
}

SignalReport signal_matrix(const MCMANet& net, std::span<const EcgRecord> testset, PaddingStrategy strategy) {
  return signal_matrix(model_reconstructor(net, strategy), testset);
}

// ---------------------------------------------------------------------------
// Feature level

namespace {

std::size_t odd_window(double seconds, double fs) {
  auto w = static_cast<std::size_t>(std::lround(seconds * fs));
  return std::max<std::size_t>(1, w | 1);
}

// Centred moving average; the window shrinks at the edges.
std::vector<double> moving_average(std::span<const double> x, std::size_t window) {
  const std::size_t n = x.size();
  const std::size_t half = window / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

}  // namespace

std::vector<std::size_t> detect_rpeaks(std::span<const double> x, double fs, const DetectorConfig& cfg) {
  if (!(fs > 0)) throw InvalidSignal("detect_rpeaks: fs must be positive");
  const std::size_t n = x.size();
  if (n < 3) throw InsufficientPeaks("signal of " + std::to_string(n) + " samples");

  // band-pass surrogate: remove the slow baseline, then smooth
  auto baseline = moving_average(x, odd_window(cfg.baseline_window_s, fs));
  std::vector<double> hp(n);
  for (std::size_t i = 0; i < n; ++i) hp[i] = x[i] - baseline[i];
  auto bp = moving_average(hp, odd_window(cfg.smooth_window_s, fs));

  // slope energy, integrated over a QRS-sized window
  std::vector<double> energy(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d = (bp[i + 1] - bp[i - 1]) * fs / 2;
    energy[i] = d * d;
  }
  const std::size_t int_window = odd_window(cfg.integration_window_s, fs);
  auto integ = moving_average(energy, int_window);

  // adaptive threshold from a rolling median of block maxima
  const std::size_t block = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.block_s * fs)));
  const std::size_t n_blocks = (n + block - 1) / block;
  std::vector<double> block_max(n_blocks, 0.0);
  for (std::size_t i = 0; i < n; ++i) block_max[i / block] = std::max(block_max[i / block], integ[i]);
  std::vector<double> block_thr(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t lo = b >= cfg.median_reach ? b - cfg.median_reach : 0;
    const std::size_t hi = std::min(n_blocks, b + cfg.median_reach + 1);
    block_thr[b] = cfg.threshold_ratio *
                   median({block_max.begin() + static_cast<std::ptrdiff_t>(lo),
                           block_max.begin() + static_cast<std::ptrdiff_t>(hi)});
  }

  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double v = integ[i];
    if (v > 0 && v > block_thr[i / block] && v >= integ[i - 1] && v > integ[i + 1]) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return integ[a] > integ[b]; });

  // greedy by height, then snap each survivor to the raw sample furthest from
  // its window's median
  const auto refractory = static_cast<std::size_t>(std::lround(cfg.refractory_s * fs));
  const std::size_t reach = int_window / 2;
  auto too_close = [&](const std::vector<std::size_t>& kept, std::size_t i) {
    return std::any_of(kept.begin(), kept.end(), [&](std::size_t k) { return (k > i ? k - i : i - k) < refractory; });
  };
  std::vector<std::size_t> kept, located;
  for (std::size_t c : candidates) {
    if (too_close(kept, c)) continue;
    const std::size_t lo = c >= reach ? c - reach : 0;
    const std::size_t hi = std::min(n, c + reach + 1);
    const double level = median(std::vector<double>(x.begin() + lo, x.begin() + hi));
    std::size_t best = lo;
    for (std::size_t i = lo; i < hi; ++i) {
      if (std::abs(x[i] - level) > std::abs(x[best] - level)) best = i;
    }
    if (too_close(located, best)) continue;
    kept.push_back(c);
    // complexes cut by the record boundary sit inside the filters' edge transients
    if (best < reach || best + reach >= n) continue;
    located.push_back(best);
  }
  std::sort(located.begin(), located.end());
  if (located.size() < 2) {
    throw InsufficientPeaks("found " + std::to_string(located.size()) + " R-peak(s)");
  }
  return located;
}

double mean_heart_rate(std::span<const std::size_t> peaks, double fs) {
  if (peaks.size() < 2) throw InsufficientPeaks("need two peaks for a heart rate");
  const double span_s = static_cast<double>(peaks.back() - peaks.front()) / fs;
  if (!(span_s > 0)) throw InsufficientPeaks("peaks do not advance");
  return 60.0 * static_cast<double>(peaks.size() - 1) / span_s;
}

HeartRateSummary summarize_heart_rates(const std::array<std::optional<double>, kNumLeads>& mhr) {
  HeartRateSummary s;
  s.mhr = mhr;
  std::vector<double> vals;
  for (std::size_t j = 0; j < kNumLeads; ++j) {
    if (mhr[j]) {
      vals.push_back(*mhr[j]);
    } else {
      s.excluded.emplace_back(j);
    }
  }
  if (vals.empty()) throw NoFeasibleLeads("no lead yielded a heart rate");
  const double n = static_cast<double>(vals.size());
  auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
  // offsets from the minimum keep identical rates at exactly zero spread
  double offset = 0;
  for (double v : vals) offset += v - *mn;
  offset /= n;
  s.mmhr = *mn + offset;
  double ss = 0;
  for (double v : vals) ss += (v - *mn - offset) * (v - *mn - offset);
  s.sd = std::sqrt(ss / n);
  s.range = *mx - *mn;
  s.cv = s.sd / s.mmhr;
  return s;
}

HeartRateSummary heart_rate_summary(const EcgRecord& rec, const DetectorConfig& cfg) {
  std::array<std::optional<double>, kNumLeads> mhr{};
  for (auto lead : LeadId::all()) {
    const auto row = rec.row_of(lead);
    if (!row) continue;
    try {
      mhr[lead.index()] = mean_heart_rate(detect_rpeaks(rec.data.row(*row), rec.fs, cfg), rec.fs);
    } catch (const InsufficientPeaks&) {
    }
  }
  return summarize_heart_rates(mhr);
}

std::vector<FeatureRow> feature_table(const Reconstructor& recon, std::span<const EcgRecord> testset,
                                      const DetectorConfig& cfg) {
  if (testset.empty()) throw EmptyDataset("feature-level evaluation needs at least one record");
  const std::size_t n = testset.size();
  // slot 0: original; slots 1..12: reconstructions from each input lead
  std::vector<std::optional<HeartRateSummary>> sums(n * (kNumLeads + 1));
  parallel_for(n * (kNumLeads + 1), [&](std::size_t task) {
    const EcgRecord& real = testset[task / (kNumLeads + 1)];
    const std::size_t slot = task % (kNumLeads + 1);
    try {
      sums[task] = slot == 0 ? heart_rate_summary(real, cfg)
                             : heart_rate_summary(recon(real, LeadId(slot - 1)), cfg);
    } catch (const NoFeasibleLeads&) {
    }
  });
  std::vector<FeatureRow> rows;
  for (std::size_t slot = 0; slot <= kNumLeads; ++slot) {
    FeatureRow row;
    row.label = slot == 0 ? "Original" : std::string(LeadId(slot - 1).name());
    for (std::size_t r = 0; r < n; ++r) {
      const auto& s = sums[r * (kNumLeads + 1) + slot];
      if (!s) {
        ++row.skipped;
        continue;
      }
      row.sd += s->sd;
      row.cv += s->cv;
      row.range += s->range;
      ++row.records;
    }
    const double k = static_cast<double>(row.records);
    if (row.records) {
      row.sd /= k;
      row.cv /= k;
      row.range /= k;
    } else {
      row.sd = row.cv = row.range = kNaN;
    }
    rows.push_back(row);
  }
  FeatureRow mean{"Mean"};
  std::size_t used = 0;
  for (std::size_t slot = 1; slot <= kNumLeads; ++slot) {
    if (!rows[slot].records) continue;
    mean.sd += rows[slot].sd;
    mean.cv += rows[slot].cv;
    mean.range += rows[slot].range;
    mean.records += rows[slot].records;
    ++used;
  }
  if (used) {
    mean.sd /= static_cast<double>(used);
    mean.cv /= static_cast<double>(used);
    mean.range /= static_cast<double>(used);
  }
  rows.push_back(mean);
  return rows;
}

// ---------------------------------------------------------------------------
// Diagnostic level

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r' && c != ' ' && c != '\t') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

LabelTable read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw MalformedCsv("'" + path + "' is empty");
  auto header = split_csv(line);
  if (header.empty() || header[0] != "record_id") {
    throw MalformedCsv("'" + path + "' must start with a record_id column");
  }
  LabelTable table;
  table.classes.assign(header.begin() + 1, header.end());
  std::set<std::string> seen(table.classes.begin(), table.classes.end());
  if (seen.size() != table.classes.size()) throw MalformedCsv("'" + path + "' repeats a class column");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw MalformedCsv("'" + path + "' line " + std::to_string(line_no) + " has " +
                         std::to_string(fields.size()) + " fields, expected " + std::to_string(header.size()));
    }
    if (table.labels.count(fields[0])) {
      throw MalformedCsv("'" + path + "' repeats record '" + fields[0] + "'");
    }
    auto& set = table.labels[fields[0]];
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (fields[c] == "1") {
        set.insert(table.classes[c - 1]);
      } else if (fields[c] != "0") {
        throw MalformedCsv("'" + path + "' line " + std::to_string(line_no) + ": label must be 0 or 1");
      }
    }
  }
  return table;
}

void write_labels(const LabelTable& table, const std::string& path) {
  auto out = open_out(path);
  out << "record_id";
  for (const auto& c : table.classes) out << ',' << c;
  out << '\n';
  for (const auto& [id, set] : table.labels) {
    out << id;
    for (const auto& c : table.classes) out << ',' << (set.count(c) ? 1 : 0);
    out << '\n';
  }
}

double f1_score(double pre, double rec) { return pre + rec > 0 ? 2 * pre * rec / (pre + rec) : 0.0; }

DiagnosticReport diagnostic_report(const LabelMap& truth, const LabelMap& pred,
                                   const std::vector<std::string>& classes) {
  const std::set<std::string> known(classes.begin(), classes.end());
  for (const auto* map : {&truth, &pred}) {
    for (const auto& [id, labels] : *map) {
      for (const auto& l : labels) {
        if (!known.count(l)) throw UnknownClass("'" + l + "' in record '" + id + "'");
      }
    }
  }
  for (const auto& [id, _] : truth) {
    if (!pred.count(id)) throw RecordMismatch("record '" + id + "' has no prediction");
  }
  for (const auto& [id, _] : pred) {
    if (!truth.count(id)) throw RecordMismatch("prediction for unknown record '" + id + "'");
  }

  auto ratio = [](std::size_t num, std::size_t den, bool& undefined) {
    undefined = den == 0;
    return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  DiagnosticReport report;
  for (const auto& cls : classes) {
    ClassMetrics m;
    m.name = cls;
    for (const auto& [id, t] : truth) {
      const bool actual = t.count(cls) > 0;
      const bool predicted = pred.at(id).count(cls) > 0;
      if (actual && predicted) ++m.tp;
      else if (!actual && predicted) ++m.fp;
      else if (actual && !predicted) ++m.fn;
      else ++m.tn;
    }
    m.pre = ratio(m.tp, m.tp + m.fp, m.pre_undefined);
    m.rec = ratio(m.tp, m.tp + m.fn, m.rec_undefined);
    m.spe = ratio(m.tn, m.tn + m.fp, m.spe_undefined);
    m.f1 = ratio(2 * m.tp, 2 * m.tp + m.fn + m.fp, m.f1_undefined);
    report.classes.push_back(m);
  }
  if (!classes.empty()) {
    const double k = static_cast<double>(classes.size());
    for (const auto& m : report.classes) {
      report.macro_pre += m.pre / k;
      report.macro_rec += m.rec / k;
      report.macro_spe += m.spe / k;
      report.macro_f1 += m.f1 / k;
    }
  }
  return report;
}

DiagnosticGain diagnostic_gain(const DiagnosticReport& base, const DiagnosticReport& improved) {
  bool same = base.classes.size() == improved.classes.size();
  for (std::size_t i = 0; same && i < base.classes.size(); ++i) {
    same = base.classes[i].name == improved.classes[i].name;
  }
  if (!same) throw ClassMismatch("reports cover different class lists");
  return {improved.macro_pre - base.macro_pre, improved.macro_rec - base.macro_rec,
          improved.macro_spe - base.macro_spe, improved.macro_f1 - base.macro_f1};
}

// ---------------------------------------------------------------------------
// Report files

void write_matrix_csv(const MetricMatrix& m, const std::string& path) {
  auto out = open_out(path);
  out << "input";
  for (auto lead : LeadId::all()) out << ',' << lead.name();
  out << ",Mean\n";
  for (std::size_t i = 0; i < kNumLeads; ++i) {
    out << LeadId(i).name();
    for (std::size_t j = 0; j < kNumLeads; ++j) out << ',' << fmt(m.cells[i][j]);
    out << ',' << fmt(m.row_means[i]) << '\n';
  }
  out << "Mean";
  for (std::size_t j = 0; j < kNumLeads; ++j) out << ',' << fmt(m.col_means[j]);
  out << ',' << fmt(m.grand_mean) << '\n';
}

namespace {

nlohmann::json matrix_json(const MetricMatrix& m) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json cells = nlohmann::json::array(), counts = nlohmann::json::array(),
                 excluded = nlohmann::json::array(), rows = nlohmann::json::array(),
                 cols = nlohmann::json::array();
  for (std::size_t i = 0; i < kNumLeads; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (double v : m.cells[i]) row.push_back(num(v));
    cells.push_back(row);
    counts.push_back(m.counts[i]);
    excluded.push_back(m.excluded[i]);
    rows.push_back(num(m.row_means[i]));
    cols.push_back(num(m.col_means[i]));
  }
  return {{"metric", std::string(to_string(m.metric))},
          {"cells", cells},
          {"segment_counts", counts},
          {"excluded_segments", excluded},
          {"excluded_total", m.excluded_total()},
          {"undefined_cells", m.undefined_cells()},
          {"row_means", rows},
          {"col_means", cols},
          {"grand_mean", num(m.grand_mean)}};
}

}  // namespace

void write_signal_json(const SignalReport& report, const std::string& path) {
  nlohmann::json leads = nlohmann::json::array();
  for (auto lead : LeadId::all()) leads.push_back(std::string(lead.name()));
  nlohmann::json doc = {{"rows", "input lead"},
                        {"columns", "output lead"},
                        {"leads", leads},
                        {"aggregation", "mean of per-segment metrics; undefined PCC segments excluded"},
                        {"segments", report.segments},
                        {"mse", matrix_json(report.mse)},
                        {"pcc", matrix_json(report.pcc)}};
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_feature_csv(std::span<const FeatureRow> rows, const std::string& path) {
  auto out = open_out(path);
  out << "input,mhr_sd,mhr_cv_percent,mhr_range,records,skipped\n";
  for (const auto& r : rows) {
    out << r.label << ',' << fmt(r.sd) << ',' << fmt(100 * r.cv, 4) << ',' << fmt(r.range) << ','
        << r.records << ',' << r.skipped << '\n';
  }
}

void write_diagnostic_csv(const DiagnosticReport& report, const std::string& path) {
  auto out = open_out(path);
  out << "class,tp,fp,fn,tn,pre,rec,spe,f1,undefined\n";
  for (const auto& m : report.classes) {
    std::string flags;
    if (m.pre_undefined) flags += "pre;";
    if (m.rec_undefined) flags += "rec;";
    if (m.spe_undefined) flags += "spe;";
    if (m.f1_undefined) flags += "f1;";
    if (!flags.empty()) flags.pop_back();
    out << m.name << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << m.tn << ',' << fmt(m.pre, 4) << ','
        << fmt(m.rec, 4) << ',' << fmt(m.spe, 4) << ',' << fmt(m.f1, 4) << ',' << flags << '\n';
  }
  out << "Mean,,,,," << fmt(report.macro_pre, 4) << ',' << fmt(report.macro_rec, 4) << ','
      << fmt(report.macro_spe, 4) << ',' << fmt(report.macro_f1, 4) << ",\n";
}

void write_gain_csv(const DiagnosticGain& gain, const std::string& path) {
  auto out = open_out(path);
  out << "pre,rec,spe,f1\n"
      << fmt(gain.pre, 4) << ',' << fmt(gain.rec, 4) << ',' << fmt(gain.spe, 4) << ',' << fmt(gain.f1, 4) << '\n';
}

}  // namespace mcma
