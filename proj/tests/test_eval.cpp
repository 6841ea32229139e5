#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mcma/errors.hpp"
#include "mcma/eval.hpp"
#include "mcma/synth.hpp"
#include "reference_tables.hpp"
#include "support.hpp"

using namespace mcma;

namespace {

// Definitional forms, evaluated in extended precision.
double pcc_oracle(const std::vector<double>& r, const std::vector<double>& g) {
  long double sr = 0, sg = 0, srg = 0, srr = 0, sgg = 0;
  const long double n = static_cast<long double>(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    sr += r[i];
    sg += g[i];
    srg += static_cast<long double>(r[i]) * g[i];
    srr += static_cast<long double>(r[i]) * r[i];
    sgg += static_cast<long double>(g[i]) * g[i];
  }
  const long double mr = sr / n, mg = sg / n;
  const long double cov = srg / n - mr * mg;
  return static_cast<double>(cov / std::sqrt((srr / n - mr * mr) * (sgg / n - mg * mg)));
}

double mse_oracle(const std::vector<double>& r, const std::vector<double>& g) {
  long double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += (static_cast<long double>(r[i]) - g[i]) * (r[i] - g[i]);
  return static_cast<double>(s / r.size());
}

std::vector<EcgRecord> synthetic_segments(std::size_t n, std::uint64_t seed) {
  CorpusConfig cfg;
  cfg.count = n;
  cfg.base.duration_s = 1024.0 / 500.0;
  cfg.base.noise_std = 0.01;
  cfg.base.seed = seed;
  std::vector<EcgRecord> out;
  for (auto& s : synthesize_corpus(cfg)) out.push_back(std::move(s.record));
  return out;
}

LabelMap labels_from_counts(const std::string& cls, std::size_t tp, std::size_t fp, std::size_t fn,
                            std::size_t tn, LabelMap* pred) {
  LabelMap truth;
  std::size_t id = 0;
  auto add = [&](bool t, bool p, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i, ++id) {
      const auto key = "r" + std::to_string(id);
      truth[key] = t ? std::set<std::string>{cls} : std::set<std::string>{};
      (*pred)[key] = p ? std::set<std::string>{cls} : std::set<std::string>{};
    }
  };
  add(true, true, tp);
  add(false, true, fp);
  add(true, false, fn);
  add(false, false, tn);
  return truth;
}

}  // namespace

TEST_CASE("pcc examples") {
  std::vector<double> x{0.3, -1.2, 4.0, 2.2};
  CHECK(pcc(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pcc(std::vector<double>{1, 2, 3}, std::vector<double>{6, 4, 2}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(pcc(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK_THROWS_AS(pcc(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), UndefinedCorrelation);
  CHECK_THROWS_AS(pcc(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(pcc(std::vector<double>{1}, std::vector<double>{1}), ShapeError);
}

TEST_CASE("mse examples") {
  std::vector<double> x{0.3, -1.2, 4.0};
  CHECK(mse_metric(x, x) == 0.0);
  CHECK(mse_metric(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
  CHECK(mse_metric(std::vector<double>{1, 2}, std::vector<double>{3, 5}) == 6.5);
  CHECK_THROWS_AS(mse_metric(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}

TEST_CASE("pcc and mse agree with definitional oracles on 1000 random pairs") {
  std::mt19937_64 rng(2718);
  std::uniform_int_distribution<std::size_t> len(2, 300);
  double worst_pcc = 0, worst_mse = 0, worst_affine = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    auto r = testing::random_values(n, rng, -2, 2);
    auto g = testing::random_values(n, rng, -2, 2);
    for (std::size_t i = 0; i < n; ++i) g[i] += 0.5 * r[i];
    const double p = pcc(r, g);
    worst_pcc = std::max(worst_pcc, std::abs(p - pcc_oracle(r, g)));
    worst_mse = std::max(worst_mse, std::abs(mse_metric(r, g) - mse_oracle(r, g)));
    CHECK(std::abs(p) <= 1.0);
    auto ra = r;
    for (auto& v : ra) v = 3.7 * v - 1.1;
    worst_affine = std::max(worst_affine, std::abs(pcc(ra, g) - p));
  }
  CHECK(worst_pcc < 1e-9);
  CHECK(worst_mse < 1e-9);
  CHECK(worst_affine < 1e-9);
}

TEST_CASE("metric matrix aggregation matches the reference tables") {
  SUBCASE("twelve column means give the grand mean") {
    LeadGrid cells{};
    for (auto& row : cells) row = reference::kMseColumnMeans;
    auto m = MetricMatrix::from_cells(Metric::MSE, cells);
    CHECK(std::round(m.grand_mean * 1e4) / 1e4 == doctest::Approx(0.0317).epsilon(1e-12));
    for (std::size_t j = 0; j < 12; ++j) CHECK(m.col_means[j] == doctest::Approx(reference::kMseColumnMeans[j]));
  }
  SUBCASE("full matrices reproduce the margins") {
    for (auto [cells, cols, grand] : {std::tuple{reference::kMseCells, reference::kMseColumnMeans, 0.0317},
                                     std::tuple{reference::kPccCells, reference::kPccColumnMeans, 0.7885}}) {
      auto m = MetricMatrix::from_cells(Metric::MSE, cells);
      // reference cells are rounded to 4 places, so recomputed margins may
      // move by one unit in the last place
      for (std::size_t j = 0; j < 12; ++j) CHECK(std::abs(m.col_means[j] - cols[j]) <= 1e-4);
      CHECK(std::abs(m.grand_mean - grand) < 5e-5);
    }
  }
  SUBCASE("NaN cells are skipped") {
    LeadGrid cells{};
    for (auto& row : cells) row.fill(1.0);
    cells[2][3] = std::nan("");
    cells[2][4] = 3.0;
    auto m = MetricMatrix::from_cells(Metric::PCC, cells);
    CHECK(m.undefined_cells() == 1);
    CHECK(m.row_means[2] == doctest::Approx(13.0 / 11));
    CHECK(m.col_means[3] == 1.0);
    CHECK(m.grand_mean == doctest::Approx(145.0 / 143));
  }
}

TEST_CASE("signal matrix of oracle reconstructors") {
  auto segs = synthetic_segments(3, 4);

  SUBCASE("identity is the fixed point") {
    auto rep = signal_matrix(identity_reconstructor(), segs);
    CHECK(rep.segments == 3);
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t j = 0; j < 12; ++j) {
        CHECK(rep.mse.cells[i][j] == 0.0);
        CHECK(rep.pcc.cells[i][j] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rep.mse.counts[i][j] == 3);
      }
    }
    CHECK(rep.mse.grand_mean == 0.0);
    CHECK(rep.pcc.excluded_total() == 0);
  }
  SUBCASE("constant zero output leaves PCC undefined") {
    Reconstructor zero = [](const EcgRecord& real, LeadId) {
      EcgRecord out = real;
      for (double& v : out.data.flat()) v = 0;
      return out;
    };
    auto rep = signal_matrix(zero, segs);
    CHECK(rep.pcc.undefined_cells() == 144);
    CHECK(rep.pcc.excluded_total() == 144 * 3);
    CHECK(std::isnan(rep.pcc.grand_mean));
    // the MSE is then the mean power of each real lead
    for (std::size_t j = 0; j < 12; ++j) {
      double p = 0;
      for (const auto& s : segs) p += mse_metric(s.data.row(j), std::vector<double>(s.length(), 0.0));
      CHECK(rep.mse.cells[5][j] == doctest::Approx(p / 3));
    }
  }
  SUBCASE("reconstructor sees the right input lead") {
    Reconstructor copy_input = [](const EcgRecord& real, LeadId lead) {
      EcgRecord out = real;
      auto x = extract_lead(real, lead);
      for (std::size_t r = 0; r < 12; ++r) std::copy(x.begin(), x.end(), out.data.row(r).begin());
      return out;
    };
    auto rep = signal_matrix(copy_input, segs);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(rep.mse.cells[i][i] == 0.0);
      for (std::size_t j = 0; j < 12; ++j) {
        if (j != i) CHECK(rep.pcc.cells[i][i] >= rep.pcc.cells[i][j]);
      }
    }
  }
  CHECK_THROWS_AS(signal_matrix(identity_reconstructor(), std::span<const EcgRecord>{}), EmptyDataset);
}

TEST_CASE("heart-rate summary arithmetic") {
  SUBCASE("peaks at 0, 0.5, 1 s on every lead") {
    std::vector<std::size_t> peaks{0, 250, 500};
    std::array<std::optional<double>, 12> mhr;
    for (auto& m : mhr) m = mean_heart_rate(peaks, 500);
    auto s = summarize_heart_rates(mhr);
    CHECK(*s.mhr[0] == 120.0);
    CHECK(s.mmhr == 120.0);
    CHECK(s.sd == 0.0);
    CHECK(s.range == 0.0);
    CHECK(s.cv == 0.0);
  }
  SUBCASE("eleven leads at 60, one at 72") {
    std::array<std::optional<double>, 12> mhr;
    for (auto& m : mhr) m = 60.0;
    mhr[7] = 72.0;
    auto s = summarize_heart_rates(mhr);
    CHECK(s.mmhr == doctest::Approx(61.0));
    CHECK(s.range == doctest::Approx(12.0));
    CHECK(s.sd == doctest::Approx(std::sqrt((11.0 + 121.0) / 12)));
    CHECK(s.sd == doctest::Approx(3.3166).epsilon(1e-4));
    CHECK(100 * s.cv == doctest::Approx(5.44).epsilon(1e-3));
  }
  SUBCASE("excluded leads change the divisor") {
    std::array<std::optional<double>, 12> mhr;
    mhr[0] = 60.0;
    mhr[1] = 70.0;
    auto s = summarize_heart_rates(mhr);
    CHECK(s.excluded.size() == 10);
    CHECK(s.mmhr == 65.0);
    CHECK(s.sd == 5.0);
    CHECK_THROWS_AS(summarize_heart_rates({}), NoFeasibleLeads);
  }
  CHECK_THROWS_AS(mean_heart_rate(std::vector<std::size_t>{10}, 500), InsufficientPeaks);
}

TEST_CASE("detector edge cases") {
  CHECK_THROWS_AS(detect_rpeaks(std::vector<double>(5000, 0.0), 500), InsufficientPeaks);

  SUBCASE("spike 50 ms after an R peak is suppressed") {
    auto s = synthesize(SynthConfig{});
    auto x = extract_lead(s.record, LeadId(1));
    const std::size_t extra = s.rpeaks[5] + 25;
    for (std::size_t i = extra - 3; i <= extra + 3; ++i) {
      const double d = static_cast<double>(i) - static_cast<double>(extra);
      x[i] += 0.8 * std::exp(-0.5 * d * d);
    }
    auto found = detect_rpeaks(x, 500);
    CHECK(found.size() == s.rpeaks.size());
    for (std::size_t k = 1; k < found.size(); ++k) CHECK(found[k] - found[k - 1] >= 100);
  }
  SUBCASE("identical leads give zero spread") {
    auto s = synthesize(SynthConfig{});
    auto lead = extract_lead(s.record, LeadId(1));
    Matrix m(12, lead.size());
    for (std::size_t r = 0; r < 12; ++r) std::copy(lead.begin(), lead.end(), m.row(r).begin());
    auto all = LeadId::all();
    auto h = heart_rate_summary(make_record(m, 500, {all.begin(), all.end()}, "same"));
    CHECK(h.sd == 0.0);
    CHECK(h.range == 0.0);
    CHECK(h.cv == 0.0);
  }
  SUBCASE("flat leads are excluded, not fatal") {
    auto s = synthesize(SynthConfig{});
    auto rec = s.record;
    for (double& v : rec.data.row(4)) v = 0;
    auto h = heart_rate_summary(rec);
    REQUIRE(h.excluded.size() == 1);
    CHECK(h.excluded[0] == LeadId(4));
    CHECK(!h.mhr[4]);
  }
}

TEST_CASE("feature table over identity reconstructions") {
  CorpusConfig cfg;
  cfg.count = 3;
  cfg.base.seed = 2;
  std::vector<EcgRecord> recs;
  for (auto& s : synthesize_corpus(cfg)) recs.push_back(std::move(s.record));
  auto rows = feature_table(identity_reconstructor(), recs);
  REQUIRE(rows.size() == 14);
  CHECK(rows.front().label == "Original");
  CHECK(rows[1].label == "I");
  CHECK(rows.back().label == "Mean");
  for (const auto& r : rows) {
    CHECK(r.sd == 0.0);
    CHECK(r.range == 0.0);
    CHECK(r.cv == 0.0);
  }
  CHECK(rows[3].records == 3);
}

TEST_CASE("F1 from the reference precision/recall pairs") {
  for (const auto& row : reference::kLeadIClassification) {
    CAPTURE(row.name);
    CHECK(std::round(f1_score(row.pre, row.rec) * 1e4) / 1e4 == doctest::Approx(row.f1).epsilon(1e-12));
  }
  CHECK(f1_score(0, 0) == 0.0);
}

TEST_CASE("diagnostic report from counts") {
  SUBCASE("counts realising Pre 0.8750 / Rec 0.7500") {
    LabelMap pred;
    auto truth = labels_from_counts("1dAVb", 21, 3, 7, 69, &pred);
    auto rep = diagnostic_report(truth, pred, {"1dAVb"});
    const auto& m = rep.classes[0];
    CHECK(m.pre == 0.875);
    CHECK(m.rec == 0.75);
    CHECK(m.spe == doctest::Approx(69.0 / 72));
    CHECK(std::round(m.f1 * 1e4) / 1e4 == doctest::Approx(0.8077));
  }
  SUBCASE("counts realising Pre 8/11 / Rec 1") {
    LabelMap pred;
    auto truth = labels_from_counts("SB", 8, 3, 0, 89, &pred);
    auto rep = diagnostic_report(truth, pred, {"SB"});
    CHECK(std::round(rep.classes[0].pre * 1e4) / 1e4 == doctest::Approx(0.7273));
    CHECK(rep.classes[0].rec == 1.0);
    CHECK(std::round(rep.classes[0].f1 * 1e4) / 1e4 == doctest::Approx(0.8421));
  }
  SUBCASE("perfect prediction") {
    LabelMap truth{{"a", {"AF"}}, {"b", {"SB", "ST"}}, {"c", {}}, {"d", {"AF", "ST"}}};
    auto rep = diagnostic_report(truth, truth, {"AF", "SB", "ST"});
    for (const auto& m : rep.classes) {
      CHECK(m.pre == 1.0);
      CHECK(m.rec == 1.0);
      CHECK(m.spe == 1.0);
      CHECK(m.f1 == 1.0);
    }
    CHECK(rep.macro_f1 == 1.0);
  }
  SUBCASE("empty denominators are flagged as zero") {
    LabelMap truth{{"a", {}}, {"b", {}}};
    auto rep = diagnostic_report(truth, truth, {"AF"});
    CHECK(rep.classes[0].pre == 0.0);
    CHECK(rep.classes[0].pre_undefined);
    CHECK(rep.classes[0].rec_undefined);
    CHECK(rep.classes[0].f1_undefined);
    CHECK(!rep.classes[0].spe_undefined);
    CHECK(rep.classes[0].spe == 1.0);
  }
  SUBCASE("errors") {
    LabelMap truth{{"a", {"AF"}}};
    CHECK_THROWS_AS(diagnostic_report(truth, LabelMap{{"a", {"XX"}}}, {"AF"}), UnknownClass);
    CHECK_THROWS_AS(diagnostic_report(truth, LabelMap{{"b", {"AF"}}}, {"AF"}), RecordMismatch);
  }
  SUBCASE("random reports stay in range and F1 is the harmonic mean") {
    std::mt19937_64 rng(31);
    std::bernoulli_distribution coin(0.3);
    std::vector<std::string> classes{"A", "B", "C"};
    for (int trial = 0; trial < 50; ++trial) {
      LabelMap truth, pred;
      for (int r = 0; r < 40; ++r) {
        auto id = std::to_string(r);
        truth[id];
        pred[id];
        for (const auto& c : classes) {
          if (coin(rng)) truth[id].insert(c);
          if (coin(rng)) pred[id].insert(c);
        }
      }
      auto rep = diagnostic_report(truth, pred, classes);
      for (const auto& m : rep.classes) {
        CHECK(m.tp + m.fp + m.fn + m.tn == 40);
        for (double v : {m.pre, m.rec, m.spe, m.f1}) CHECK((v >= 0.0 && v <= 1.0));
        if (!m.pre_undefined && !m.rec_undefined) CHECK(m.f1 == doctest::Approx(f1_score(m.pre, m.rec)));
      }
    }
  }
}

TEST_CASE("diagnostic gain") {
  DiagnosticReport base, improved;
  base.classes = improved.classes = {ClassMetrics{"A"}};
  base.macro_f1 = reference::kLeadIInputMacro.f1;
  improved.macro_f1 = reference::kLeadIGeneratedMacro.f1;
  base.macro_pre = reference::kLeadIInputMacro.pre;
  improved.macro_pre = reference::kLeadIGeneratedMacro.pre;
  base.macro_rec = reference::kLeadIInputMacro.rec;
  improved.macro_rec = reference::kLeadIGeneratedMacro.rec;
  base.macro_spe = reference::kLeadIInputMacro.spe;
  improved.macro_spe = reference::kLeadIGeneratedMacro.spe;
  auto g = diagnostic_gain(base, improved);
  CHECK(std::abs(g.f1 - reference::kLeadIGain.f1) < 1e-12);
  CHECK(std::abs(g.pre - reference::kLeadIGain.pre) < 1e-12);
  CHECK(std::abs(g.rec - reference::kLeadIGain.rec) < 1e-12);
  CHECK(std::abs(g.spe - reference::kLeadIGain.spe) < 1e-12);

  auto back = diagnostic_gain(improved, base);
  CHECK(back.f1 == -g.f1);
  CHECK(back.spe == -g.spe);
  auto zero = diagnostic_gain(base, base);
  CHECK(zero.f1 == 0.0);
  CHECK(zero.pre == 0.0);

  DiagnosticReport other = base;
  other.classes[0].name = "B";
  CHECK_THROWS_AS(diagnostic_gain(base, other), ClassMismatch);
}

TEST_CASE("label files round-trip") {
  const auto path = (std::filesystem::temp_directory_path() / "mcma_labels.csv").string();
  LabelTable t{{"AF", "SB"}, {{"r1", {"AF"}}, {"r2", {}}, {"r3", {"AF", "SB"}}}};
  write_labels(t, path);
  auto back = read_labels(path);
  CHECK(back.classes == t.classes);
  CHECK(back.labels == t.labels);
  std::ofstream(path) << "record_id,AF\nr1,2\n";
  CHECK_THROWS_AS(read_labels(path), MalformedCsv);
  std::ofstream(path) << "id,AF\nr1,1\n";
  CHECK_THROWS_AS(read_labels(path), MalformedCsv);
  std::filesystem::remove(path);
}
