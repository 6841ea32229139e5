#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "mcma/errors.hpp"
#include "mcma/synth.hpp"
#include "mcma/training.hpp"

using namespace mcma;
namespace fs = std::filesystem;

namespace {

std::vector<EcgRecord> corpus(std::size_t count, double seconds, std::uint64_t seed = 0) {
  CorpusConfig cc;
  cc.count = count;
  cc.base.duration_s = seconds;
  cc.base.seed = seed;
  std::vector<EcgRecord> out;
  for (auto& s : synthesize_corpus(cc)) out.push_back(std::move(s.record));
  return out;
}

ModelConfig tiny(std::size_t len) {
  ModelConfig mc;
  mc.channel_plan = {12, 8, 16};
  mc.window_size = 4;
  mc.segment_len = len;
  return mc;
}

std::vector<std::vector<double>> values_of(const MCMANet& net) {
  std::vector<std::vector<double>> out;
  for (const auto& p : net.parameters()) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

}  // namespace

TEST_CASE("make_example masking") {
  auto recs = segment_records(corpus(1, 2.1), 1024);
  REQUIRE(recs.size() == 1);
  const EcgRecord& seg = recs[0];
  std::mt19937_64 rng(3);

  SUBCASE("arbitrary draws are uniform") {
    std::mt19937_64 draws(0);
    std::array<int, kNumLeads> counts{};
    for (int i = 0; i < 12000; ++i) ++counts[make_example(seg, draws, LeadMode::any(), PaddingStrategy::Zero).lead.index()];
    double chi2 = 0;
    for (int c : counts) {
      CHECK(c >= 950);
      CHECK(c <= 1050);
      chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    }
    CHECK(chi2 < 24.725);  // 11 degrees of freedom, p = 0.01
  }
  SUBCASE("fixed lead") {
    for (int i = 0; i < 50; ++i) {
      CHECK(make_example(seg, rng, LeadMode::fixed(LeadId(0)), PaddingStrategy::Zero).lead == LeadId(0));
    }
  }
  SUBCASE("zero padding leaves one nonzero row") {
    Example ex = make_example(seg, rng, LeadMode::any(), PaddingStrategy::Zero);
    int nonzero = 0;
    for (std::size_t r = 0; r < kNumLeads; ++r) {
      auto row = ex.masked.row(r);
      if (std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) ++nonzero;
    }
    CHECK(nonzero == 1);
    CHECK(ex.target == seg.data);
    auto src = seg.data.row(ex.lead.index());
    auto got = ex.masked.row(ex.lead.index());
    CHECK(std::equal(src.begin(), src.end(), got.begin()));
  }
  SUBCASE("copy padding repeats the lead") {
    Example ex = make_example(seg, rng, LeadMode::fixed(LeadId(7)), PaddingStrategy::Copy);
    auto src = seg.data.row(7);
    for (std::size_t r = 0; r < kNumLeads; ++r) {
      auto row = ex.masked.row(r);
      CHECK(std::equal(src.begin(), src.end(), row.begin()));
    }
  }
  SUBCASE("missing lead") {
    Matrix m(11, 1024);
    std::vector<LeadId> ids;
    for (std::size_t i = 0; i < 11; ++i) ids.emplace_back(i);
    EcgRecord partial = make_record(m, 500, ids, "p");
    CHECK_THROWS_AS(make_example(partial, rng, LeadMode::fixed(LeadId(0)), PaddingStrategy::Zero), LeadNotFound);
  }
}

TEST_CASE("lead mode and variant parsing") {
  CHECK(LeadMode::parse("arbitrary") == LeadMode::any());
  CHECK(LeadMode::parse("fixed:I") == LeadMode::fixed(LeadId(0)));
  CHECK(LeadMode::parse("Fixed:avf").lead == LeadId(5));
  CHECK(LeadMode::fixed(LeadId(8)).to_string() == "fixed:V3");
  CHECK_THROWS_AS(LeadMode::parse("fixed:X"), ConfigError);
  CHECK_THROWS_AS(LeadMode::parse("sometimes"), ConfigError);

  Variant v = Variant::parse("zero,arbitrary");
  CHECK(v.mode.arbitrary);
  CHECK(v.strategy == PaddingStrategy::Zero);
  CHECK(Variant::parse("fixed:I, copy") == Variant{LeadMode::fixed(LeadId(0)), PaddingStrategy::Copy});
  CHECK(Variant::parse(v.to_string()) == v);
  CHECK_THROWS_AS(Variant::parse("zero,copy"), ConfigError);
  CHECK_THROWS_AS(Variant::parse("arbitrary,,zero"), ConfigError);
  CHECK(full_grid().size() == 4);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lr = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("segmenting and splitting") {
  auto recs = corpus(20, 10.0);
  auto segs = segment_records(recs, 1024);
  CHECK(segs.size() == 20 * 4);
  CHECK(segs[1].record_id == "rec00#1");
  CHECK(segs[1].data(3, 0) == recs[0].data(3, 1024));

  Dataset d = split_dataset(recs, 5);
  CHECK(d.train.size() == 16 * 4);
  CHECK(d.val.size() == 2 * 4);
  CHECK(d.test.size() == 2 * 4);
  auto source = [](const EcgRecord& s) { return s.record_id.substr(0, s.record_id.find('#')); };
  std::set<std::string> train_ids, held;
  for (auto& s : d.train) train_ids.insert(source(s));
  for (auto* part : {&d.val, &d.test}) {
    for (auto& s : *part) held.insert(source(s));
  }
  for (auto& id : held) CHECK(train_ids.count(id) == 0);
  CHECK(held.size() == 4);

  Dataset again = split_dataset(recs, 5);
  CHECK(again.val[0].record_id == d.val[0].record_id);
  CHECK(split_dataset(recs, 6).val[0].record_id != d.val[0].record_id);

  Dataset two = split_dataset(std::span(recs).first(2), 0);
  CHECK(two.train.size() == 4);
  CHECK(two.val.size() == 4);
  CHECK(two.test.empty());
  CHECK_THROWS_AS(split_dataset(std::span(recs).first(1), 0), EmptyDataset);
}

TEST_CASE("training loop") {
  auto segs = segment_records(corpus(12, 2.0), 256);
  std::vector<EcgRecord> train_set(segs.begin(), segs.begin() + 30);
  std::vector<EcgRecord> val_set(segs.begin() + 30, segs.end());
  TrainConfig cfg;
  cfg.batch_size = 8;

  SUBCASE("lr 0 leaves parameters unchanged") {
    MCMANet net = MCMANet::build(tiny(256));
    const auto before = values_of(net);
    cfg.lr = 0;
    cfg.epochs = 3;
    TrainTrace trace = train(net, train_set, val_set, cfg);
    CHECK(values_of(net) == before);
    REQUIRE(trace.epochs.size() == 3);
    CHECK(trace.epochs[1].val_mse == trace.epochs[0].val_mse);
    CHECK(trace.epochs[2].val_mse == trace.epochs[0].val_mse);
    CHECK(trace.steps == 3 * 4);
  }
  SUBCASE("mse decreases and checkpoints are written") {
    const fs::path dir = fs::temp_directory_path() / "mcma_train_ckpt";
    fs::remove_all(dir);
    MCMANet net = MCMANet::build(tiny(256));
    cfg.epochs = 10;
    cfg.checkpoint_dir = dir.string();
    std::size_t calls = 0;
    TrainTrace trace = train(net, train_set, val_set, cfg, [&](const EpochStats&, const MCMANet&) { ++calls; });
    REQUIRE(trace.epochs.size() == 10);
    CHECK(calls == 10);
    CHECK(trace.epochs[9].train_mse < trace.epochs[0].train_mse);
    for (const auto& e : trace.epochs) {
      CHECK(std::isfinite(e.train_mse));
      CHECK(std::isfinite(e.val_mse));
      CHECK(std::isfinite(e.train_pcc));
      CHECK(std::isfinite(e.val_pcc));
    }
    // the net holds the best-validation parameters, which is what best.mcma stores
    MCMANet best = load((dir / "best.mcma").string());
    CHECK(values_of(best) == values_of(net));
    CHECK(fs::exists(dir / "last.mcma"));
    double best_val = 1e300;
    for (const auto& e : trace.epochs) best_val = std::min(best_val, e.val_mse);
    CHECK(trace.epochs[trace.best_epoch - 1].val_mse == best_val);
    fs::remove_all(dir);
  }
  SUBCASE("same seed gives the same trace") {
    cfg.epochs = 2;
    MCMANet a = MCMANet::build(tiny(256));
    MCMANet b = MCMANet::build(tiny(256));
    auto ta = train(a, train_set, val_set, cfg);
    auto tb = train(b, train_set, val_set, cfg);
    CHECK(ta.epochs[1].train_mse == tb.epochs[1].train_mse);
    CHECK(values_of(a) == values_of(b));
  }
  SUBCASE("divergence keeps finite parameters") {
    const fs::path dir = fs::temp_directory_path() / "mcma_train_div";
    fs::remove_all(dir);
    MCMANet net = MCMANet::build(tiny(256));
    cfg.lr = 1e200;
    cfg.epochs = 5;
    cfg.checkpoint_dir = dir.string();
    CHECK_THROWS_AS(train(net, train_set, val_set, cfg), DivergedTraining);
    for (const auto& p : net.parameters()) {
      for (double v : p.values()) REQUIRE(std::isfinite(v));
    }
    MCMANet last = load((dir / "last.mcma").string());
    CHECK(values_of(last) == values_of(net));
    fs::remove_all(dir);
  }
  SUBCASE("empty splits") {
    MCMANet net = MCMANet::build(tiny(256));
    CHECK_THROWS_AS(train(net, {}, val_set, cfg), EmptyDataset);
    CHECK_THROWS_AS(train(net, train_set, {}, cfg), EmptyDataset);
  }
  SUBCASE("segment length must match the net") {
    MCMANet net = MCMANet::build(tiny(128));
    CHECK_THROWS_AS(train(net, train_set, val_set, cfg), ShapeError);
  }
}

TEST_CASE("fixed-lead training favours its own lead") {
  auto segs = segment_records(corpus(8, 0.52), 256);
  REQUIRE(segs.size() == 8);
  MCMANet net = MCMANet::build(tiny(256));
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 150;
  cfg.lead_mode = LeadMode::fixed(LeadId(7));
  train(net, segs, segs, cfg);
  const double own = evaluate(net, segs, cfg.lead_mode, cfg.strategy).mse;
  for (std::size_t lead = 0; lead < kNumLeads; ++lead) {
    if (lead == 7) continue;
    CAPTURE(lead);
    CHECK(own < evaluate(net, segs, LeadMode::fixed(LeadId(lead)), cfg.strategy).mse);
  }
}

TEST_CASE("ablation grid") {
  auto recs = corpus(10, 1.1);
  Dataset d = split_dataset(recs, 0, 256);
  TrainConfig budget;
  budget.batch_size = 8;
  budget.epochs = 2;
  const ModelConfig mc = tiny(256);

  const Variant v = Variant::parse("arbitrary,zero");
  const std::vector<Variant> twice{v, v};
  auto rows = ablate(d, twice, mc, budget);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].mean_mse == rows[1].mean_mse);
  CHECK(rows[0].lead_pcc == rows[1].lead_pcc);
  CHECK(rows[0].lead == LeadId(0));

  auto grid = full_grid();
  auto all = ablate(d, grid, mc, budget);
  REQUIRE(all.size() == 4);
  CHECK(all[3].mean_mse == rows[0].mean_mse);
  CHECK_FALSE(all[0].variant.mode.arbitrary);
  CHECK_THROWS_AS(ablate(d, {}, mc, budget), ConfigError);

  const fs::path path = fs::temp_directory_path() / "mcma_ablation.csv";
  write_ablation_csv(all, path.string());
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "arbitrary,padding,input_lead,lead_mse,lead_pcc,mean_mse,mean_pcc");
  CHECK(first.rfind("No,Zeros,I,", 0) == 0);
  fs::remove(path);
}
