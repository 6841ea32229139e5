#include "mcma/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mcma/adam.hpp"
#include "mcma/errors.hpp"
#include "mcma/eval.hpp"
#include "mcma/parallel.hpp"

namespace mcma {

namespace {

constexpr std::size_t kMicroBatch = 16;

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Mean PCC over the rows whose correlation is defined; 0 rows -> NaN.
double mean_row_pcc(const double* real, const double* gen, std::size_t rows, std::size_t len) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    try {
      sum += pcc({real + r * len, len}, {gen + r * len, len});
      ++n;
    } catch (const UndefinedCorrelation&) {
    }
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double finite_mean(std::span<const double> v) {
  double sum = 0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const std::vector<Tensor>& params) {
  Snapshot s;
  s.reserve(params.size());
  for (const auto& p : params) s.emplace_back(p.values().begin(), p.values().end());
  return s;
}

void restore(std::vector<Tensor>& params, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].mutable_values();
    std::copy(s[i].begin(), s[i].end(), dst.begin());
  }
}

bool all_finite(const std::vector<Tensor>& params) {
  for (const auto& p : params) {
    for (double v : p.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

LeadId deterministic_lead(LeadMode mode, std::size_t i) {
  return mode.arbitrary ? LeadId(i % kNumLeads) : mode.lead;
}

std::string checkpoint_path(const TrainConfig& cfg, const char* name) {
  return (std::filesystem::path(cfg.checkpoint_dir) / name).string();
}

}  // namespace

LeadMode LeadMode::parse(std::string_view text) {
  const std::string t = trim(text);
  const std::string l = lower(t);
  if (l == "arbitrary") return any();
  if (l.starts_with("fixed:")) {
    auto lead = LeadId::try_from_name(trim(std::string_view(t).substr(6)));
    if (lead) return fixed(*lead);
  }
  throw ConfigError("lead mode '" + t + "' is not arbitrary or fixed:<lead>");
}

std::string LeadMode::to_string() const {
  return arbitrary ? "arbitrary" : "fixed:" + std::string(lead.name());
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!std::isfinite(lr) || lr < 0) throw ConfigError("learning rate must be finite and >= 0");
}

Example make_example(const EcgRecord& segment, std::mt19937_64& rng, LeadMode mode,
                     PaddingStrategy strategy) {
  for (LeadId id : LeadId::all()) {
    if (!segment.row_of(id)) {
      throw LeadNotFound("record '" + segment.record_id + "' has no lead " + std::string(id.name()));
    }
  }
  const LeadId lead = mode.arbitrary ? LeadId(rng() % kNumLeads) : mode.lead;
  return {apply_padding(extract_lead(segment, lead), lead, strategy), segment.data, lead};
}

std::vector<EcgRecord> segment_records(std::span<const EcgRecord> records, std::size_t seg_len) {
  if (seg_len == 0) throw ConfigError("segment length must be positive");
  std::vector<EcgRecord> out;
  for (const auto& rec : records) {
    const std::size_t n = rec.length() / seg_len;
    for (std::size_t k = 0; k < n; ++k) {
      Matrix m(rec.num_leads(), seg_len);
      for (std::size_t r = 0; r < rec.num_leads(); ++r) {
        auto src = rec.data.row(r).subspan(k * seg_len, seg_len);
        std::copy(src.begin(), src.end(), m.row(r).begin());
      }
      EcgRecord seg{std::move(m), rec.fs, rec.leads, rec.record_id + "#" + std::to_string(k)};
      out.push_back(std::move(seg));
    }
  }
  return out;
}

Dataset split_records(std::span<const EcgRecord> records, std::uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 2) throw EmptyDataset("need at least 2 records to form train and validation splits");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

  std::size_t n_val = 1, n_test = 0;
  if (n >= 3) {
    n_val = std::max<std::size_t>((n + 5) / 10, 1);
    n_test = n_val;
  }
  const std::size_t n_train = n - n_val - n_test;

  auto pick = [&](std::size_t from, std::size_t count) {
    std::vector<EcgRecord> part;
    for (std::size_t i = from; i < from + count; ++i) part.push_back(records[order[i]]);
    std::sort(part.begin(), part.end(),
              [](const EcgRecord& a, const EcgRecord& b) { return a.record_id < b.record_id; });
    return part;
  };
  return {pick(0, n_train), pick(n_train, n_val), pick(n_train + n_val, n_test)};
}

Dataset split_dataset(std::span<const EcgRecord> records, std::uint64_t seed, std::size_t seg_len) {
  Dataset d = split_records(records, seed);
  return {segment_records(d.train, seg_len), segment_records(d.val, seg_len), segment_records(d.test, seg_len)};
}

EvalStats evaluate(const MCMANet& net, std::span<const EcgRecord> segments, LeadMode mode,
                   PaddingStrategy strategy) {
  if (segments.empty()) throw EmptyDataset("nothing to evaluate");
  const std::size_t n = segments.size();
  std::vector<double> mse(n), corr(n);
  const std::size_t chunks = (n + kMicroBatch - 1) / kMicroBatch;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kMicroBatch, hi = std::min(n, lo + kMicroBatch);
    std::vector<Matrix> masked;
    for (std::size_t i = lo; i < hi; ++i) {
      const LeadId lead = deterministic_lead(mode, i);
      masked.push_back(apply_padding(extract_lead(segments[i], lead), lead, strategy));
    }
    auto out = forward_batch(net, masked);
    for (std::size_t i = lo; i < hi; ++i) {
      const Matrix& real = segments[i].data;
      const Matrix& gen = out[i - lo];
      if (real.rows() != gen.rows() || real.cols() != gen.cols()) {
        throw ShapeError("evaluate: segment '" + segments[i].record_id + "' is not 12 x " +
                         std::to_string(gen.cols()));
      }
      mse[i] = mse_metric(real.flat(), gen.flat());
      corr[i] = mean_row_pcc(real.flat().data(), gen.flat().data(), real.rows(), real.cols());
    }
  });
  double m = 0;
  for (double v : mse) m += v;
  return {m / static_cast<double>(n), finite_mean(corr)};
}

TrainTrace train(MCMANet& net, std::span<const EcgRecord> train_set, std::span<const EcgRecord> val_set,
                 const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw EmptyDataset("training split is empty");
  if (val_set.empty()) throw EmptyDataset("validation split is empty");
  const std::size_t len = net.config().segment_len;
  for (const auto& seg : train_set) {
    if (seg.length() != len) {
      throw ShapeError("training segment '" + seg.record_id + "' has " + std::to_string(seg.length()) +
                       " samples; the net expects " + std::to_string(len));
    }
  }
  if (!cfg.checkpoint_dir.empty()) std::filesystem::create_directories(cfg.checkpoint_dir);

  auto params = net.parameters();
  Adam opt(params, AdamOptions{.lr = cfg.lr});
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n = train_set.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  const std::size_t per_sample = kNumLeads * len;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  Snapshot last_finite = snapshot(params);
  Snapshot best;
  double best_val = std::numeric_limits<double>::infinity();
  TrainTrace trace;

  auto diverge = [&](const std::string& what) {
    restore(params, last_finite);
    if (!cfg.checkpoint_dir.empty()) save(net, checkpoint_path(cfg, "last.mcma"));
    throw DivergedTraining(what + " at epoch " + std::to_string(trace.epochs.size() + 1) + ", step " +
                           std::to_string(trace.steps + 1));
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    double loss_sum = 0, pcc_sum = 0;
    std::size_t pcc_count = 0;

    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      double batch_loss = 0;
      for (std::size_t m0 = 0; m0 < b; m0 += kMicroBatch) {
        const std::size_t m = std::min(kMicroBatch, b - m0);
        std::vector<double> x, y;
        x.reserve(m * per_sample);
        y.reserve(m * per_sample);
        for (std::size_t j = 0; j < m; ++j) {
          Example ex = make_example(train_set[order[start + m0 + j]], rng, cfg.lead_mode, cfg.strategy);
          x.insert(x.end(), ex.masked.flat().begin(), ex.masked.flat().end());
          y.insert(y.end(), ex.target.flat().begin(), ex.target.flat().end());
        }
        Tensor out = net.forward(Tensor::from({m, kNumLeads, len}, std::move(x)));
        Tensor target = Tensor::from({m, kNumLeads, len}, std::move(y));
        Tensor loss = mse(out, target);
        const double value = loss.item();
        if (!std::isfinite(value)) diverge("non-finite training loss");
        scale(loss, static_cast<double>(m) / static_cast<double>(b)).backward();
        batch_loss += value * static_cast<double>(m);

        auto ov = out.values();
        auto tv = target.values();
        for (std::size_t j = 0; j < m; ++j) {
          const double p = mean_row_pcc(tv.data() + j * per_sample, ov.data() + j * per_sample, kNumLeads, len);
          if (std::isfinite(p)) {
            pcc_sum += p;
            ++pcc_count;
          }
        }
      }
      opt.step();
      ++trace.steps;
      if (!all_finite(params)) diverge("non-finite parameters");
      last_finite = snapshot(params);
      loss_sum += batch_loss;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = loss_sum / static_cast<double>(n);
    stats.train_pcc = pcc_count ? pcc_sum / static_cast<double>(pcc_count) : 0.0;
    const EvalStats val = evaluate(net, val_set, cfg.lead_mode, cfg.strategy);
    stats.val_mse = val.mse;
    stats.val_pcc = val.pcc;
    if (!std::isfinite(stats.val_mse) || !std::isfinite(stats.train_mse)) diverge("non-finite validation loss");
    trace.epochs.push_back(stats);

    if (stats.val_mse < best_val) {
      best_val = stats.val_mse;
      best = snapshot(params);
      trace.best_epoch = epoch;
      if (!cfg.checkpoint_dir.empty()) save(net, checkpoint_path(cfg, "best.mcma"));
    }
    if (!cfg.checkpoint_dir.empty() && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      save(net, checkpoint_path(cfg, "last.mcma"));
    }
    if (on_epoch) on_epoch(stats, net);
  }

  if (!cfg.checkpoint_dir.empty()) save(net, checkpoint_path(cfg, "last.mcma"));
  if (cfg.restore_best) restore(params, best);
  return trace;
}

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,train_mse,val_mse,train_pcc,val_pcc\n";
  for (const auto& e : trace.epochs) {
    out << e.epoch << ',' << shortest(e.train_mse) << ',' << shortest(e.val_mse) << ','
        << shortest(e.train_pcc) << ',' << shortest(e.val_pcc) << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Ablation

Variant Variant::parse(std::string_view text) {
  std::optional<LeadMode> mode;
  std::optional<PaddingStrategy> strategy;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string token = trim(text.substr(pos, comma - pos));
    pos = comma + 1;
    if (token.empty()) throw ConfigError("empty field in variant '" + std::string(text) + "'");
    const std::string l = lower(token);
    if (l == "zero" || l == "zeros" || l == "copy") {
      if (strategy) throw ConfigError("variant '" + std::string(text) + "' names two paddings");
      strategy = padding_from_string(l);
    } else {
      if (mode) throw ConfigError("variant '" + std::string(text) + "' names two lead modes");
      mode = LeadMode::parse(token);
    }
  }
  return {mode.value_or(LeadMode::any()), strategy.value_or(PaddingStrategy::Zero)};
}

std::string Variant::to_string() const {
  return mode.to_string() + "," + std::string(mcma::to_string(strategy));
}

std::vector<Variant> full_grid() {
  const LeadMode fixed_i = LeadMode::fixed(LeadId(0));
  return {{fixed_i, PaddingStrategy::Zero},
          {fixed_i, PaddingStrategy::Copy},
          {LeadMode::any(), PaddingStrategy::Copy},
          {LeadMode::any(), PaddingStrategy::Zero}};
}

std::vector<AblationRow> ablate(const Dataset& data, std::span<const Variant> variants,
                                const ModelConfig& model, const TrainConfig& budget) {
  if (variants.empty()) throw ConfigError("no ablation variants given");
  if (data.test.empty()) throw EmptyDataset("test split is empty");
  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    MCMANet net = MCMANet::build(model);
    TrainConfig cfg = budget;
    cfg.lead_mode = v.mode;
    cfg.strategy = v.strategy;
    cfg.checkpoint_dir.clear();
    train(net, data.train, data.val, cfg);

    const SignalReport report = signal_matrix(net, data.test, v.strategy);
    AblationRow row;
    row.variant = v;
    row.lead = v.mode.arbitrary ? LeadId(0) : v.mode.lead;
    row.lead_mse = report.mse.row_means[row.lead.index()];
    row.lead_pcc = report.pcc.row_means[row.lead.index()];
    row.mean_mse = report.mse.grand_mean;
    row.mean_pcc = report.pcc.grand_mean;
    rows.push_back(row);
  }
  return rows;
}

void write_ablation_csv(std::span<const AblationRow> rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "arbitrary,padding,input_lead,lead_mse,lead_pcc,mean_mse,mean_pcc\n";
  for (const auto& r : rows) {
    out << (r.variant.mode.arbitrary ? "Yes" : "No") << ','
        << (r.variant.strategy == PaddingStrategy::Zero ? "Zeros" : "Copy") << ',' << r.lead.name() << ','
        << shortest(r.lead_mse) << ',' << shortest(r.lead_pcc) << ',' << shortest(r.mean_mse) << ','
        << shortest(r.mean_pcc) << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace mcma
