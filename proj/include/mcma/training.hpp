#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mcma/model.hpp"
#include "mcma/signal.hpp"

namespace mcma {

/// Which lead a training example exposes: a uniformly drawn one, or always
/// the same one.
struct LeadMode {
  bool arbitrary = true;
  LeadId lead{};

  static LeadMode any() { return {}; }
  static LeadMode fixed(LeadId lead) { return {false, lead}; }
  /// "arbitrary" or "fixed:<lead>"; throws ConfigError.
  static LeadMode parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const LeadMode&, const LeadMode&) = default;
};

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 100;
  double lr = 1e-3;
  PaddingStrategy strategy = PaddingStrategy::Zero;
  LeadMode lead_mode;
  std::uint64_t seed = 0;
  /// Write <checkpoint_dir>/last.mcma every this many epochs (0 = only at
  /// the end); best.mcma is rewritten whenever validation MSE improves.
  std::size_t checkpoint_every = 0;
  std::string checkpoint_dir;
  /// Leave the best-validation parameters in the net when training ends.
  bool restore_best = true;

  /// Throws ConfigError.
  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_mse = 0;
  double val_mse = 0;
  double train_pcc = 0;
  double val_pcc = 0;
};

struct TrainTrace {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

struct Example {
  Matrix masked;
  Matrix target;
  LeadId lead;
};

/// Masks one lead of a 12-lead segment. Throws LeadNotFound when the segment
/// lacks any of the 12 leads.
Example make_example(const EcgRecord& segment, std::mt19937_64& rng, LeadMode mode,
                     PaddingStrategy strategy);

/// Non-overlapping windows of seg_len samples from every record
/// (floor(length / seg_len) per record); tails shorter than a window are
/// dropped.
std::vector<EcgRecord> segment_records(std::span<const EcgRecord> records, std::size_t seg_len = kSegmentLen);

struct Dataset {
  std::vector<EcgRecord> train, val, test;
};

/// Shuffles records with `seed` and splits them 8:1:1 by record (at least one
/// validation and one test record from three records up; two records split
/// 1:1:0). Each split keeps record-id order. Throws EmptyDataset when fewer
/// than two records are given.
Dataset split_records(std::span<const EcgRecord> records, std::uint64_t seed);

/// split_records followed by segment_records on each split, so no record
/// contributes to two splits.
Dataset split_dataset(std::span<const EcgRecord> records, std::uint64_t seed,
                      std::size_t seg_len = kSegmentLen);

/// Mean MSE and mean per-lead PCC of the net over `segments`, masking a
/// deterministic lead per segment: the fixed lead, or lead (i mod 12) for
/// segment i in arbitrary mode.
struct EvalStats {
  double mse = 0;
  double pcc = 0;
};
EvalStats evaluate(const MCMANet& net, std::span<const EcgRecord> segments, LeadMode mode,
                   PaddingStrategy strategy);

using EpochCallback = std::function<void(const EpochStats&, const MCMANet&)>;

/// Minimises the MSE between forward(masked) and the 12-lead target with
/// Adam. Validation segments only feed the trace and best-model selection.
/// Throws EmptyDataset for an empty split and DivergedTraining when the loss
/// becomes non-finite, after restoring the last finite parameters (and
/// writing them as last.mcma when a checkpoint directory is set).
TrainTrace train(MCMANet& net, std::span<const EcgRecord> train_set, std::span<const EcgRecord> val_set,
                 const TrainConfig& cfg, const EpochCallback& on_epoch = {});

void write_trace_csv(const TrainTrace& trace, const std::string& path);

// ---------------------------------------------------------------------------
// Ablation

struct Variant {
  LeadMode mode;
  PaddingStrategy strategy = PaddingStrategy::Zero;

  /// "arbitrary,zero" or "fixed:I,copy"; throws ConfigError.
  static Variant parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const Variant&, const Variant&) = default;
};

/// The 2 x 2 grid: fixed lead I and arbitrary, each with zero and copy.
std::vector<Variant> full_grid();

struct AblationRow {
  Variant variant;
  /// Input lead of the single-lead columns: the fixed lead, or lead I.
  LeadId lead;
  double lead_mse = 0, lead_pcc = 0;
  /// Means over all 12 input leads.
  double mean_mse = 0, mean_pcc = 0;
};

/// Trains one model per variant from the same initial parameters, data order
/// seed and budget, and scores each on the held-out test split.
std::vector<AblationRow> ablate(const Dataset& data, std::span<const Variant> variants,
                                const ModelConfig& model, const TrainConfig& budget);

void write_ablation_csv(std::span<const AblationRow> rows, const std::string& path);

}  // namespace mcma
