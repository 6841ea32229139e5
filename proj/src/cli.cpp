#include "mcma/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "mcma/errors.hpp"
#include "mcma/eval.hpp"
#include "mcma/io.hpp"
#include "mcma/model.hpp"
#include "mcma/synth.hpp"
#include "mcma/training.hpp"

namespace mcma::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommands{"synth", "train", "reconstruct", "eval", "ablate"};

const std::map<std::string, std::string> kDescriptions{
    {"synth", "Write a synthetic 12-lead corpus (ECGB1 files plus R-peak sidecars)"},
    {"train", "Train a masked autoencoder on a corpus directory"},
    {"reconstruct", "Generate 12 leads from one lead of a recording"},
    {"eval", "Signal, feature or diagnostic level evaluation"},
    {"ablate", "Train and score the lead-mode x padding grid"},
};

std::vector<KeySpec> model_keys() {
  return {
      {"kernel", "5", "convolution kernel size k"},
      {"window", "2", "stride (window size) s"},
      {"channels", "12,32,64,128,256", "channel plan from the 12-lead input to the bottleneck"},
      {"segment-len", "1024", "samples per training window"},
  };
}

std::vector<KeySpec> budget_keys() {
  return {
      {"epochs", "100", "training epochs"},
      {"batch", "256", "batch size (shrinks to the training set size)"},
      {"lr", "0.001", "Adam learning rate"},
  };
}

std::map<std::string, std::vector<KeySpec>> build_keys() {
  std::map<std::string, std::vector<KeySpec>> keys;
  keys["synth"] = {
      {"out", "", "output directory"},
      {"seed", "0", "corpus seed"},
      {"count", "200", "number of records"},
      {"bpm", "72", "base heart rate"},
      {"fs", "500", "sampling rate in Hz (integer)"},
      {"seconds", "10", "record duration"},
      {"noise", "0", "standard deviation of white noise per lead, mV"},
      {"bpm-spread", "0.25", "relative half-width of the per-record rate draw"},
      {"morphology-spread", "0.2", "relative half-width of the wave and lead gain draws"},
      {"lead-wave-spread", "0", "relative half-width of the per lead and wave amplitude draw"},
  };

  keys["train"] = {{"out", "", "output directory"},
                   {"seed", "0", "split, initialisation and sampling seed"},
                   {"corpus", "", "directory of 12-lead ECGB1 records"}};
  for (auto& k : budget_keys()) keys["train"].push_back(k);
  keys["train"].push_back({"lead-mode", "arbitrary", "arbitrary | fixed:<lead>"});
  keys["train"].push_back({"padding", "zero", "zero | copy"});
  keys["train"].push_back({"checkpoint-every", "0", "also write last.mcma every N epochs (0 = only at the end)"});
  for (auto& k : model_keys()) keys["train"].push_back(k);

  keys["reconstruct"] = {
      {"out", "", "output directory"},
      {"seed", "0", "unused; accepted for a uniform interface"},
      {"checkpoint", "", "model checkpoint"},
      {"input", "", "ECGB1 or CSV recording"},
      {"lead", "", "name of the observed lead"},
      {"fs", "500", "sampling rate of CSV input"},
      {"padding", "zero", "zero | copy"},
      {"emit-pairs", "false", "also write real/generated pairs for plotting", true},
  };

  keys["eval"] = {
      {"out", "", "output directory"},
      {"seed", "0", "unused; accepted for a uniform interface"},
      {"level", "signal", "signal | feature | diagnostic"},
      {"checkpoint", "", "model checkpoint (signal and feature levels)"},
      {"reconstructor", "model", "model | identity"},
      {"corpus", "", "directory of 12-lead ECGB1 records (signal and feature levels)"},
      {"split", "all", "all | test: evaluate every record or the held-out test split"},
      {"split-seed", "0", "seed the test split was drawn with (the training seed)"},
      {"padding", "zero", "zero | copy"},
      {"segment-len", "1024", "window length of signal-level scoring"},
      {"truth", "", "ground-truth label CSV (diagnostic level)"},
      {"pred", "", "predicted label CSV (diagnostic level)"},
      {"baseline", "", "baseline predicted label CSV; adds a gain table (diagnostic level)"},
  };

  keys["ablate"] = {{"out", "", "output directory"},
                    {"seed", "0", "shared split, initialisation and sampling seed"},
                    {"corpus", "", "directory of 12-lead ECGB1 records"}};
  for (auto& k : budget_keys()) keys["ablate"].push_back(k);
  keys["ablate"].push_back({"variants", "all", "'all' or variants separated by ';', e.g. arbitrary,zero;fixed:I,copy"});
  for (auto& k : model_keys()) keys["ablate"].push_back(k);
  return keys;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig mc;
  mc.kernel_size = cfg.get_size("kernel");
  mc.window_size = cfg.get_size("window");
  mc.channel_plan = parse_channel_plan(cfg.get("channels"));
  mc.segment_len = cfg.get_size("segment-len");
  mc.seed = cfg.get_u64("seed");
  mc.validate();
  return mc;
}

TrainConfig budget(const RunConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.get_size("epochs");
  tc.batch_size = cfg.get_size("batch");
  tc.lr = cfg.get_double("lr");
  tc.seed = cfg.get_u64("seed");
  tc.validate();
  return tc;
}

void write_trace(const std::vector<EpochStats>& epochs, std::size_t best, const std::string& path) {
  TrainTrace t;
  t.epochs = epochs;
  t.best_epoch = best;
  write_trace_csv(t, path);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

const std::vector<KeySpec>& keys_for(std::string_view command) {
  static const auto keys = build_keys();
  auto it = keys.find(std::string(command));
  if (it == keys.end()) throw UsageError("unknown command '" + std::string(command) + "'");
  return it->second;
}

RunConfig::RunConfig(std::string command) : command_(std::move(command)) {
  for (const auto& k : keys_for(command_)) values_[k.key] = k.default_value;
}

const KeySpec& RunConfig::spec(const std::string& key) const {
  for (const auto& k : keys_for(command_)) {
    if (k.key == key) return k;
  }
  throw ConfigError("unknown key '" + key + "' for command " + command_);
}

void RunConfig::merge_text(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' repeated");
    if (key == "command") {
      if (value != command_) throw ConfigError(where + ": file is for command '" + value + "', not " + command_);
      continue;
    }
    spec(key);
    values_[key] = value;
  }
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path);
}

void RunConfig::set(const std::string& key, std::string value) {
  spec(key);
  values_[key] = std::move(value);
}

const std::string& RunConfig::get(const std::string& key) const {
  spec(key);
  return values_.at(key);
}

bool RunConfig::is_default(const std::string& key) const { return get(key) == spec(key).default_value; }

const std::string& RunConfig::require(const std::string& key) const {
  const auto& v = get(key);
  if (v.empty()) throw ConfigError(command_ + " needs --" + key);
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": '" + v + "' is not a finite number");
  }
  return out;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const auto& v = get(key);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  }
  return out;
}

std::size_t RunConfig::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not true or false");
}

std::string RunConfig::manifest() const {
  std::string text = "command = " + command_ + "\n";
  for (const auto& k : keys_for(command_)) {
    if (k.key == "out") continue;
    text += k.key + " = " + values_.at(k.key) + "\n";
  }
  return text;
}

void RunConfig::write_manifest(const std::string& dir) const { open_out(in_dir(dir, "manifest.cfg")) << manifest(); }

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  CorpusConfig cc;
  cc.count = cfg.get_size("count");
  cc.base.bpm = cfg.get_double("bpm");
  cc.base.fs = cfg.get_double("fs");
  cc.base.duration_s = cfg.get_double("seconds");
  cc.base.noise_std = cfg.get_double("noise");
  cc.base.seed = cfg.get_u64("seed");
  cc.bpm_spread = cfg.get_double("bpm-spread");
  cc.morphology_spread = cfg.get_double("morphology-spread");
  cc.lead_wave_spread = cfg.get_double("lead-wave-spread");
  cc.validate();
  if (cc.base.fs != std::floor(cc.base.fs)) throw ConfigError("fs must be an integer number of Hz");
  const std::string dir = cfg.require("out");

  auto corpus = synthesize_corpus(cc);
  make_dir(dir);
  for (const auto& s : corpus) {
    write_ecgb1(s.record, in_dir(dir, s.record.record_id + ".ecgb1"));
    auto peaks = open_out(in_dir(dir, s.record.record_id + ".peaks.csv"));
    peaks << "r_peak_sample\n";
    for (auto p : s.rpeaks) peaks << p << '\n';
  }
  cfg.write_manifest(dir);
  out << "wrote " << corpus.size() << " records to " << dir << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  TrainConfig tc = budget(cfg);
  tc.lead_mode = LeadMode::parse(cfg.get("lead-mode"));
  tc.strategy = padding_from_string(cfg.get("padding"));
  tc.checkpoint_every = cfg.get_size("checkpoint-every");
  const ModelConfig mc = model_config(cfg);
  const std::string dir = cfg.require("out");
  const std::string corpus_dir = cfg.require("corpus");

  const auto records = load_corpus(corpus_dir);
  const Dataset split = split_records(records, tc.seed);
  const Dataset data{segment_records(split.train, mc.segment_len), segment_records(split.val, mc.segment_len), {}};
  make_dir(dir);
  cfg.write_manifest(dir);
  {
    auto f = open_out(in_dir(dir, "split.csv"));
    f << "record_id,split\n";
    for (const auto& [name, part] : {std::pair{"train", &split.train}, {"val", &split.val}, {"test", &split.test}}) {
      for (const auto& r : *part) f << r.record_id << ',' << name << '\n';
    }
  }
  out << "training on " << data.train.size() << " segments, validating on " << data.val.size() << '\n';

  tc.checkpoint_dir = dir;
  MCMANet net = MCMANet::build(mc);
  std::vector<EpochStats> epochs;
  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  try {
    train(net, data.train, data.val, tc, [&](const EpochStats& e, const MCMANet&) {
      epochs.push_back(e);
      if (e.val_mse < best_val) {
        best_val = e.val_mse;
        best = e.epoch;
      }
      out << "epoch " << e.epoch << " train_mse " << shortest(e.train_mse) << " val_mse " << shortest(e.val_mse)
          << " train_pcc " << shortest(e.train_pcc) << " val_pcc " << shortest(e.val_pcc) << '\n';
    });
  } catch (const DivergedTraining&) {
    write_trace(epochs, best, in_dir(dir, "trace.csv"));
    throw;
  }
  write_trace(epochs, best, in_dir(dir, "trace.csv"));
  out << "best epoch " << best << " val_mse " << shortest(best_val) << "; checkpoint " << in_dir(dir, "best.mcma")
      << '\n';
  return 0;
}

int cmd_reconstruct(const RunConfig& cfg, std::ostream& out) {
  const std::string dir = cfg.require("out");
  const MCMANet net = load(cfg.require("checkpoint"));
  const EcgRecord rec = read_record(cfg.require("input"), cfg.get_double("fs"));
  const LeadId lead = LeadId::from_name(cfg.require("lead"));
  const PaddingStrategy strategy = padding_from_string(cfg.get("padding"));
  const auto observed = extract_lead(rec, lead);
  const EcgRecord gen = reconstruct(net, observed, lead, rec.fs, strategy, rec.record_id + ".generated");

  make_dir(dir);
  write_ecgb1(gen, in_dir(dir, gen.record_id + ".ecgb1"));
  write_csv(gen, in_dir(dir, gen.record_id + ".csv"));
  if (cfg.get_bool("emit-pairs")) {
    auto f = open_out(in_dir(dir, rec.record_id + ".pairs.csv"));
    std::vector<std::optional<std::size_t>> real_row;
    f << "sample";
    for (LeadId id : LeadId::all()) {
      real_row.push_back(rec.row_of(id));
      if (real_row.back()) f << ',' << id.name() << "_real";
      f << ',' << id.name() << "_generated";
    }
    f << '\n';
    for (std::size_t t = 0; t < gen.length(); ++t) {
      f << t;
      for (std::size_t j = 0; j < kNumLeads; ++j) {
        if (real_row[j]) f << ',' << shortest(rec.data(*real_row[j], t));
        f << ',' << shortest(gen.data(j, t));
      }
      f << '\n';
    }
  }
  cfg.write_manifest(dir);
  out << "generated 12 x " << gen.length() << " from lead " << lead.name() << " of " << rec.record_id << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const std::string level = cfg.get("level");
  const std::string dir = cfg.require("out");
  const bool diagnostic = level == "diagnostic";
  if (!diagnostic && level != "signal" && level != "feature") {
    throw ConfigError("level must be signal, feature or diagnostic, not '" + level + "'");
  }
  const std::vector<std::string> signal_inputs{"checkpoint", "corpus"};
  const std::vector<std::string> label_inputs{"truth", "pred", "baseline"};
  for (const auto& k : diagnostic ? signal_inputs : label_inputs) {
    if (!cfg.get(k).empty()) throw ConfigError("--" + k + " does not apply to the " + level + " level");
  }

  if (diagnostic) {
    const LabelTable truth = read_labels(cfg.require("truth"));
    const LabelTable pred = read_labels(cfg.require("pred"));
    if (pred.classes != truth.classes) throw ClassMismatch("truth and prediction files list different classes");
    const DiagnosticReport report = diagnostic_report(truth.labels, pred.labels, truth.classes);
    make_dir(dir);
    write_diagnostic_csv(report, in_dir(dir, "diagnostic.csv"));
    if (!cfg.get("baseline").empty()) {
      const LabelTable base = read_labels(cfg.get("baseline"));
      if (base.classes != truth.classes) throw ClassMismatch("truth and baseline files list different classes");
      const DiagnosticReport base_report = diagnostic_report(truth.labels, base.labels, truth.classes);
      write_gain_csv(diagnostic_gain(base_report, report), in_dir(dir, "gain.csv"));
    }
    cfg.write_manifest(dir);
    out << "macro F1 " << shortest(report.macro_f1) << '\n';
    return 0;
  }

  const std::string kind = cfg.get("reconstructor");
  if (kind != "model" && kind != "identity") throw ConfigError("reconstructor must be model or identity");
  if (kind == "identity" && !cfg.get("checkpoint").empty()) {
    throw ConfigError("--checkpoint does not apply to the identity reconstructor");
  }
  const std::string split = cfg.get("split");
  if (split != "all" && split != "test") throw ConfigError("split must be all or test");
  const PaddingStrategy strategy = padding_from_string(cfg.get("padding"));

  std::optional<MCMANet> net;
  if (kind == "model") net.emplace(load(cfg.require("checkpoint")));
  auto records = load_corpus(cfg.require("corpus"));
  if (split == "test") records = split_records(records, cfg.get_u64("split-seed")).test;
  const Reconstructor recon = net ? model_reconstructor(*net, strategy) : identity_reconstructor();

  make_dir(dir);
  if (level == "signal") {
    const std::size_t seg_len = net ? net->config().segment_len : cfg.get_size("segment-len");
    const auto segments = segment_records(records, seg_len);
    const SignalReport report = signal_matrix(recon, segments);
    write_matrix_csv(report.mse, in_dir(dir, "mse_matrix.csv"));
    write_matrix_csv(report.pcc, in_dir(dir, "pcc_matrix.csv"));
    write_signal_json(report, in_dir(dir, "signal.json"));
    out << "segments " << report.segments << " mean MSE " << shortest(report.mse.grand_mean) << " mean PCC "
        << shortest(report.pcc.grand_mean) << '\n';
  } else {
    const auto rows = feature_table(recon, records);
    write_feature_csv(rows, in_dir(dir, "features.csv"));
    out << "feature table over " << records.size() << " records\n";
  }
  cfg.write_manifest(dir);
  return 0;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  const TrainConfig tc = budget(cfg);
  const ModelConfig mc = model_config(cfg);
  const std::string dir = cfg.require("out");
  std::vector<Variant> variants;
  const std::string spec = trim(cfg.get("variants"));
  if (spec == "all") {
    variants = full_grid();
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const std::size_t semi = std::min(spec.find(';', pos), spec.size());
      variants.push_back(Variant::parse(spec.substr(pos, semi - pos)));
      pos = semi + 1;
    }
  }
  const auto records = load_corpus(cfg.require("corpus"));
  const Dataset data = split_dataset(records, tc.seed, mc.segment_len);
  const auto rows = ablate(data, variants, mc, tc);
  make_dir(dir);
  write_ablation_csv(rows, in_dir(dir, "ablation.csv"));
  cfg.write_manifest(dir);
  for (const auto& r : rows) {
    out << r.variant.to_string() << ": lead " << r.lead.name() << " MSE " << shortest(r.lead_mse) << " PCC "
        << shortest(r.lead_pcc) << ", mean MSE " << shortest(r.mean_mse) << " PCC " << shortest(r.mean_pcc) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-lead to 12-lead ECG reconstruction and evaluation", "mcma"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> given;
  std::map<std::string, std::map<std::string, bool>> switches;
  std::map<std::string, std::string> config_path;
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : kCommands) {
    CLI::App* sub = app.add_subcommand(name, kDescriptions.at(name));
    sub->add_option("--config", config_path[name], "key = value file; flags override its entries");
    for (const auto& k : keys_for(name)) {
      std::string help = k.help;
      if (!k.default_value.empty()) help += " [" + k.default_value + "]";
      if (k.flag) {
        sub->add_flag("--" + k.key, switches[name][k.key], help);
      } else {
        sub->add_option("--" + k.key, given[name][k.key], help);
      }
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    for (const auto& name : kCommands) {
      CLI::App* sub = subs[name];
      if (!sub->parsed()) continue;
      RunConfig cfg(name);
      if (!config_path[name].empty()) cfg.merge_file(config_path[name]);
      for (const auto& k : keys_for(name)) {
        if (sub->get_option("--" + k.key)->count() == 0) continue;
        cfg.set(k.key, k.flag ? (switches[name][k.key] ? "true" : "false") : given[name][k.key]);
      }
      if (name == "synth") return cmd_synth(cfg, out);
      if (name == "train") return cmd_train(cfg, out);
      if (name == "reconstruct") return cmd_reconstruct(cfg, out);
      if (name == "eval") return cmd_eval(cfg, out);
      return cmd_ablate(cfg, out);
    }
    return 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace mcma::cli
