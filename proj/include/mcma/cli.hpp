#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mcma::cli {

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
  /// Boolean switch on the command line (--key sets it to true).
  bool flag = false;
};

/// Keys accepted by a subcommand, in manifest order. Throws UsageError for an
/// unknown command.
const std::vector<KeySpec>& keys_for(std::string_view command);

/// Settings of one run, merged from defaults, a key = value file and
/// command-line flags (in increasing precedence).
class RunConfig {
 public:
  explicit RunConfig(std::string command);

  const std::string& command() const { return command_; }

  /// Applies "key = value" lines; '#' starts a comment. A "command" line must
  /// name this command. Throws ConfigError for unknown or repeated keys and
  /// malformed lines.
  void merge_text(std::string_view text, const std::string& origin);
  void merge_file(const std::string& path);
  void set(const std::string& key, std::string value);

  const std::string& get(const std::string& key) const;
  bool is_default(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// Throws ConfigError when the value is empty.
  const std::string& require(const std::string& key) const;

  /// Every key except "out", one "key = value" line each, after a "command"
  /// line. Feeding it back through --config replays the run.
  std::string manifest() const;
  void write_manifest(const std::string& dir) const;

 private:
  const KeySpec& spec(const std::string& key) const;

  std::string command_;
  std::map<std::string, std::string> values_;
};

int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_reconstruct(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, std::ostream& out);

/// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric divergence.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mcma::cli
