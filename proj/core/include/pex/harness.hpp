#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pex {

enum class Command { env, walk, sep, homog, hdl, check_all };

std::string to_string(Command c);
Command command_from_string(std::string_view s);

/// Invalid or missing configuration field. `field` names the key; `line` is
/// the config-file line when the value came from a file (0 otherwise).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& msg, int line = 0);
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

enum class OutputFormat { json, csv, both };

struct ExperimentConfig {
  Command command = Command::check_all;
  std::string law = "iid:1,2";
  std::vector<int> dims{16};
  std::vector<int> n_grid{32, 64, 128};
  double horizon = 1.0;
  std::vector<double> t_grid{0.5, 1.0, 2.0};
  std::uint64_t replicas = 1000;
  std::uint64_t envs = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;  // path prefix; empty writes JSON to stdout
  OutputFormat format = OutputFormat::json;
  /// walk: alpha|omega; sep: direct|ladder; homog: alpha|omega|corrector.
  std::string kind;
  std::string profile = "sin";
  /// Test functions, ';'-separated in text form.
  std::vector<std::string> g{"cosine_bump:0.25:0.45"};
  /// "oracle" (d = 1 i.i.d. only) or a number for Sigma = value * I.
  std::string sigma = "oracle";
  double event_cap = 5e10;
  std::int64_t x0 = 0;
  double density = 0.5;
  double tol = 1e-10;

  /// Keys that were given explicitly (file or command line).
  std::set<std::string> given;

  /// Sets one field from text. Keys accept '-' or '_'.
  void set(std::string_view key, std::string_view value, int line = 0);
  /// Reads "key = value" lines; '#' starts a comment.
  void load_file(const std::string& path);
  void load(std::istream& is, const std::string& origin = "config");
  /// Checks required fields and value ranges; throws ConfigError.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static const std::vector<std::string>& keys();
};

/// derive_seed(root, fnv1a(kind), env_index, replica_index).
std::uint64_t seed_schedule(std::uint64_t root, std::string_view kind,
                            std::uint64_t env_index, std::uint64_t replica_index);

struct RunResult {
  int exit_code = 0;  // 0 pass, 1 check failed, 2 invalid config, 3 budget
  nlohmann::ordered_json report;
  std::string csv;  // empty when the command has no long-format output
  std::string message;
};

/// Executes the command without touching the filesystem.
RunResult run(const ExperimentConfig& cfg);

/// Runs, writes <out>.json / <out>.csv (or JSON to `stdout_`), prints
/// diagnostics to `err`, and returns the exit status.
int run_and_write(const ExperimentConfig& cfg, std::ostream& stdout_,
                  std::ostream& err);

}  // namespace pex
