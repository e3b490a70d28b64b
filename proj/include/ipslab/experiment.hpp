#ifndef IPSLAB_EXPERIMENT_HPP
#define IPSLAB_EXPERIMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ipslab/config.hpp"
#include "json.hpp"

namespace ipslab {

inline constexpr const char* kArtifactVersion = "ipslab 1.0.0";

enum ExitCode { kExitPass = 0, kExitFail = 1, kExitConfig = 2 };

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::optional<std::string> out;     // overrides the config output directory
  int threads = 1;                    // suites run in parallel when > 1
};

struct Failure {
  std::string suite;
  std::string invariant;
  nlohmann::json witness;
};

struct SuiteResult {
  std::string suite;
  bool passed = true;
  std::vector<Failure> failures;
  nlohmann::json summary = nlohmann::json::object();
  std::map<std::string, std::string> files;  // file name -> contents
};

struct RunResult {
  std::string out_dir;
  std::vector<SuiteResult> suites;
  bool passed() const;
};

std::string sha256_hex(const std::string& bytes);
// shortest text that reads back to the same double; inf and nan spelled out
std::string format_double(double v);
// RFC 4180 field quoting
std::string csv_field(const std::string& s);
std::string csv_row(const std::vector<std::string>& fields);

// '#' header lines carried by every output file
struct Provenance {
  std::string config_sha256;
  std::uint64_t seed = 0;
  std::string suite;
};
std::string csv_header_block(const Provenance& p);
nlohmann::json json_header(const Provenance& p);

// Runs every selected suite and writes its files; throws ConfigError for
// problems only visible once the model is built (e.g. no unique stationary measure).
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

// The commands; diagnostics go to `err`, progress to `log`.
int cmd_run(const std::string& config_path, const RunOptions& options, std::ostream& log, std::ostream& err);
int cmd_emit_plots(const std::string& run_dir, const std::optional<std::string>& out, std::ostream& log,
                   std::ostream& err);

// writes through a temporary file and a rename
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace ipslab

#endif
