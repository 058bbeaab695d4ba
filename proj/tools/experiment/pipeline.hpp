#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace vdlab::experiment {

enum class Stage { audit, ergodic, solve, sweep, adjoint, mather, select, run };

std::string to_string(Stage s);
/// Throws ConfigError for an unknown name.
Stage parse_stage(const std::string& name);

/// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;     ///< a stage threw
inline constexpr int kExitConfig = 2;      ///< config or usage error
inline constexpr int kExitVerdict = 3;     ///< stage finished but a verdict is FAIL

/// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* fields = "fields.csv";
inline constexpr const char* measures = "measures.csv";
inline constexpr const char* run = "run.json";
inline constexpr const char* audit = "audit.json";
inline constexpr const char* ergodic = "ergodic.json";
inline constexpr const char* solve = "solve.json";
inline constexpr const char* sweep = "sweep.json";
inline constexpr const char* adjoint = "adjoint.json";
inline constexpr const char* residuals = "residuals.json";
inline constexpr const char* selection = "selection.json";
}  // namespace artifact

/// Column name of the discounted solution at lambda in fields.csv.
std::string u_column(double lambda);
std::string theta_column(std::size_t source);

struct StageResult {
  int exit_code = kExitOk;
  std::string summary;  ///< one line for standard output
};

/// Executes pipeline stages against one output directory. Each stage reads the
/// artifacts of earlier stages from disk, so stages can be resumed one by one.
class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg);

  const ExperimentConfig& config() const noexcept { return cfg_; }

  /// Creates the output directory and checks that it accepts files.
  void prepare_output() const;

  StageResult audit();
  StageResult ergodic();
  StageResult solve();
  StageResult sweep();
  StageResult adjoint();
  StageResult mather();
  StageResult select();
  /// audit, ergodic, sweep, adjoint, mather, select.
  StageResult run();

  StageResult execute(Stage s);
  /// Name of the stage being executed, or of the last one.
  const std::string& current_stage() const noexcept { return current_; }

 private:
  std::string path(const char* name) const;
  void record(const std::string& stage, double seconds, const std::string& status);

  ExperimentConfig cfg_;
  std::string current_;
};

/// prepare_output + execute, with errors mapped to exit codes and the failing
/// stage named on `err`.
int run_stage(const ExperimentConfig& cfg, Stage s, std::ostream& out, std::ostream& err);

}  // namespace vdlab::experiment
