#pragma once

// Command-line driver: JSON run configuration, command dispatch, and the
// summary.json / CSV outputs of one run.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slt/harness.hpp"
#include "slt/oracle.hpp"
#include "slt/solver.hpp"

namespace slt::cli {

enum class Command { Solve, Classical, Oracle, Verify, Diagnose, Convergence };

std::optional<Command> parse_command(std::string_view name);
std::string_view to_string(Command command);

struct RunConfig {
  int n = 2;
  double theta = 0.0;
  std::string f_spec = "const 1";
  std::string phi_spec = "const 0";
  Coefficient f = Coefficient::constant(1.0);
  Coefficient phi = Coefficient::constant(0.0);
  BcMode bc = BcMode::Robin;
  double epsilon = 1.0;  // bc "epsilon" (diagnose only)
  double offset = 0.0;
  double lambda = 0.0;   // bc "classical" (diagnose only)

  DomainDescriptor domain;
  ConvexBody body;
  double h = 1.0 / 32;
  std::vector<double> h_list;  // convergence
  GridOptions grid;

  NewtonConfig newton;
  HomotopySchedule homotopy;
  EpsilonPath eps_path = EpsilonPath::halving(8);
  double perturbation = 0.0;  // amplitude of a smooth start perturbation
  std::uint64_t seed = 0;

  int oracle_steps = 10000;
  int verify_count = 100000;
  double verify_f = 1.0;

  std::filesystem::path field;  // diagnose input
  DiagnosticSpec diag;

  bool write_field = true;
  bool write_profile = true;

  ProblemSpec problem_spec() const;
};

/// Parses and validates a configuration for the given command. Relative file
/// names resolve against base_dir. Failures are ConfigError with the key (and
/// the line where it appears) in the message.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir, Command command);

/// "const c", "quadratic a + b*r2" (a + b |x|^2) or "csv <file>".
Coefficient parse_coefficient(std::string_view spec, const std::filesystem::path& base_dir);

/// Reads a field written by write_csv back onto the grid it was computed on.
Field read_field_csv(const std::filesystem::path& path, const GridPtr& grid);

struct RunOptions {
  Command command = Command::Solve;
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;  // overrides the config's seed
  int threads = 0;                    // 0 keeps the default
};

/// Runs one command and writes out/summary.json in every case (also on
/// failure, with an error record). Returns 0 on success, 1 on a solver or
/// verification failure, 2 on a configuration error.
int run(const RunOptions& options);

/// Flag parsing for the slt executable.
int main(int argc, char** argv);

}  // namespace slt::cli
