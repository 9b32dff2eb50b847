#pragma once

#include "config.hpp"

#include "flucsr/evaluation.hpp"
#include "flucsr/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace flucsr::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3, kNumericalError = 4 };

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Subcommand bodies; each writes its outputs plus a `run.meta` sidecar in
// the directory of its primary output.
void cmd_simulate(const RunConfig& rc, const std::filesystem::path& stack, const std::filesystem::path& truth,
                  std::ostream& out);
void cmd_stats(const std::filesystem::path& stack, const std::filesystem::path& mean,
               const std::filesystem::path& cov, std::ostream& out);
SolverReport cmd_solve(const RunConfig& rc, const std::filesystem::path& data, const std::filesystem::path& recon,
                       const std::filesystem::path& log, std::ostream& out);
std::map<std::string, std::string> cmd_evaluate(const std::filesystem::path& truth,
                                                const std::filesystem::path& recon, double radius,
                                                const std::filesystem::path& report, std::ostream& out);
io::PgmScaling cmd_render(const RunConfig& rc, const std::filesystem::path& spikes,
                          const std::filesystem::path& image, std::ostream& out);
void cmd_pipeline(const RunConfig& rc, const std::filesystem::path& dir, std::ostream& out);

/// Metrics as written by `evaluate`.
std::map<std::string, std::string> evaluation_metrics(const Measure& truth, const Measure& recon, double radius);

/// Builds the problem from a data file (FLSTK1 or FLCOV1) and resolves λ.
ProblemInstance load_problem(const RunConfig& rc, const std::filesystem::path& data);

}  // namespace flucsr::cli
