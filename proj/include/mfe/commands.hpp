#pragma once

// Subcommands of the command-line front end. Each writes its artifacts into the resolved
// output directory and returns the process exit status.
//
//   0  success (converged / all checks pass)
//   1  configuration or input error (including corrupted field files)
//   2  a solve diverged, or a verification check failed

#include <iosfwd>
#include <string>

#include "mfe/config.hpp"

namespace mfe {

enum ExitStatus : int { kExitOk = 0, kExitConfig = 1, kExitFailure = 2 };

/// solve.jsonl (one summary per outcome), symmetry.jsonl, solve.csv and field files.
int cmd_solve(const RunConfig& config, std::ostream& log);

/// branch.jsonl and branch.csv (points), singular.csv (detected singular alphas) and, for
/// the trivial branch, scan.csv with the smallest singular value along the alpha grid.
int cmd_branch(const RunConfig& config, std::ostream& log);

/// verify.jsonl with one record per invariant check.
int cmd_verify(const RunConfig& config, std::ostream& log);

/// symmetry.jsonl and axes.csv for the field in `field_file`.
int cmd_symmetry(const RunConfig& config, std::ostream& log);

/// Dispatches by name and maps exceptions to exit statuses (config and format errors to 1).
int run_command(const std::string& name, const RunConfig& config, std::ostream& log);

}  // namespace mfe
