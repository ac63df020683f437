#ifndef KRAMERS_CLI_HPP_
#define KRAMERS_CLI_HPP_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kramers/integrate.hpp"
#include "kramers/ratelab.hpp"

namespace kramers {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitUsage = 2;

// Overrides the configured output directory; --output-dir wins over it.
inline constexpr const char* kOutputDirEnv = "KRAMERS_OUTPUT_DIR";

// Subcommands validate, sweep, stein, simulate and report. `args` excludes
// the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Columns t, x_1..x_d and, for kinetic paths, y_1..y_d.
void write_path_csv(const std::string& path, const PathSample& sample);

// log m, log W1 and the logs of W1 -+ 1.96 se; rows with W1 <= 0 are
// listed as comments, an undefined lower bound prints as nan.
std::string sweep_plot_data(std::span<const SweepRow> rows);

}  // namespace kramers

#endif  // KRAMERS_CLI_HPP_
