#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace probeforce::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kUnstable = 2, kNumerical = 3 };

struct Options {
  std::string out = "out";
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int cmd_run(const std::string& scenario_path, const Options& opt, std::ostream& out, std::ostream& err);
// ratios: nullopt uses the list in the loop file.
int cmd_margins(const std::string& loop_path, const std::optional<std::vector<double>>& ratios,
                const Options& opt, std::ostream& out, std::ostream& err);
int cmd_estimate(const std::string& samples_csv, const Options& opt, std::ostream& out, std::ostream& err);

// Full command line: run | margins | estimate.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace probeforce::cli
