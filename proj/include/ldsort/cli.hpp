#ifndef LDSORT_CLI_HPP
#define LDSORT_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ldsort::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kLoadError = 1,
  kDegenerateGame = 2,
  kDimensionMismatch = 3,
  kRunFailed = 4,
};

/// Output root: $LDA_SEED_RESULTS_DIR when set, otherwise "results".
std::filesystem::path results_root();

int cmd_sort(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_bench(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Dispatches argv[1] to a subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ldsort::cli

#endif  // LDSORT_CLI_HPP
