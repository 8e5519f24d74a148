#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace sseval::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kParse = 2,
  kPrecondition = 3,
  kConsistency = 4,
  kAssertion = 5,
  kUsage = 64,
};

inline constexpr std::uint64_t kDefaultSplitSeed = 1;
inline constexpr std::uint64_t kDefaultSampleSeed = 2;
inline constexpr std::uint64_t kDefaultSimSeed = 3;
inline constexpr std::uint64_t kDefaultClusterSeed = 4;
inline constexpr int kDefaultStrata = 10;

/// Everything a subcommand was run with; echoed into every output file.
struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string scores;
  std::string proxy_col = "proxy";
  std::string loss_kind = "accuracy";
  int strata = kDefaultStrata;
  long long budget = 0;
  std::string strategy = "prop";
  std::string stratify_on = "proxy";
  std::uint64_t seed_split = kDefaultSplitSeed;
  std::uint64_t seed_sample = kDefaultSampleSeed;
  std::uint64_t seed_sim = kDefaultSimSeed;
  std::uint64_t seed_cluster = kDefaultClusterSeed;
  double level = 0.95;
  std::string out = ".";
  std::string worksheet;
  std::string plan;
  std::string spec;
  long long reps = 0;

  /// Compact JSON of the fields relevant to the subcommand.
  std::string to_json() const;
};

/// Runs one command line; returns the exit code. Diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sseval::cli
