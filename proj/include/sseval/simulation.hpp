#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sseval/allocation.hpp"
#include "sseval/core.hpp"
#include "sseval/estimation.hpp"
#include "sseval/stratification.hpp"

namespace sseval {

enum class Family { TwoPoint, BetaConditional, Miscalibrated };

std::string_view to_string(Family f);
Family family_from_string(std::string_view name);

/// Superpopulation for synthetic accuracy data: X carries a success
/// probability p(X) and Z | X ~ Bernoulli(p(X)).
struct SuperpopSpec {
  std::string name;
  Eigen::Index N = 0;
  Family family = Family::TwoPoint;
  /// Family used to draw p(X) when family == Miscalibrated.
  Family base = Family::TwoPoint;
  /// two_point: support points and mixing weights (weights default to equal).
  std::vector<double> p;
  std::vector<double> weights;
  /// beta_conditional: p(X) ~ Beta(a, b).
  double a = 1.0;
  double b = 1.0;
  /// miscalibrated: stored proxy is clamp(slope p + offset, 0, 1).
  double slope = 1.0;
  double offset = 0.0;
  std::uint64_t seed = 0;

  /// Throws ParseError on unknown names and PreconditionError on invalid values.
  void validate() const;
  static SuperpopSpec from_json(const std::string& text);
  std::string to_json() const;
};

/// N units with proxy = (possibly distorted) p(X) and loss = Bernoulli(p(X)).
/// Units are drawn in order from Rng(seed, 0): p first, then the loss.
Population generate(const SuperpopSpec& spec);

/// Exact conditional means p(X) for the same seed (undistorted).
Eigen::VectorXd true_conditional_means(const SuperpopSpec& spec);

/// Where Neyman allocation takes its stratum standard deviations from.
enum class SdSource { True, Plugin };

struct McConfig {
  Strategy strategy = Strategy::Srs;
  Estimator estimator = Estimator::HT;
  /// Ignored for SRS.
  StrataPartition partition;
  SdSource sd_source = SdSource::True;
  /// Proxy used by DF and by plug-in standard deviations; empty means pop.proxies().
  Eigen::VectorXd proxies;
  double level = 0.95;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct MCResult {
  double empirical_mse = 0.0;
  double empirical_bias = 0.0;
  double avg_plugin_se = 0.0;
  double coverage = 0.0;
  std::int64_t reps = 0;
  /// Monte Carlo standard errors of empirical_mse and empirical_bias.
  double mc_se = 0.0;
  double bias_mc_se = 0.0;
  std::vector<Eigen::Index> n_h;
  std::vector<std::string> warnings;
};

inline constexpr std::int64_t kMinAssertReps = 100;

/// Allocation the harness uses for a design: SRS, proportional, or Neyman with
/// true or plug-in standard deviations.
AllocationPlan make_plan(const Population& pop, const McConfig& config, Eigen::Index n);

/// Replicates draw + estimate `reps` times. Replication r samples with the
/// first output of Rng(seed, r) as its sampling seed, so results do not
/// depend on the thread schedule. The target is the finite-population mean.
MCResult run_mc(const Population& pop, const McConfig& config, Eigen::Index n, std::int64_t reps,
                std::uint64_t seed);

/// Pairwise summation; the result does not depend on how reps were scheduled.
double pairwise_sum(std::span<const double> values);

struct EfficiencyEntry {
  std::string method;
  double relative_efficiency = 0.0;
};

/// mse_method / mse_baseline for each result; values below 1 are gains.
std::vector<EfficiencyEntry> efficiency_table(const std::vector<std::pair<std::string, MCResult>>& results,
                                              const MCResult& baseline);

struct EfficiencyRow {
  std::string population;
  std::vector<EfficiencyEntry> entries;
};

/// One row per population, one column per method.
std::string efficiency_csv(const std::vector<EfficiencyRow>& rows);

std::string to_json(const MCResult& r);

}  // namespace sseval
