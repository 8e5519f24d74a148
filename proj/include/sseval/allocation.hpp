#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sseval/core.hpp"
#include "sseval/stratification.hpp"

namespace sseval {

enum class Strategy { Srs, Proportional, Neyman };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);

/// Per-stratum sample sizes for a budget n, with the real-valued targets they round.
struct AllocationPlan {
  Strategy strategy = Strategy::Proportional;
  std::vector<Eigen::Index> n_h;
  std::vector<Eigen::Index> N_h;
  std::vector<double> targets;
  std::vector<std::string> warnings;

  Eigen::Index budget() const;
  /// Inclusion probability n_h / N_h of stratum h.
  double pi(int h) const;
  /// Per-unit inclusion probabilities under `partition`.
  Eigen::VectorXd unit_pi(const StrataPartition& partition) const;

  /// JSON object {strategy, n_h, N_h, targets, warnings}.
  std::string to_json() const;
  static AllocationPlan from_json(const std::string& text);
};

/// Minimum units drawn from each stratum (capped at the stratum size).
inline constexpr Eigen::Index kMinPerStratum = 2;

/// Sum-exact integer rounding of real targets: largest remainder with ties to
/// the lower index, capped at N_h, then raised to the per-stratum floor.
std::vector<Eigen::Index> round_allocation(const std::vector<double>& targets, const std::vector<Eigen::Index>& sizes,
                                           Eigen::Index n);

/// n_h proportional to N_h. Requires 2H <= n <= N.
AllocationPlan proportional(const std::vector<Eigen::Index>& sizes, Eigen::Index n);

/// n_h proportional to N_h S_h. All-zero S falls back to proportional with a warning.
AllocationPlan neyman(const std::vector<Eigen::Index>& sizes, const std::vector<double>& sd, Eigen::Index n);

/// A one-stratum plan drawing n of N.
AllocationPlan srs_plan(Eigen::Index N, Eigen::Index n);

/// sqrt(zbar (1 - zbar)) for binary losses.
double plugin_sd_accuracy(double zbar);

struct PluginSd {
  double sd = 0.0;
  /// True when the moments were inconsistent (z2bar < zbar^2) and the variance was clamped to 0.
  bool clamped = false;
};

/// sqrt(max(0, z2bar - zbar^2)) from plug-in first and second moments.
PluginSd plugin_sd_general(double zbar, double z2bar);

/// Plug-in S_h per stratum from proxy moments: sqrt(zbar (1 - zbar)) for accuracy,
/// sqrt(mean E[Z^2|X] - zbar^2) otherwise. `proxies` overrides pop.proxies() when
/// nonempty (accuracy only). Clamped strata are reported through `warnings`.
std::vector<double> plugin_stratum_sd(const Population& pop, const StrataPartition& partition,
                                      const Eigen::Ref<const Eigen::VectorXd>& proxies,
                                      std::vector<std::string>* warnings = nullptr);

}  // namespace sseval
