#include "sseval/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

namespace sseval {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Srs: return "srs";
    case Strategy::Proportional: return "prop";
    case Strategy::Neyman: return "neyman";
  }
  return "prop";
}

Strategy strategy_from_string(std::string_view name) {
  if (name == "srs") return Strategy::Srs;
  if (name == "prop" || name == "proportional") return Strategy::Proportional;
  if (name == "neyman") return Strategy::Neyman;
  throw ParseError("unknown allocation strategy '" + std::string(name) + "'");
}

Eigen::Index AllocationPlan::budget() const { return std::accumulate(n_h.begin(), n_h.end(), Eigen::Index{0}); }

double AllocationPlan::pi(int h) const {
  const auto i = static_cast<std::size_t>(h);
  return static_cast<double>(n_h.at(i)) / static_cast<double>(N_h.at(i));
}

Eigen::VectorXd AllocationPlan::unit_pi(const StrataPartition& partition) const {
  if (static_cast<std::size_t>(partition.H) != n_h.size()) {
    throw ConsistencyError("plan has " + std::to_string(n_h.size()) + " strata, partition has " +
                           std::to_string(partition.H));
  }
  Eigen::VectorXd out(partition.population_size());
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = pi(partition.assignment[static_cast<std::size_t>(i)]);
  return out;
}

std::string AllocationPlan::to_json() const {
  nlohmann::json j;
  j["strategy"] = std::string(to_string(strategy));
  j["n_h"] = n_h;
  j["N_h"] = N_h;
  j["targets"] = targets;
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

AllocationPlan AllocationPlan::from_json(const std::string& text) {
  AllocationPlan plan;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.contains("plan")) j = j["plan"];
    plan.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    plan.n_h = j.at("n_h").get<std::vector<Eigen::Index>>();
    plan.N_h = j.at("N_h").get<std::vector<Eigen::Index>>();
    if (j.contains("targets")) plan.targets = j["targets"].get<std::vector<double>>();
    if (j.contains("warnings")) plan.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("allocation plan: ") + e.what());
  }
  if (plan.n_h.size() != plan.N_h.size() || plan.n_h.empty()) {
    throw ParseError("allocation plan: n_h and N_h must be nonempty and of equal length");
  }
  for (std::size_t h = 0; h < plan.n_h.size(); ++h) {
    if (plan.n_h[h] < 1 || plan.n_h[h] > plan.N_h[h]) {
      throw ConsistencyError("allocation plan: stratum " + std::to_string(h) + " has n_h outside [1, N_h]");
    }
  }
  return plan;
}

namespace {

void check_budget(const std::vector<Eigen::Index>& sizes, Eigen::Index n) {
  if (sizes.empty()) throw PreconditionError("allocation needs at least one stratum");
  for (auto s : sizes) {
    if (s < 1) throw PreconditionError("allocation: stratum sizes must be positive");
  }
  const Eigen::Index N = std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0});
  const auto H = static_cast<Eigen::Index>(sizes.size());
  if (n < kMinPerStratum * H) {
    throw PreconditionError("budget n=" + std::to_string(n) + " is below the minimum of " +
                            std::to_string(kMinPerStratum) + " per stratum (" + std::to_string(kMinPerStratum * H) +
                            ")");
  }
  if (n > N) throw PreconditionError("budget n=" + std::to_string(n) + " exceeds population size N=" + std::to_string(N));
}

// Real targets n * weight_h / sum(weight), with strata whose target would exceed
// N_h fixed at N_h and the rest of the budget redistributed.
std::vector<double> capped_targets(const std::vector<double>& weights, const std::vector<Eigen::Index>& sizes,
                                   Eigen::Index n) {
  const std::size_t H = sizes.size();
  std::vector<double> targets(H, 0.0);
  std::vector<bool> capped(H, false);
  for (;;) {
    double budget = static_cast<double>(n);
    double total = 0.0;
    for (std::size_t h = 0; h < H; ++h) {
      if (capped[h]) {
        budget -= static_cast<double>(sizes[h]);
      } else {
        total += weights[h];
      }
    }
    bool changed = false;
    for (std::size_t h = 0; h < H; ++h) {
      if (capped[h]) {
        targets[h] = static_cast<double>(sizes[h]);
        continue;
      }
      targets[h] = total > 0.0 ? budget * weights[h] / total : 0.0;
      if (targets[h] > static_cast<double>(sizes[h])) {
        capped[h] = true;
        changed = true;
      }
    }
    if (!changed) return targets;
  }
}

}  // namespace

std::vector<Eigen::Index> round_allocation(const std::vector<double>& targets, const std::vector<Eigen::Index>& sizes,
                                           Eigen::Index n) {
  const std::size_t H = targets.size();
  std::vector<Eigen::Index> out(H);
  Eigen::Index assigned = 0;
  for (std::size_t h = 0; h < H; ++h) {
    out[h] = std::min(static_cast<Eigen::Index>(std::floor(targets[h])), sizes[h]);
    assigned += out[h];
  }

  std::vector<std::size_t> order(H);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return targets[a] - std::floor(targets[a]) > targets[b] - std::floor(targets[b]);
  });
  while (assigned < n) {
    bool progressed = false;
    for (std::size_t h : order) {
      if (assigned == n) break;
      if (out[h] < sizes[h]) {
        ++out[h];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) throw PreconditionError("allocation: budget exceeds the total stratum capacity");
  }

  // Raise strata below the floor, taking units from the most over-allocated donors.
  for (std::size_t h = 0; h < H; ++h) {
    const Eigen::Index floor_h = std::min(kMinPerStratum, sizes[h]);
    while (out[h] < floor_h) {
      std::ptrdiff_t donor = -1;
      double excess = -std::numeric_limits<double>::infinity();
      for (std::size_t d = 0; d < H; ++d) {
        if (out[d] <= std::min(kMinPerStratum, sizes[d])) continue;
        const double e = static_cast<double>(out[d]) - targets[d];
        if (e > excess) {
          excess = e;
          donor = static_cast<std::ptrdiff_t>(d);
        }
      }
      if (donor < 0) throw PreconditionError("allocation: budget too small for the per-stratum minimum");
      --out[static_cast<std::size_t>(donor)];
      ++out[h];
    }
  }
  return out;
}

AllocationPlan proportional(const std::vector<Eigen::Index>& sizes, Eigen::Index n) {
  check_budget(sizes, n);
  std::vector<double> weights(sizes.begin(), sizes.end());
  AllocationPlan plan;
  plan.strategy = Strategy::Proportional;
  plan.N_h = sizes;
  plan.targets = capped_targets(weights, sizes, n);
  plan.n_h = round_allocation(plan.targets, sizes, n);
  return plan;
}

AllocationPlan neyman(const std::vector<Eigen::Index>& sizes, const std::vector<double>& sd, Eigen::Index n) {
  check_budget(sizes, n);
  if (sd.size() != sizes.size()) throw ConsistencyError("neyman: one standard deviation per stratum required");
  std::vector<double> weights(sizes.size());
  bool any_positive = false;
  bool all_equal = true;
  for (std::size_t h = 0; h < sizes.size(); ++h) {
    if (!std::isfinite(sd[h]) || sd[h] < 0.0) throw PreconditionError("neyman: standard deviations must be nonnegative");
    weights[h] = static_cast<double>(sizes[h]) * sd[h];
    any_positive = any_positive || sd[h] > 0.0;
    all_equal = all_equal && sd[h] == sd.front();
  }
  // Equal S_h cancel; use the sizes themselves so the rounding path matches proportional bit for bit.
  if (all_equal) weights.assign(sizes.begin(), sizes.end());
  if (!any_positive) {
    AllocationPlan plan = proportional(sizes, n);
    plan.strategy = Strategy::Neyman;
    plan.warnings.push_back("all stratum standard deviations are zero; fell back to proportional allocation");
    return plan;
  }
  AllocationPlan plan;
  plan.strategy = Strategy::Neyman;
  plan.N_h = sizes;
  plan.targets = capped_targets(weights, sizes, n);
  plan.n_h = round_allocation(plan.targets, sizes, n);
  return plan;
}

AllocationPlan srs_plan(Eigen::Index N, Eigen::Index n) {
  if (n < 1 || n > N) throw PreconditionError("SRS budget must satisfy 1 <= n <= N");
  AllocationPlan plan;
  plan.strategy = Strategy::Srs;
  plan.N_h = {N};
  plan.n_h = {n};
  plan.targets = {static_cast<double>(n)};
  return plan;
}

double plugin_sd_accuracy(double zbar) {
  if (!(zbar >= 0.0 && zbar <= 1.0)) throw PreconditionError("plugin_sd_accuracy: mean outside [0,1]");
  return std::sqrt(zbar * (1.0 - zbar));
}

PluginSd plugin_sd_general(double zbar, double z2bar) {
  if (!(z2bar >= 0.0) || !std::isfinite(zbar)) throw PreconditionError("plugin_sd_general: invalid moments");
  const double var = z2bar - zbar * zbar;
  PluginSd out;
  out.clamped = var < -1e-12;
  out.sd = std::sqrt(std::max(0.0, var));
  return out;
}

std::vector<double> plugin_stratum_sd(const Population& pop, const StrataPartition& partition,
                                      const Eigen::Ref<const Eigen::VectorXd>& proxies,
                                      std::vector<std::string>* warnings) {
  const bool accuracy = pop.loss_kind() == LossKind::Accuracy;
  Eigen::VectorXd z1 = proxies.size() > 0 ? Eigen::VectorXd(proxies) : pop.proxies();
  if (z1.size() != static_cast<Eigen::Index>(pop.size())) {
    throw ConsistencyError("plug-in SD: one proxy per unit required");
  }
  if (proxies.size() > 0 && !accuracy) {
    throw PreconditionError("plug-in SD: a replacement proxy column needs second moments; only accuracy losses qualify");
  }
  const Eigen::VectorXd z2 = accuracy ? z1 : pop.proxy_second_moments();
  const auto m1 = stratum_moments(partition, z1);
  const auto m2 = stratum_moments(partition, z2);
  std::vector<double> sd(static_cast<std::size_t>(partition.H));
  for (int h = 0; h < partition.H; ++h) {
    const auto i = static_cast<std::size_t>(h);
    if (accuracy) {
      sd[i] = plugin_sd_accuracy(std::clamp(m1.means[h], 0.0, 1.0));
      continue;
    }
    const PluginSd p = plugin_sd_general(m1.means[h], m2.means[h]);
    sd[i] = p.sd;
    if (p.clamped && warnings) {
      warnings->push_back("stratum " + std::to_string(h) + ": plug-in variance was negative and set to 0");
    }
  }
  return sd;
}

}  // namespace sseval
