#include "sseval/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "sseval/csv.hpp"
#include "sseval/rng.hpp"

namespace sseval {

std::string_view to_string(Design d) { return d == Design::Srs ? "srs" : "ssrs"; }

std::string SampleDraw::to_csv() const {
  std::string out = "id,stratum,pi\n";
  for (std::size_t k = 0; k < positions.size(); ++k) {
    out += csv::quote(ids[k]) + ',' + std::to_string(strata[k]) + ',' + csv::format_double(pi[k]) + '\n';
  }
  return out;
}

StratifiedSampler::StratifiedSampler(const StrataPartition& partition, const AllocationPlan& plan)
    : members_(partition.members()), n_h_(plan.n_h) {
  if (n_h_.size() != members_.size()) {
    throw ConsistencyError("plan has " + std::to_string(n_h_.size()) + " strata but the partition has " +
                           std::to_string(members_.size()));
  }
  for (std::size_t h = 0; h < members_.size(); ++h) {
    const auto Nh = static_cast<Eigen::Index>(members_[h].size());
    if (plan.N_h.size() == members_.size() && plan.N_h[h] != Nh) {
      throw ConsistencyError("stratum " + std::to_string(h) + " has " + std::to_string(Nh) +
                             " units but the plan records N_h=" + std::to_string(plan.N_h[h]));
    }
    if (n_h_[h] < 0 || n_h_[h] > Nh) {
      throw ConsistencyError("stratum " + std::to_string(h) + ": n_h=" + std::to_string(n_h_[h]) +
                             " outside [0, " + std::to_string(Nh) + "]");
    }
  }
  scratch_ = members_;
}

void StratifiedSampler::draw(std::uint64_t seed, std::vector<Eigen::Index>& out) {
  out.clear();
  for (std::size_t h = 0; h < scratch_.size(); ++h) {
    auto& perm = scratch_[h];
    const auto Nh = static_cast<std::uint64_t>(perm.size());
    const auto nh = static_cast<std::size_t>(n_h_[h]);
    Rng rng(seed, h);
    swaps_.clear();
    for (std::size_t i = 0; i < nh; ++i) {
      const auto j = static_cast<Eigen::Index>(i + rng.below(Nh - i));
      std::swap(perm[i], perm[static_cast<std::size_t>(j)]);
      swaps_.push_back(j);
      out.push_back(perm[i]);
    }
    for (std::size_t i = nh; i-- > 0;) std::swap(perm[i], perm[static_cast<std::size_t>(swaps_[i])]);
  }
}

namespace {

SampleDraw finish_draw(const Population& pop, const StrataPartition& partition, const AllocationPlan& plan,
                       std::vector<Eigen::Index> positions, std::uint64_t seed, Design design) {
  std::sort(positions.begin(), positions.end());
  SampleDraw d;
  d.seed = seed;
  d.design = design;
  d.positions = std::move(positions);
  d.ids.reserve(d.positions.size());
  for (Eigen::Index p : d.positions) {
    const int h = partition.assignment[static_cast<std::size_t>(p)];
    d.ids.push_back(pop[static_cast<std::size_t>(p)].id);
    d.strata.push_back(h);
    d.pi.push_back(plan.pi(h));
  }
  return d;
}

}  // namespace

SampleDraw draw_srs(const Population& pop, Eigen::Index n, std::uint64_t seed) {
  const auto N = static_cast<Eigen::Index>(pop.size());
  const AllocationPlan plan = srs_plan(N, n);
  const StrataPartition single = StrataPartition::single(N);
  StratifiedSampler sampler(single, plan);
  std::vector<Eigen::Index> positions;
  sampler.draw(seed, positions);
  return finish_draw(pop, single, plan, std::move(positions), seed, Design::Srs);
}

SampleDraw draw_ssrs(const Population& pop, const StrataPartition& partition, const AllocationPlan& plan,
                     std::uint64_t seed) {
  if (partition.population_size() != static_cast<Eigen::Index>(pop.size())) {
    throw ConsistencyError("partition does not cover the population");
  }
  StratifiedSampler sampler(partition, plan);
  std::vector<Eigen::Index> positions;
  sampler.draw(seed, positions);
  return finish_draw(pop, partition, plan, std::move(positions), seed, Design::Ssrs);
}

}  // namespace sseval
