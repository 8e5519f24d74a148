#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sseval/allocation.hpp"
#include "sseval/core.hpp"
#include "sseval/stratification.hpp"

namespace sseval {

enum class Design { Srs, Ssrs };

std::string_view to_string(Design d);

/// A realised sample, listed in canonical unit order.
struct SampleDraw {
  std::vector<Eigen::Index> positions;
  std::vector<std::string> ids;
  std::vector<int> strata;
  std::vector<double> pi;
  std::uint64_t seed = 0;
  Design design = Design::Srs;

  std::size_t size() const noexcept { return positions.size(); }

  /// Annotator worksheet: CSV `id,stratum,pi`.
  std::string to_csv() const;
};

/// Repeated without-replacement draws for a fixed partition and allocation.
///
/// Stratum h is sampled by a partial Fisher-Yates shuffle of its members (in
/// canonical order) driven by Rng(seed, h). Scratch permutations are restored
/// after every draw, so each draw depends only on its seed.
class StratifiedSampler {
 public:
  StratifiedSampler(const StrataPartition& partition, const AllocationPlan& plan);

  /// Sampled unit positions, grouped by stratum, in draw order within a stratum.
  void draw(std::uint64_t seed, std::vector<Eigen::Index>& out);

  const std::vector<std::vector<Eigen::Index>>& members() const noexcept { return members_; }
  const std::vector<Eigen::Index>& allocation() const noexcept { return n_h_; }

 private:
  std::vector<std::vector<Eigen::Index>> members_;
  std::vector<Eigen::Index> n_h_;
  std::vector<std::vector<Eigen::Index>> scratch_;
  std::vector<Eigen::Index> swaps_;
};

/// Uniform n-subset of the population; every pi equals n/N. Uses Rng(seed, 0).
SampleDraw draw_srs(const Population& pop, Eigen::Index n, std::uint64_t seed);

/// Independent SRS of n_h units inside each stratum; pi = n_h/N_h.
SampleDraw draw_ssrs(const Population& pop, const StrataPartition& partition, const AllocationPlan& plan,
                     std::uint64_t seed);

}  // namespace sseval
