#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sseval/core.hpp"
#include "sseval/error.hpp"

namespace sseval {

/// Assignment of each unit (canonical order) to one of H nonempty strata.
struct StrataPartition {
  std::vector<int> assignment;
  int H = 0;
  std::vector<Eigen::Index> sizes;
  std::vector<std::string> warnings;

  Eigen::Index population_size() const { return static_cast<Eigen::Index>(assignment.size()); }

  /// Builds sizes from an assignment and checks every label in [0,H) is used.
  static StrataPartition from_assignment(std::vector<int> assignment, int H);
  /// A single stratum holding every unit.
  static StrataPartition single(Eigen::Index N);

  /// Unit positions per stratum, each list ascending.
  std::vector<std::vector<Eigen::Index>> members() const;

  /// CSV `id,stratum` in canonical unit order.
  std::string to_csv(const Population& pop) const;
};

/// Stratum sizes, means and variances (divisor N_h - 1; singletons give 0).
template <typename Scalar>
struct StratumMoments {
  std::vector<Eigen::Index> sizes;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> means;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> variances;
};

template <typename Derived>
StratumMoments<typename Derived::Scalar> stratum_moments(const StrataPartition& partition,
                                                         const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() != partition.population_size()) {
    throw ConsistencyError("partition covers " + std::to_string(partition.population_size()) + " units but " +
                           std::to_string(values.size()) + " values were given");
  }
  StratumMoments<Scalar> m;
  m.sizes.assign(static_cast<std::size_t>(partition.H), 0);
  m.means = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(partition.H);
  m.variances = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(partition.H);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const int h = partition.assignment[static_cast<std::size_t>(i)];
    ++m.sizes[static_cast<std::size_t>(h)];
    m.means[h] += values(i);
  }
  for (int h = 0; h < partition.H; ++h) {
    if (m.sizes[static_cast<std::size_t>(h)] > 0) m.means[h] /= Scalar(m.sizes[static_cast<std::size_t>(h)]);
  }
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const int h = partition.assignment[static_cast<std::size_t>(i)];
    const Scalar d = values(i) - m.means[h];
    m.variances[h] += d * d;
  }
  for (int h = 0; h < partition.H; ++h) {
    const auto nh = m.sizes[static_cast<std::size_t>(h)];
    m.variances[h] = nh > 1 ? m.variances[h] / Scalar(nh - 1) : Scalar(0);
  }
  return m;
}

/// Weighted within-strata variance: sum_h (N_h/N) S^2_h.
template <typename Derived>
typename Derived::Scalar within_ss(const StrataPartition& partition, const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const auto m = stratum_moments(partition, values);
  const Scalar N = Scalar(values.size());
  Scalar total(0);
  for (int h = 0; h < partition.H; ++h) total += Scalar(m.sizes[static_cast<std::size_t>(h)]) / N * m.variances[h];
  return total;
}

/// Plain k-means objective: sum_h sum_{i in h} (v_i - mean_h)^2.
template <typename Derived>
typename Derived::Scalar sum_of_squares(const StrataPartition& partition, const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const auto m = stratum_moments(partition, values);
  Scalar total(0);
  for (int h = 0; h < partition.H; ++h) {
    const auto nh = m.sizes[static_cast<std::size_t>(h)];
    if (nh > 1) total += Scalar(nh - 1) * m.variances[h];
  }
  return total;
}

/// Exact 1-D k-means by dynamic programming over the sorted distinct values.
/// Stratum 0 holds the smallest values. Requires 1 <= H <= #distinct values.
StrataPartition kmeans_1d(const Eigen::Ref<const Eigen::VectorXd>& values, int H);

/// Lloyd's algorithm on the rows of `points`, k-means++ seeding, best of `restarts`.
StrataPartition kmeans_embeddings(const Eigen::Ref<const Eigen::MatrixXd>& points, int H, std::uint64_t seed,
                                  int restarts = 10, int max_iterations = 300);

/// k-means objective of a labelled point set (sum of squared distances to centroids).
double kmeans_objective(const Eigen::Ref<const Eigen::MatrixXd>& points, const StrataPartition& partition);

/// H equal-width bins over [min, max]; empty bins are merged away so H may shrink.
StrataPartition equal_width_bins(const Eigen::Ref<const Eigen::VectorXd>& values, int H);

}  // namespace sseval
