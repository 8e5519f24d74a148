#include "sseval/stratification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sseval/csv.hpp"
#include "sseval/rng.hpp"

namespace sseval {

StrataPartition StrataPartition::from_assignment(std::vector<int> assignment, int H) {
  if (H < 1) throw PreconditionError("partition needs H >= 1");
  StrataPartition p;
  p.H = H;
  p.sizes.assign(static_cast<std::size_t>(H), 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int h = assignment[i];
    if (h < 0 || h >= H) {
      throw ConsistencyError("unit " + std::to_string(i) + " assigned to stratum " + std::to_string(h) +
                             " outside [0," + std::to_string(H) + ")");
    }
    ++p.sizes[static_cast<std::size_t>(h)];
  }
  for (int h = 0; h < H; ++h) {
    if (p.sizes[static_cast<std::size_t>(h)] == 0) throw ConsistencyError("stratum " + std::to_string(h) + " is empty");
  }
  p.assignment = std::move(assignment);
  return p;
}

StrataPartition StrataPartition::single(Eigen::Index N) {
  return from_assignment(std::vector<int>(static_cast<std::size_t>(N), 0), 1);
}

std::vector<std::vector<Eigen::Index>> StrataPartition::members() const {
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(H));
  for (std::size_t h = 0; h < out.size(); ++h) out[h].reserve(static_cast<std::size_t>(sizes[h]));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    out[static_cast<std::size_t>(assignment[i])].push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

std::string StrataPartition::to_csv(const Population& pop) const {
  if (pop.size() != assignment.size()) throw ConsistencyError("partition and population differ in size");
  std::string out = "id,stratum\n";
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    out += csv::quote(pop[i].id) + ',' + std::to_string(assignment[i]) + '\n';
  }
  return out;
}

// --- exact 1-D k-means ------------------------------------------------------

namespace {

/// Weighted sum-of-squares cost of contiguous runs of sorted distinct values.
class SegmentCost {
 public:
  SegmentCost(const std::vector<double>& x, const std::vector<double>& w) {
    const std::size_t k = x.size();
    shift_ = x[k / 2];
    w_.assign(k + 1, 0.0);
    s1_.assign(k + 1, 0.0);
    s2_.assign(k + 1, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      const double v = x[i] - shift_;
      w_[i + 1] = w_[i] + w[i];
      s1_[i + 1] = s1_[i] + w[i] * v;
      s2_[i + 1] = s2_[i] + w[i] * v * v;
    }
  }

  /// Cost of the inclusive run [i, j].
  double operator()(std::size_t i, std::size_t j) const {
    const double w = w_[j + 1] - w_[i];
    const double s1 = s1_[j + 1] - s1_[i];
    const double s2 = s2_[j + 1] - s2_[i];
    return std::max(0.0, s2 - s1 * s1 / w);
  }

 private:
  double shift_ = 0.0;
  std::vector<double> w_, s1_, s2_;
};

struct DpTables {
  std::vector<std::vector<double>> cost;       // cost[m][j]: best for first j+1 values in m+1 clusters
  std::vector<std::vector<std::size_t>> start;  // start[m][j]: first index of the last cluster
};

// Fills row m for j in [jlo, jhi], knowing the optimal start lies in [optlo, opthi].
void fill_row(DpTables& t, const SegmentCost& seg, std::size_t m, std::ptrdiff_t jlo, std::ptrdiff_t jhi,
              std::size_t optlo, std::size_t opthi) {
  if (jlo > jhi) return;
  const std::ptrdiff_t jmid = jlo + (jhi - jlo) / 2;
  const auto j = static_cast<std::size_t>(jmid);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = std::max(optlo, m);
  const std::size_t hi = std::min(opthi, j);
  for (std::size_t i = std::max(optlo, m); i <= hi; ++i) {
    const double c = t.cost[m - 1][i - 1] + seg(i, j);
    if (c < best) {
      best = c;
      best_i = i;
    }
  }
  t.cost[m][j] = best;
  t.start[m][j] = best_i;
  fill_row(t, seg, m, jlo, jmid - 1, optlo, best_i);
  fill_row(t, seg, m, jmid + 1, jhi, best_i, opthi);
}

}  // namespace

StrataPartition kmeans_1d(const Eigen::Ref<const Eigen::VectorXd>& values, int H) {
  const Eigen::Index n = values.size();
  if (H < 1) throw PreconditionError("kmeans_1d: H must be at least 1");
  if (n == 0) throw PreconditionError("kmeans_1d: no values");
  if (!values.allFinite()) throw PreconditionError("kmeans_1d: non-finite value");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });

  // Equal values always share a cluster in some optimum, so work on distinct values with multiplicities.
  std::vector<double> x, w;
  std::vector<std::size_t> distinct_of(static_cast<std::size_t>(n));
  for (Eigen::Index idx : order) {
    if (x.empty() || values[idx] != x.back()) {
      x.push_back(values[idx]);
      w.push_back(0.0);
    }
    w.back() += 1.0;
    distinct_of[static_cast<std::size_t>(idx)] = x.size() - 1;
  }
  const std::size_t k = x.size();
  if (static_cast<std::size_t>(H) > k) {
    throw PreconditionError("kmeans_1d: H=" + std::to_string(H) + " exceeds the " + std::to_string(k) +
                            " distinct values");
  }

  const SegmentCost seg(x, w);
  const auto hs = static_cast<std::size_t>(H);
  DpTables t;
  t.cost.assign(hs, std::vector<double>(k, std::numeric_limits<double>::infinity()));
  t.start.assign(hs, std::vector<std::size_t>(k, 0));
  for (std::size_t j = 0; j < k; ++j) t.cost[0][j] = seg(0, j);
  for (std::size_t m = 1; m < hs; ++m) {
    fill_row(t, seg, m, static_cast<std::ptrdiff_t>(m), static_cast<std::ptrdiff_t>(k) - 1, m, k - 1);
  }

  std::vector<int> cluster_of_distinct(k);
  std::size_t end = k - 1;
  for (std::size_t m = hs; m-- > 0;) {
    const std::size_t begin = m == 0 ? 0 : t.start[m][end];
    for (std::size_t i = begin; i <= end; ++i) cluster_of_distinct[i] = static_cast<int>(m);
    if (m > 0) end = begin - 1;
  }

  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < assignment.size(); ++i) assignment[i] = cluster_of_distinct[distinct_of[i]];
  return StrataPartition::from_assignment(std::move(assignment), H);
}

// --- k-means on embeddings --------------------------------------------------

namespace {

struct LloydRun {
  std::vector<int> labels;
  double objective = std::numeric_limits<double>::infinity();
};

double squared_distance(const Eigen::Ref<const Eigen::MatrixXd>& points, Eigen::Index i,
                        const Eigen::MatrixXd& centers, Eigen::Index c) {
  return (points.row(i) - centers.row(c)).squaredNorm();
}

Eigen::MatrixXd kmeanspp_seed(const Eigen::Ref<const Eigen::MatrixXd>& points, int H, Rng& rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centers(H, points.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  auto first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centers.row(0) = points.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = squared_distance(points, i, centers, 0);
  for (int c = 1; c < H; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    } else {
      // Every point coincides with a center already; take the first unchosen one.
      for (Eigen::Index i = 0; i < n && pick < 0; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) pick = i;
      }
    }
    centers.row(c) = points.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points, i, centers, c));
  }
  return centers;
}

void update_centers(const Eigen::Ref<const Eigen::MatrixXd>& points, const std::vector<int>& labels,
                    Eigen::MatrixXd& centers, std::vector<Eigen::Index>& counts) {
  centers.setZero();
  std::fill(counts.begin(), counts.end(), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    centers.row(c) += points.row(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) /= double(counts[static_cast<std::size_t>(c)]);
  }
}

// Moves the point farthest from the centroid of the largest cluster into each empty cluster.
bool repair_empty(const Eigen::Ref<const Eigen::MatrixXd>& points, std::vector<int>& labels, Eigen::MatrixXd& centers,
                  std::vector<Eigen::Index>& counts) {
  bool changed = false;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    const auto largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] != largest) continue;
      const double d = squared_distance(points, i, centers, largest);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
    update_centers(points, labels, centers, counts);
    changed = true;
  }
  return changed;
}

LloydRun lloyd(const Eigen::Ref<const Eigen::MatrixXd>& points, int H, Rng& rng, int max_iterations) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centers = kmeanspp_seed(points, H, rng);
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(H), 0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points, i, centers, 0);
      for (int c = 1; c < H; ++c) {
        const double d = squared_distance(points, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    update_centers(points, labels, centers, counts);
    changed = repair_empty(points, labels, centers, counts) || changed;
    if (!changed) break;
  }
  repair_empty(points, labels, centers, counts);
  LloydRun run;
  run.objective = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) run.objective += squared_distance(points, i, centers, labels[static_cast<std::size_t>(i)]);
  run.labels = std::move(labels);
  return run;
}

}  // namespace

double kmeans_objective(const Eigen::Ref<const Eigen::MatrixXd>& points, const StrataPartition& partition) {
  if (points.rows() != partition.population_size()) throw ConsistencyError("kmeans_objective: size mismatch");
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(partition.H, points.cols());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(partition.H), 0);
  update_centers(points, partition.assignment, centers, counts);
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += squared_distance(points, i, centers, partition.assignment[static_cast<std::size_t>(i)]);
  }
  return total;
}

StrataPartition kmeans_embeddings(const Eigen::Ref<const Eigen::MatrixXd>& points, int H, std::uint64_t seed,
                                  int restarts, int max_iterations) {
  const Eigen::Index n = points.rows();
  if (H < 1 || H > n) {
    throw PreconditionError("kmeans_embeddings: need 1 <= H <= N, got H=" + std::to_string(H));
  }
  if (points.cols() == 0) throw PreconditionError("kmeans_embeddings: zero-dimensional points");
  if (!points.allFinite()) throw PreconditionError("kmeans_embeddings: non-finite coordinate");
  if (restarts < 1) throw PreconditionError("kmeans_embeddings: restarts must be positive");

  LloydRun best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(seed, static_cast<std::uint64_t>(r));
    LloydRun run = lloyd(points, H, rng, max_iterations);
    if (run.objective < best.objective) best = std::move(run);
  }

  // Relabel by first appearance so the labels do not depend on seeding order.
  std::vector<int> relabel(static_cast<std::size_t>(H), -1);
  int next = 0;
  for (int& label : best.labels) {
    auto& r = relabel[static_cast<std::size_t>(label)];
    if (r < 0) r = next++;
    label = r;
  }
  return StrataPartition::from_assignment(std::move(best.labels), H);
}

// --- equal-width bins -------------------------------------------------------

StrataPartition equal_width_bins(const Eigen::Ref<const Eigen::VectorXd>& values, int H) {
  if (H < 1) throw PreconditionError("equal_width_bins: H must be at least 1");
  if (values.size() == 0) throw PreconditionError("equal_width_bins: no values");
  if (!values.allFinite()) throw PreconditionError("equal_width_bins: non-finite value");
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (lo == hi) {
    StrataPartition p = StrataPartition::single(values.size());
    if (H > 1) p.warnings.push_back("all values identical; collapsed to a single stratum");
    return p;
  }
  const double width = (hi - lo) / H;
  std::vector<int> raw(static_cast<std::size_t>(values.size()));
  std::vector<bool> used(static_cast<std::size_t>(H), false);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    int b = static_cast<int>(std::floor((values[i] - lo) / width));
    b = std::clamp(b, 0, H - 1);
    raw[static_cast<std::size_t>(i)] = b;
    used[static_cast<std::size_t>(b)] = true;
  }
  std::vector<int> compact(static_cast<std::size_t>(H), -1);
  int next = 0;
  for (int b = 0; b < H; ++b) {
    if (used[static_cast<std::size_t>(b)]) compact[static_cast<std::size_t>(b)] = next++;
  }
  for (int& b : raw) b = compact[static_cast<std::size_t>(b)];
  StrataPartition p = StrataPartition::from_assignment(std::move(raw), next);
  if (next < H) {
    p.warnings.push_back(std::to_string(H - next) + " empty bin(s) merged; H reduced to " + std::to_string(next));
  }
  return p;
}

}  // namespace sseval
