#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sseval/allocation.hpp"
#include "sseval/core.hpp"
#include "sseval/error.hpp"
#include "sseval/sampling.hpp"
#include "sseval/stratification.hpp"

namespace sseval {

// ---------------------------------------------------------------------------
// Point estimators

/// Horvitz-Thompson mean: N^-1 sum z_i / pi_i over the sample.
template <typename DZ, typename DP>
typename DZ::Scalar ht(const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DP>& pi, Eigen::Index N) {
  using Scalar = typename DZ::Scalar;
  if (z.size() != pi.size()) throw ConsistencyError("ht: one inclusion probability per sampled loss required");
  if (N < 1) throw PreconditionError("ht: population size must be positive");
  if ((pi.array() <= Scalar(0)).any()) throw PreconditionError("ht: inclusion probabilities must be positive");
  return (z.array() / pi.array()).sum() / Scalar(N);
}

double ht(const SampleDraw& draw, std::span<const double> losses, Eigen::Index N);

struct DfParts {
  double estimate = 0.0;
  /// N^-1 sum of the proxy over the whole population.
  double proxy_mean = 0.0;
  /// HT estimate of the mean residual Z - Zhat.
  double residual_mean = 0.0;
};

/// Difference estimator: population proxy mean plus HT of the sampled residuals.
DfParts df_parts(const SampleDraw& draw, std::span<const double> losses,
                 const Eigen::Ref<const Eigen::VectorXd>& proxies_all);
double df(const SampleDraw& draw, std::span<const double> losses,
          const Eigen::Ref<const Eigen::VectorXd>& proxies_all, Eigen::Index N);

// ---------------------------------------------------------------------------
// Population-level MSEs (require every loss; for testing and simulation)

/// Finite-population variance with divisor N - 1.
template <typename D>
typename D::Scalar population_variance(const Eigen::MatrixBase<D>& z) {
  using Scalar = typename D::Scalar;
  const auto N = z.size();
  if (N < 2) return Scalar(0);
  const Scalar mean = z.mean();
  return (z.array() - mean).square().sum() / Scalar(N - 1);
}

namespace detail {
inline void check_n(Eigen::Index n, Eigen::Index N, const char* what) {
  if (n < 1 || n > N) {
    throw PreconditionError(std::string(what) + ": need 1 <= n <= N (n=" + std::to_string(n) +
                            ", N=" + std::to_string(N) + ")");
  }
}
}  // namespace detail

/// (1 - f)/n S^2_Z.
template <typename D>
typename D::Scalar mse_ht_srs(const Eigen::MatrixBase<D>& z, Eigen::Index n) {
  using Scalar = typename D::Scalar;
  const auto N = z.size();
  detail::check_n(n, N, "mse_ht_srs");
  const Scalar f = Scalar(n) / Scalar(N);
  return (Scalar(1) - f) / Scalar(n) * population_variance(z);
}

/// (1 - f)/n sum_h (N_h/N) S^2_h, the proportional-allocation variance.
template <typename D>
typename D::Scalar mse_ht_prop(const Eigen::MatrixBase<D>& z, const StrataPartition& partition, Eigen::Index n) {
  using Scalar = typename D::Scalar;
  const auto N = z.size();
  detail::check_n(n, N, "mse_ht_prop");
  const Scalar f = Scalar(n) / Scalar(N);
  return (Scalar(1) - f) / Scalar(n) * within_ss(partition, z);
}

/// n^-1 (sum_h W_h S_h)^2 - N^-1 sum_h W_h S^2_h, the Neyman-allocation variance.
template <typename D>
typename D::Scalar mse_ht_neyman(const Eigen::MatrixBase<D>& z, const StrataPartition& partition, Eigen::Index n) {
  using Scalar = typename D::Scalar;
  using std::sqrt;
  const auto N = z.size();
  detail::check_n(n, N, "mse_ht_neyman");
  const auto m = stratum_moments(partition, z);
  Scalar ws(0), ws2(0);
  for (int h = 0; h < partition.H; ++h) {
    const Scalar W = Scalar(m.sizes[static_cast<std::size_t>(h)]) / Scalar(N);
    ws += W * sqrt(m.variances[h]);
    ws2 += W * m.variances[h];
  }
  return ws * ws / Scalar(n) - ws2 / Scalar(N);
}

/// (1 - f)/n { N^-1 sum (Z - Zhat)^2 - (mean Z - mean Zhat)^2 }.
template <typename DZ, typename DP>
typename DZ::Scalar mse_df_srs(const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DP>& zhat, Eigen::Index n) {
  using Scalar = typename DZ::Scalar;
  const auto N = z.size();
  if (zhat.size() != N) throw ConsistencyError("mse_df_srs: one proxy per unit required");
  detail::check_n(n, N, "mse_df_srs");
  const Scalar f = Scalar(n) / Scalar(N);
  const Scalar sq = (z - zhat).squaredNorm() / Scalar(N);
  const Scalar bias = z.mean() - zhat.mean();
  return (Scalar(1) - f) / Scalar(n) * (sq - bias * bias);
}

/// (1 - f)/n { N^-1 sum (Z - Zhat)^2 - sum_h W_h (mean_h Z - mean_h Zhat)^2 }.
template <typename DZ, typename DP>
typename DZ::Scalar mse_df_prop(const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DP>& zhat,
                                const StrataPartition& partition, Eigen::Index n) {
  using Scalar = typename DZ::Scalar;
  const auto N = z.size();
  if (zhat.size() != N) throw ConsistencyError("mse_df_prop: one proxy per unit required");
  detail::check_n(n, N, "mse_df_prop");
  const Scalar f = Scalar(n) / Scalar(N);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r = z - zhat;
  const auto m = stratum_moments(partition, r);
  Scalar between(0);
  for (int h = 0; h < partition.H; ++h) {
    between += Scalar(m.sizes[static_cast<std::size_t>(h)]) / Scalar(N) * m.means[h] * m.means[h];
  }
  return (Scalar(1) - f) / Scalar(n) * (r.squaredNorm() / Scalar(N) - between);
}

/// Exact variance of the stratified HT mean for an integer allocation:
/// sum_h W_h^2 (1 - n_h/N_h) S^2_h / n_h.
template <typename D>
typename D::Scalar variance_ht_ssrs(const Eigen::MatrixBase<D>& z, const StrataPartition& partition,
                                    const std::vector<Eigen::Index>& n_h) {
  using Scalar = typename D::Scalar;
  if (n_h.size() != static_cast<std::size_t>(partition.H)) {
    throw ConsistencyError("variance_ht_ssrs: one sample size per stratum required");
  }
  const auto m = stratum_moments(partition, z);
  const Scalar N = Scalar(z.size());
  Scalar v(0);
  for (int h = 0; h < partition.H; ++h) {
    const auto i = static_cast<std::size_t>(h);
    const Scalar Nh = Scalar(m.sizes[i]);
    const Scalar nh = Scalar(n_h[i]);
    if (n_h[i] < 1 || n_h[i] > m.sizes[i]) throw PreconditionError("variance_ht_ssrs: need 1 <= n_h <= N_h");
    const Scalar W = Nh / N;
    v += W * W * (Scalar(1) - nh / Nh) * m.variances[h] / nh;
  }
  return v;
}

double mse_ht_srs(const Population& pop, Eigen::Index n);
double mse_ht_prop(const Population& pop, const StrataPartition& partition, Eigen::Index n);
double mse_ht_neyman(const Population& pop, const StrataPartition& partition, Eigen::Index n);
double mse_df_srs(const Population& pop, const Eigen::Ref<const Eigen::VectorXd>& proxies, Eigen::Index n);
double mse_df_prop(const Population& pop, const Eigen::Ref<const Eigen::VectorXd>& proxies,
                   const StrataPartition& partition, Eigen::Index n);

// ---------------------------------------------------------------------------
// Plug-in standard errors and intervals

/// Per-stratum sample summary of the sampled values.
struct StratumSample {
  Eigen::Index n = 0;
  double mean = 0.0;
  /// Sample variance, divisor n - 1 (0 when n < 2).
  double variance = 0.0;
  /// Sum of squared deviations from the sample mean.
  double ss = 0.0;
};

std::vector<StratumSample> summarize_by_stratum(std::span<const double> values, std::span<const int> strata, int H);

/// SRS: sqrt((1 - n/N) sum (y - ybar)^2 / n^2).
double plugin_se_srs(std::span<const double> values, Eigen::Index N);

/// SSRS: sqrt(sum_h W_h^2 (1 - f_h) s^2_h / n_h). Throws when some n_h < 2.
double plugin_se_ssrs(const std::vector<StratumSample>& strata, const std::vector<Eigen::Index>& N_h);

/// Dispatches on the draw's design; `plan` supplies N_h for stratified draws.
double plugin_se(const SampleDraw& draw, std::span<const double> values, const AllocationPlan& plan);

/// Standard normal quantile. Rational approximation refined by one Halley step.
double normal_quantile(double p);

/// theta -/+ z_{(1+level)/2} se.
std::pair<double, double> confidence_interval(double theta, double se, double level);

// ---------------------------------------------------------------------------
// Reports

enum class Estimator { HT, DF };
enum class ReportDesign { Srs, SsrsProp, SsrsNeyman };

std::string_view to_string(Estimator e);
std::string_view to_string(ReportDesign d);
ReportDesign report_design(const AllocationPlan& plan);

struct StratumDiagnostics {
  int stratum = 0;
  Eigen::Index N_h = 0;
  Eigen::Index n_h = 0;
  double sample_mean = 0.0;
  double sample_variance = 0.0;
};

struct EstimateReport {
  Estimator estimator = Estimator::HT;
  ReportDesign design = ReportDesign::Srs;
  double theta_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.95;
  Eigen::Index n = 0;
  Eigen::Index N = 0;
  std::vector<StratumDiagnostics> strata;
  /// DF only.
  double proxy_mean = 0.0;
  double residual_mean = 0.0;
  std::vector<std::string> warnings;

  /// Pretty JSON object with sorted keys.
  std::string to_json() const;
};

/// HT report for a labelled draw. `losses` aligns with draw.ids.
EstimateReport estimate_ht(const SampleDraw& draw, std::span<const double> losses, const AllocationPlan& plan,
                           double level);

/// DF report; the proxy covers the whole population.
EstimateReport estimate_df(const SampleDraw& draw, std::span<const double> losses,
                           const Eigen::Ref<const Eigen::VectorXd>& proxies_all, const AllocationPlan& plan,
                           double level);

}  // namespace sseval
