#include "sseval/estimation.hpp"

#include <cmath>
#include <tuple>
#include <numbers>

#include "json.hpp"

namespace sseval {

namespace {

void check_losses(const SampleDraw& draw, std::span<const double> losses) {
  if (losses.size() != draw.size()) {
    throw ConsistencyError("draw has " + std::to_string(draw.size()) + " units but " + std::to_string(losses.size()) +
                           " losses were given");
  }
  for (std::size_t k = 0; k < losses.size(); ++k) {
    if (!std::isfinite(losses[k])) throw PreconditionError("missing or non-finite loss for unit '" + draw.ids[k] + "'");
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

double ht(const SampleDraw& draw, std::span<const double> losses, Eigen::Index N) {
  check_losses(draw, losses);
  return ht(as_vector(losses), as_vector(draw.pi), N);
}

DfParts df_parts(const SampleDraw& draw, std::span<const double> losses,
                 const Eigen::Ref<const Eigen::VectorXd>& proxies_all) {
  check_losses(draw, losses);
  const Eigen::Index N = proxies_all.size();
  if (!proxies_all.allFinite()) throw PreconditionError("df: proxy missing for some unit");
  Eigen::VectorXd resid(static_cast<Eigen::Index>(draw.size()));
  for (std::size_t k = 0; k < draw.size(); ++k) {
    const Eigen::Index p = draw.positions[k];
    if (p < 0 || p >= N) throw ConsistencyError("df: sampled position outside the proxy vector");
    resid[static_cast<Eigen::Index>(k)] = losses[k] - proxies_all[p];
  }
  DfParts out;
  out.proxy_mean = proxies_all.mean();
  out.residual_mean = ht(resid, as_vector(draw.pi), N);
  out.estimate = out.proxy_mean + out.residual_mean;
  return out;
}

double df(const SampleDraw& draw, std::span<const double> losses,
          const Eigen::Ref<const Eigen::VectorXd>& proxies_all, Eigen::Index N) {
  if (proxies_all.size() != N) {
    throw ConsistencyError("df: " + std::to_string(proxies_all.size()) + " proxies for a population of " +
                           std::to_string(N));
  }
  return df_parts(draw, losses, proxies_all).estimate;
}

double mse_ht_srs(const Population& pop, Eigen::Index n) { return mse_ht_srs(pop.losses(), n); }

double mse_ht_prop(const Population& pop, const StrataPartition& partition, Eigen::Index n) {
  return mse_ht_prop(pop.losses(), partition, n);
}

double mse_ht_neyman(const Population& pop, const StrataPartition& partition, Eigen::Index n) {
  return mse_ht_neyman(pop.losses(), partition, n);
}

double mse_df_srs(const Population& pop, const Eigen::Ref<const Eigen::VectorXd>& proxies, Eigen::Index n) {
  return mse_df_srs(pop.losses(), proxies, n);
}

double mse_df_prop(const Population& pop, const Eigen::Ref<const Eigen::VectorXd>& proxies,
                   const StrataPartition& partition, Eigen::Index n) {
  return mse_df_prop(pop.losses(), proxies, partition, n);
}

std::vector<StratumSample> summarize_by_stratum(std::span<const double> values, std::span<const int> strata, int H) {
  if (values.size() != strata.size()) throw ConsistencyError("summarize_by_stratum: length mismatch");
  std::vector<StratumSample> out(static_cast<std::size_t>(H));
  // Welford update per stratum.
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (strata[k] < 0 || strata[k] >= H) throw ConsistencyError("summarize_by_stratum: stratum label out of range");
    auto& s = out[static_cast<std::size_t>(strata[k])];
    ++s.n;
    const double d = values[k] - s.mean;
    s.mean += d / static_cast<double>(s.n);
    s.ss += d * (values[k] - s.mean);
  }
  for (auto& s : out) s.variance = s.n > 1 ? s.ss / static_cast<double>(s.n - 1) : 0.0;
  return out;
}

double plugin_se_srs(std::span<const double> values, Eigen::Index N) {
  const auto n = static_cast<Eigen::Index>(values.size());
  if (n < 2) throw PreconditionError("plugin SE needs at least 2 sampled units");
  if (N < n) throw ConsistencyError("plugin SE: sample larger than the population");
  const std::vector<int> one(values.size(), 0);
  const double ss = summarize_by_stratum(values, one, 1)[0].ss;
  const double f = static_cast<double>(n) / static_cast<double>(N);
  return std::sqrt(std::max(0.0, (1.0 - f) * ss) / (static_cast<double>(n) * static_cast<double>(n)));
}

double plugin_se_ssrs(const std::vector<StratumSample>& strata, const std::vector<Eigen::Index>& N_h) {
  if (strata.size() != N_h.size()) throw ConsistencyError("plugin SE: one population size per stratum required");
  double N = 0.0;
  for (auto Nh : N_h) N += static_cast<double>(Nh);
  double v = 0.0;
  for (std::size_t h = 0; h < strata.size(); ++h) {
    const auto& s = strata[h];
    if (s.n < 2) {
      throw PreconditionError("plugin SE: stratum " + std::to_string(h) + " has n_h=" + std::to_string(s.n) +
                              " < 2 sampled units");
    }
    const double Nh = static_cast<double>(N_h[h]);
    const double W = Nh / N;
    const double fh = static_cast<double>(s.n) / Nh;
    v += W * W * (1.0 - fh) * s.variance / static_cast<double>(s.n);
  }
  return std::sqrt(std::max(0.0, v));
}

double plugin_se(const SampleDraw& draw, std::span<const double> values, const AllocationPlan& plan) {
  if (values.size() != draw.size()) throw ConsistencyError("plugin SE: one value per sampled unit required");
  if (draw.design == Design::Srs) {
    Eigen::Index N = 0;
    for (auto Nh : plan.N_h) N += Nh;
    return plugin_se_srs(values, N);
  }
  return plugin_se_ssrs(summarize_by_stratum(values, draw.strata, static_cast<int>(plan.N_h.size())), plan.N_h);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw PreconditionError("normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation (relative error 1.15e-9).
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

std::pair<double, double> confidence_interval(double theta, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw PreconditionError("confidence level must lie in (0, 1)");
  if (!(se >= 0.0)) throw PreconditionError("standard error must be nonnegative");
  const double half = normal_quantile(0.5 + level / 2.0) * se;
  return {theta - half, theta + half};
}

std::string_view to_string(Estimator e) { return e == Estimator::HT ? "HT" : "DF"; }

std::string_view to_string(ReportDesign d) {
  switch (d) {
    case ReportDesign::Srs: return "srs";
    case ReportDesign::SsrsProp: return "ssrs_prop";
    case ReportDesign::SsrsNeyman: return "ssrs_neyman";
  }
  return "srs";
}

ReportDesign report_design(const AllocationPlan& plan) {
  switch (plan.strategy) {
    case Strategy::Srs: return ReportDesign::Srs;
    case Strategy::Proportional: return ReportDesign::SsrsProp;
    case Strategy::Neyman: return ReportDesign::SsrsNeyman;
  }
  return ReportDesign::Srs;
}

std::string EstimateReport::to_json() const {
  nlohmann::json j;
  j["estimator"] = std::string(sseval::to_string(estimator));
  j["design"] = std::string(sseval::to_string(design));
  j["theta_hat"] = theta_hat;
  j["se"] = se;
  j["ci"] = {ci_lo, ci_hi};
  j["level"] = level;
  j["n"] = n;
  j["N"] = N;
  nlohmann::json diag;
  nlohmann::json strata_json = nlohmann::json::array();
  for (const auto& s : strata) {
    strata_json.push_back({{"stratum", s.stratum},
                           {"N_h", s.N_h},
                           {"n_h", s.n_h},
                           {"sample_mean", s.sample_mean},
                           {"sample_variance", s.sample_variance}});
  }
  diag["strata"] = strata_json;
  diag["stratum_values"] = estimator == Estimator::DF ? "residual" : "loss";
  if (estimator == Estimator::DF) {
    diag["proxy_mean"] = proxy_mean;
    diag["residual_mean"] = residual_mean;
  }
  j["diagnostics"] = diag;
  j["warnings"] = warnings;
  return j.dump(2);
}

namespace {

EstimateReport finish_report(const SampleDraw& draw, std::span<const double> values, const AllocationPlan& plan,
                             double level, EstimateReport r) {
  r.design = draw.design == Design::Srs ? ReportDesign::Srs : report_design(plan);
  r.level = level;
  r.n = static_cast<Eigen::Index>(draw.size());
  r.N = 0;
  for (auto Nh : plan.N_h) r.N += Nh;
  const int H = static_cast<int>(plan.N_h.size());
  std::vector<int> strata = draw.strata;
  if (draw.design == Design::Srs) strata.assign(draw.size(), 0);
  const auto summary = summarize_by_stratum(values, strata, draw.design == Design::Srs ? 1 : H);
  for (std::size_t h = 0; h < summary.size(); ++h) {
    r.strata.push_back({static_cast<int>(h), draw.design == Design::Srs ? r.N : plan.N_h[h], summary[h].n,
                        summary[h].mean, summary[h].variance});
  }
  r.se = plugin_se(draw, values, plan);
  std::tie(r.ci_lo, r.ci_hi) = confidence_interval(r.theta_hat, r.se, level);
  return r;
}

}  // namespace

EstimateReport estimate_ht(const SampleDraw& draw, std::span<const double> losses, const AllocationPlan& plan,
                           double level) {
  Eigen::Index N = 0;
  for (auto Nh : plan.N_h) N += Nh;
  EstimateReport r;
  r.estimator = Estimator::HT;
  r.theta_hat = ht(draw, losses, N);
  return finish_report(draw, losses, plan, level, std::move(r));
}

EstimateReport estimate_df(const SampleDraw& draw, std::span<const double> losses,
                           const Eigen::Ref<const Eigen::VectorXd>& proxies_all, const AllocationPlan& plan,
                           double level) {
  const DfParts parts = df_parts(draw, losses, proxies_all);
  std::vector<double> resid(draw.size());
  for (std::size_t k = 0; k < draw.size(); ++k) resid[k] = losses[k] - proxies_all[draw.positions[k]];
  EstimateReport r;
  r.estimator = Estimator::DF;
  r.theta_hat = parts.estimate;
  r.proxy_mean = parts.proxy_mean;
  r.residual_mean = parts.residual_mean;
  return finish_report(draw, resid, plan, level, std::move(r));
}

}  // namespace sseval
