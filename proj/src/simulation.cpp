#include "sseval/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "sseval/csv.hpp"
#include "sseval/rng.hpp"
#include "sseval/sampling.hpp"

namespace sseval {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::TwoPoint: return "two_point";
    case Family::BetaConditional: return "beta_conditional";
    case Family::Miscalibrated: return "miscalibrated";
  }
  return "two_point";
}

Family family_from_string(std::string_view name) {
  if (name == "two_point") return Family::TwoPoint;
  if (name == "beta_conditional" || name == "beta") return Family::BetaConditional;
  if (name == "miscalibrated") return Family::Miscalibrated;
  throw ParseError("unknown population family '" + std::string(name) + "'");
}

void SuperpopSpec::validate() const {
  if (N < 2) throw PreconditionError("population spec: N must be at least 2");
  const Family draw_family = family == Family::Miscalibrated ? base : family;
  if (draw_family == Family::Miscalibrated) throw PreconditionError("population spec: base family cannot be miscalibrated");
  if (draw_family == Family::TwoPoint) {
    if (p.empty()) throw PreconditionError("population spec: two_point needs support points 'p'");
    for (double v : p) {
      if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("population spec: support points must lie in [0,1]");
    }
    if (!weights.empty()) {
      if (weights.size() != p.size()) throw PreconditionError("population spec: one weight per support point");
      double total = 0.0;
      for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("population spec: weights must be nonnegative");
        total += w;
      }
      if (!(total > 0.0)) throw PreconditionError("population spec: weights sum to zero");
    }
  } else if (!(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b))) {
    throw PreconditionError("population spec: beta shapes must be positive");
  }
  if (!std::isfinite(slope) || !std::isfinite(offset)) throw PreconditionError("population spec: invalid distortion");
}

SuperpopSpec SuperpopSpec::from_json(const std::string& text) {
  SuperpopSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.name = j.value("name", std::string());
    s.N = j.at("N").get<Eigen::Index>();
    s.family = family_from_string(j.at("family").get<std::string>());
    if (j.contains("base")) s.base = family_from_string(j["base"].get<std::string>());
    if (j.contains("p")) s.p = j["p"].get<std::vector<double>>();
    if (j.contains("weights")) s.weights = j["weights"].get<std::vector<double>>();
    s.a = j.value("a", 1.0);
    s.b = j.value("b", 1.0);
    s.slope = j.value("slope", 1.0);
    s.offset = j.value("offset", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("population spec: ") + e.what());
  }
  if (s.name.empty()) s.name = std::string(to_string(s.family));
  s.validate();
  return s;
}

std::string SuperpopSpec::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["N"] = N;
  j["family"] = std::string(to_string(family));
  const Family draw_family = family == Family::Miscalibrated ? base : family;
  if (family == Family::Miscalibrated) {
    j["base"] = std::string(to_string(base));
    j["slope"] = slope;
    j["offset"] = offset;
  }
  if (draw_family == Family::TwoPoint) {
    j["p"] = p;
    if (!weights.empty()) j["weights"] = weights;
  } else {
    j["a"] = a;
    j["b"] = b;
  }
  j["seed"] = seed;
  return j.dump();
}

namespace {

struct Draws {
  Eigen::VectorXd p;
  Eigen::VectorXd z;
};

Draws draw_superpop(const SuperpopSpec& spec) {
  spec.validate();
  const Family family = spec.family == Family::Miscalibrated ? spec.base : spec.family;
  std::vector<double> cum;
  if (family == Family::TwoPoint) {
    std::vector<double> w = spec.weights.empty() ? std::vector<double>(spec.p.size(), 1.0) : spec.weights;
    double total = 0.0;
    for (double v : w) total += v;
    double acc = 0.0;
    for (double v : w) cum.push_back(acc += v / total);
  }
  Rng rng(spec.seed, 0);
  Draws d{Eigen::VectorXd(spec.N), Eigen::VectorXd(spec.N)};
  for (Eigen::Index i = 0; i < spec.N; ++i) {
    double p;
    if (family == Family::TwoPoint) {
      const double u = rng.uniform();
      auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
      p = spec.p[std::min(k, spec.p.size() - 1)];
    } else {
      p = rng.beta(spec.a, spec.b);
    }
    d.p[i] = p;
    d.z[i] = rng.uniform() < p ? 1.0 : 0.0;
  }
  return d;
}

}  // namespace

Eigen::VectorXd true_conditional_means(const SuperpopSpec& spec) { return draw_superpop(spec).p; }

Population generate(const SuperpopSpec& spec) {
  const Draws d = draw_superpop(spec);
  const bool distort = spec.family == Family::Miscalibrated;
  std::vector<Unit> units(static_cast<std::size_t>(spec.N));
  for (Eigen::Index i = 0; i < spec.N; ++i) {
    auto& u = units[static_cast<std::size_t>(i)];
    u.id = "u" + std::to_string(i);
    u.proxy = distort ? std::clamp(spec.slope * d.p[i] + spec.offset, 0.0, 1.0) : d.p[i];
    u.loss = d.z[i];
  }
  return Population(std::move(units), LossKind::Accuracy);
}

AllocationPlan make_plan(const Population& pop, const McConfig& config, Eigen::Index n) {
  const auto N = static_cast<Eigen::Index>(pop.size());
  switch (config.strategy) {
    case Strategy::Srs: return srs_plan(N, n);
    case Strategy::Proportional:
      if (config.partition.population_size() != N) throw ConsistencyError("partition does not cover the population");
      return proportional(config.partition.sizes, n);
    case Strategy::Neyman: {
      if (config.partition.population_size() != N) throw ConsistencyError("partition does not cover the population");
      std::vector<double> sd;
      std::vector<std::string> warnings;
      if (config.sd_source == SdSource::True) {
        const auto m = stratum_moments(config.partition, pop.losses());
        for (int h = 0; h < config.partition.H; ++h) sd.push_back(std::sqrt(m.variances[h]));
      } else {
        sd = plugin_stratum_sd(pop, config.partition, config.proxies, &warnings);
      }
      AllocationPlan plan = neyman(config.partition.sizes, sd, n);
      plan.warnings.insert(plan.warnings.end(), warnings.begin(), warnings.end());
      return plan;
    }
  }
  throw ConsistencyError("unknown allocation strategy");
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 32) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {

double pairwise_mean(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

// Standard error of the mean of v.
double mean_se(const std::vector<double>& v, double mean) {
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - mean) * (v[i] - mean);
  const double var = pairwise_sum(dev) / static_cast<double>(v.size() - 1);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

MCResult run_mc(const Population& pop, const McConfig& config, Eigen::Index n, std::int64_t reps,
                std::uint64_t seed) {
  if (reps < 2) throw PreconditionError("run_mc: need at least 2 replications");
  if (!(config.level > 0.0 && config.level < 1.0)) throw PreconditionError("run_mc: level must lie in (0,1)");
  const auto N = static_cast<Eigen::Index>(pop.size());
  const Eigen::VectorXd z = pop.losses();
  const double target = z.mean();

  const AllocationPlan plan = make_plan(pop, config, n);
  const StrataPartition partition =
      config.strategy == Strategy::Srs ? StrataPartition::single(N) : config.partition;
  const bool srs = config.strategy == Strategy::Srs;

  // DF works on residuals; HT on the losses themselves.
  Eigen::VectorXd y = z;
  double offset = 0.0;
  if (config.estimator == Estimator::DF) {
    const Eigen::VectorXd zhat = config.proxies.size() > 0 ? config.proxies : pop.proxies();
    if (zhat.size() != N) throw ConsistencyError("run_mc: one proxy per unit required");
    y = z - zhat;
    offset = zhat.mean();
  }
  const double zq = normal_quantile(0.5 + config.level / 2.0);
  const int H = partition.H;
  std::vector<double> inv_pi(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) inv_pi[static_cast<std::size_t>(h)] = 1.0 / plan.pi(h);

  const auto R = static_cast<std::size_t>(reps);
  std::vector<double> err(R), sq(R), se(R), covered(R);

  auto worker = [&](std::atomic<std::size_t>& next) {
    StratifiedSampler sampler(partition, plan);
    std::vector<Eigen::Index> pos;
    std::vector<double> values;
    std::vector<int> labels;
    constexpr std::size_t kBlock = 256;
    for (;;) {
      const std::size_t start = next.fetch_add(kBlock);
      if (start >= R) break;
      const std::size_t stop = std::min(R, start + kBlock);
      for (std::size_t r = start; r < stop; ++r) {
        Rng stream(seed, r);
        sampler.draw(stream(), pos);
        values.resize(pos.size());
        labels.resize(pos.size());
        double total = 0.0;
        for (std::size_t k = 0; k < pos.size(); ++k) {
          const int h = partition.assignment[static_cast<std::size_t>(pos[k])];
          values[k] = y[pos[k]];
          labels[k] = h;
          total += values[k] * inv_pi[static_cast<std::size_t>(h)];
        }
        const double theta = offset + total / static_cast<double>(N);
        const double s = srs ? plugin_se_srs(values, N) : plugin_se_ssrs(summarize_by_stratum(values, labels, H), plan.N_h);
        const double e = theta - target;
        err[r] = e;
        sq[r] = e * e;
        se[r] = s;
        covered[r] = std::abs(e) <= zq * s ? 1.0 : 0.0;
      }
    }
  };

  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, (R + 255) / 256));
  std::atomic<std::size_t> next{0};
  if (threads <= 1) {
    worker(next);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        try {
          worker(next);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(R);
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  MCResult out;
  out.reps = reps;
  out.n_h = plan.n_h;
  out.warnings = plan.warnings;
  out.empirical_mse = pairwise_mean(sq);
  out.mc_se = mean_se(sq, out.empirical_mse);
  out.empirical_bias = pairwise_mean(err);
  out.bias_mc_se = mean_se(err, out.empirical_bias);
  out.avg_plugin_se = pairwise_mean(se);
  out.coverage = pairwise_mean(covered);
  if (reps < kMinAssertReps) {
    out.warnings.push_back("reps=" + std::to_string(reps) + " < " + std::to_string(kMinAssertReps) +
                           ": mc_se too large for assertions");
  }
  return out;
}

std::vector<EfficiencyEntry> efficiency_table(const std::vector<std::pair<std::string, MCResult>>& results,
                                              const MCResult& baseline) {
  if (!(baseline.empirical_mse > 0.0)) throw PreconditionError("efficiency table: baseline MSE must be positive");
  std::vector<EfficiencyEntry> out;
  for (const auto& [name, r] : results) out.push_back({name, r.empirical_mse / baseline.empirical_mse});
  return out;
}

std::string efficiency_csv(const std::vector<EfficiencyRow>& rows) {
  std::string out = "population";
  if (!rows.empty()) {
    for (const auto& e : rows.front().entries) out += ',' + csv::quote(e.method);
  }
  out += '\n';
  for (const auto& row : rows) {
    out += csv::quote(row.population);
    for (const auto& e : row.entries) out += ',' + csv::format_double(e.relative_efficiency);
    out += '\n';
  }
  return out;
}

std::string to_json(const MCResult& r) {
  nlohmann::json j;
  j["empirical_mse"] = r.empirical_mse;
  j["empirical_bias"] = r.empirical_bias;
  j["avg_plugin_se"] = r.avg_plugin_se;
  j["coverage"] = r.coverage;
  j["reps"] = r.reps;
  j["mc_se"] = r.mc_se;
  j["bias_mc_se"] = r.bias_mc_se;
  j["n_h"] = r.n_h;
  j["warnings"] = r.warnings;
  return j.dump(2);
}

}  // namespace sseval
