// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "sseval/allocation.hpp"
#include "sseval/calibration.hpp"
#include "sseval/estimation.hpp"
#include "sseval/simulation.hpp"
#include "sseval/stratification.hpp"

using namespace sseval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = SSEVAL_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

SuperpopSpec two_point_spec(std::uint64_t seed) {
  SuperpopSpec s;
  s.name = "two_point";
  s.N = 10000;
  s.family = Family::TwoPoint;
  s.p = {0.2, 0.8};
  s.seed = seed;
  return s;
}

McConfig config(Strategy strategy, Estimator estimator, const StrataPartition& partition,
                SdSource sd = SdSource::True) {
  McConfig c;
  c.strategy = strategy;
  c.estimator = estimator;
  c.partition = partition;
  c.sd_source = sd;
  return c;
}

// Two-point population: formulas versus 100,000 replications each.
Outcome criterion1() {
  Outcome o;
  const auto pop = generate(two_point_spec(101));
  const auto z = pop.losses();
  const auto part = kmeans_1d(pop.proxies(), 2);
  const Eigen::Index n = 100;
  struct Case {
    std::string name;
    McConfig cfg;
    double closed;
  };
  const std::vector<Case> cases{
      {"HT/SRS", config(Strategy::Srs, Estimator::HT, part), mse_ht_srs(z, n)},
      {"HT/SSRS-prop", config(Strategy::Proportional, Estimator::HT, part), mse_ht_prop(z, part, n)},
      {"HT/SSRS-Neyman", config(Strategy::Neyman, Estimator::HT, part), mse_ht_neyman(z, part, n)},
      {"DF/SRS", config(Strategy::Srs, Estimator::DF, part), mse_df_srs(z, pop.proxies(), n)},
  };
  for (const auto& c : cases) {
    const auto r = run_mc(pop, c.cfg, n, 100000, 1001);
    const double gap = std::abs(r.empirical_mse - c.closed) / r.mc_se;
    o.detail << " " << c.name << " mc=" << fmt(r.empirical_mse) << " formula=" << fmt(c.closed) << " (" << fmt(gap)
             << " mc_se);";
    o.require(gap <= 3.0, c.name);
  }
  return o;
}

// Population in the regime the ordering is stated for: large strata built by
// 1-D k-means on a proxy that carries information about the loss, n << N.
struct SetupInstance {
  Eigen::VectorXd z;
  StrataPartition partition;
  Eigen::Index n = 1;
};

SetupInstance setup_instance(Rng& rng) {
  SetupInstance ins;
  const auto N = static_cast<Eigen::Index>(500 + rng.below(4501));
  const bool binary = rng.below(2) == 0;
  const double noise = 0.05 + 0.95 * rng.uniform();
  ins.z.resize(N);
  Eigen::VectorXd proxy(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    if (binary) {
      const double p = rng.beta(0.5 + 3 * rng.uniform(), 0.5 + 3 * rng.uniform());
      ins.z[i] = rng.uniform() < p ? 1.0 : 0.0;
      proxy[i] = std::clamp(p + 0.3 * noise * rng.normal(), 0.0, 1.0);
    } else {
      ins.z[i] = rng.normal();
      proxy[i] = ins.z[i] + noise * rng.normal();
    }
  }
  const int H = 2 + static_cast<int>(rng.below(7));
  ins.partition = kmeans_1d(proxy, H);
  ins.n = static_cast<Eigen::Index>(H) * 2 + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(N / 10)));
  return ins;
}

// Ordering: exact on closed forms, statistical on five specs.
Outcome criterion2() {
  Outcome o;
  Rng rng(202, 0);
  int exact_ok = 0, over_allocated = 0;
  Eigen::Index smallest = std::numeric_limits<Eigen::Index>::max();
  for (int t = 0; t < 1000; ++t) {
    const auto ins = setup_instance(rng);
    const double srs = mse_ht_srs(ins.z, ins.n);
    const double prop = mse_ht_prop(ins.z, ins.partition, ins.n);
    const double ney = mse_ht_neyman(ins.z, ins.partition, ins.n);
    const auto m = stratum_moments(ins.partition, ins.z);
    double ws = 0;
    for (int h = 0; h < ins.partition.H; ++h) ws += static_cast<double>(m.sizes[static_cast<std::size_t>(h)]) * std::sqrt(m.variances[h]);
    for (int h = 0; h < ins.partition.H; ++h) {
      const auto Nh = m.sizes[static_cast<std::size_t>(h)];
      smallest = std::min(smallest, Nh);
      if (static_cast<double>(ins.n) * static_cast<double>(Nh) * std::sqrt(m.variances[h]) / ws > static_cast<double>(Nh)) {
        ++over_allocated;
      }
    }
    if (ney <= prop + 1e-12 && prop <= srs + 1e-12) {
      ++exact_ok;
    } else {
      o.require(false, "closed-form ordering on instance " + std::to_string(t));
    }
  }
  o.detail << " closed form: " << exact_ok << "/1000 ordered (min N_h " << smallest << ", Neyman over-allocations "
           << over_allocated << ");";

  // Arbitrary small partitions, reported only: the proportional bound then
  // carries an O(1/N_h) finite-population term.
  Rng arb(203, 0);
  int ney_prop = 0, prop_srs = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto ins = oracle::random_instance(arb);
    const auto z = oracle::to_eigen(ins.z);
    ney_prop += mse_ht_neyman(z, ins.partition, ins.n) <= mse_ht_prop(z, ins.partition, ins.n) + 1e-12;
    prop_srs += mse_ht_prop(z, ins.partition, ins.n) <= mse_ht_srs(z, ins.n) + 1e-12;
  }
  o.detail << " arbitrary partitions (not asserted): neyman<=prop " << ney_prop << "/1000, prop<=srs " << prop_srs
           << "/1000;";

  std::vector<SuperpopSpec> specs;
  specs.push_back(two_point_spec(21));
  SuperpopSpec beta11;
  beta11.name = "beta(1,1)";
  beta11.N = 5000;
  beta11.family = Family::BetaConditional;
  beta11.seed = 22;
  specs.push_back(beta11);
  SuperpopSpec beta25 = beta11;
  beta25.name = "beta(2,5)";
  beta25.a = 2;
  beta25.b = 5;
  beta25.seed = 23;
  specs.push_back(beta25);
  SuperpopSpec three;
  three.name = "three_point";
  three.N = 5000;
  three.family = Family::TwoPoint;
  three.p = {0.05, 0.5, 0.95};
  three.weights = {0.6, 0.3, 0.1};
  three.seed = 24;
  specs.push_back(three);
  SuperpopSpec mis = beta25;
  mis.name = "miscalibrated";
  mis.family = Family::Miscalibrated;
  mis.base = Family::BetaConditional;
  mis.slope = 0.5;
  mis.offset = 0.4;
  mis.seed = 25;
  specs.push_back(mis);

  for (const auto& s : specs) {
    const auto pop = generate(s);
    const Eigen::VectorXd proxies = pop.proxies();
    const int distinct = static_cast<int>(std::set<double>(proxies.begin(), proxies.end()).size());
    const auto part = kmeans_1d(proxies, std::min(5, distinct));
    const auto srs = run_mc(pop, config(Strategy::Srs, Estimator::HT, part), 100, 20000, 2001);
    const auto prop = run_mc(pop, config(Strategy::Proportional, Estimator::HT, part), 100, 20000, 2001);
    const auto ney = run_mc(pop, config(Strategy::Neyman, Estimator::HT, part), 100, 20000, 2001);
    const bool ok = ney.empirical_mse <= prop.empirical_mse + 3 * std::hypot(ney.mc_se, prop.mc_se) &&
                    prop.empirical_mse <= srs.empirical_mse + 3 * std::hypot(prop.mc_se, srs.mc_se);
    o.detail << " " << s.name << " " << fmt(ney.empirical_mse) << "<=" << fmt(prop.empirical_mse) << "<="
             << fmt(srs.empirical_mse) << ";";
    o.require(ok, s.name);
  }
  return o;
}

// DF/HT ratio of expected MSEs under SRS, averaged over generated populations.
Outcome criterion3() {
  Outcome o;
  auto ratio = [](SuperpopSpec spec) {
    double df = 0, ht = 0;
    for (std::uint64_t k = 0; k < 5; ++k) {
      spec.seed = 300 + k;
      const auto pop = generate(spec);
      const StrataPartition none = StrataPartition::single(spec.N);
      ht += run_mc(pop, config(Strategy::Srs, Estimator::HT, none), 100, 20000, 3001 + k).empirical_mse;
      df += run_mc(pop, config(Strategy::Srs, Estimator::DF, none), 100, 20000, 3001 + k).empirical_mse;
    }
    return df / ht;
  };
  const double two = ratio(two_point_spec(0));
  SuperpopSpec beta;
  beta.N = 10000;
  beta.family = Family::BetaConditional;
  const double uni = ratio(beta);
  o.detail << " two_point " << fmt(two) << " (target 0.64); beta(1,1) " << fmt(uni) << " (target 0.6667);";
  o.require(std::abs(two / 0.64 - 1) <= 0.05, "two_point ratio");
  o.require(std::abs(uni / (2.0 / 3.0) - 1) <= 0.05, "beta ratio");
  return o;
}

// Between-strata identities, errors relative to the SRS MSE.
Outcome criterion4() {
  Outcome o;
  Rng rng(404, 0);
  double worst1 = 0, worst2 = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto ins = oracle::random_instance(rng);
    const auto z = oracle::to_eigen(ins.z);
    const double N = static_cast<double>(ins.z.size());
    const double n = static_cast<double>(ins.n);
    const double f = n / N;
    const auto g = oracle::groups(ins.z, ins.labels, ins.H);
    const double mu = oracle::mean(ins.z);
    double between = 0, sbar = 0;
    std::size_t m = ins.z.size();
    for (const auto& gh : g) {
      between += gh.size() / N * (oracle::mean(gh) - mu) * (oracle::mean(gh) - mu);
      sbar += gh.size() / N * std::sqrt(oracle::var1(gh));
      m = std::min(m, gh.size());
    }
    double spread = 0;
    for (const auto& gh : g) {
      const double d = std::sqrt(oracle::var1(gh)) - sbar;
      spread += gh.size() / N * d * d;
    }
    const double srs = mse_ht_srs(z, ins.n);
    if (srs == 0.0) continue;
    const double prop = mse_ht_prop(z, ins.partition, ins.n);
    const double ney = mse_ht_neyman(z, ins.partition, ins.n);
    const double e1 = std::abs((srs - prop) - (1 - f) / n * between) / srs;
    const double e2 = std::abs((prop - ney) - spread / n) / srs;
    const double bound = 2.0 / static_cast<double>(m);
    worst1 = std::max(worst1, e1 / bound);
    worst2 = std::max(worst2, e2 / bound);
    if (e1 > bound) o.require(false, "first identity on instance " + std::to_string(t));
    if (e2 > bound) o.require(false, "second identity on instance " + std::to_string(t));
  }
  o.detail << " worst error / (2/min N_h): first " << fmt(worst1) << ", second " << fmt(worst2) << ";";
  return o;
}

// Exact 1-D k-means and PAVA against exhaustive search.
Outcome criterion5() {
  Outcome o;
  Rng rng(505, 0);
  int km = 0, km_bad = 0;
  while (km < 10000) {
    const int N = 1 + static_cast<int>(rng.below(12));
    std::vector<double> v;
    for (int i = 0; i < N; ++i) v.push_back(rng.below(3) == 0 ? static_cast<double>(rng.below(5)) : rng.normal());
    const int distinct = static_cast<int>(std::set<double>(v.begin(), v.end()).size());
    const int H = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(4, distinct))));
    const auto p = kmeans_1d(oracle::to_eigen(v), H);
    const double got = sum_of_squares(p, oracle::to_eigen(v));
    const double want = oracle::best_interval_partition(v, H);
    if (p.H != H || std::abs(got - want) > 1e-9 * std::max(1.0, want)) ++km_bad;
    ++km;
  }
  o.require(km_bad == 0, std::to_string(km_bad) + " k-means mismatches");

  // Every binary labelling of every tie pattern on up to 8 points.
  int pava = 0, pava_bad = 0;
  for (int n = 1; n <= 8; ++n) {
    for (std::uint32_t ties = 0; ties < (1u << (n - 1)); ++ties) {
      std::vector<double> x(static_cast<std::size_t>(n));
      int level = 0;
      for (int i = 0; i < n; ++i) {
        if (i > 0 && (ties >> (i - 1) & 1u)) ++level;
        x[static_cast<std::size_t>(i)] = 0.1 * level;
      }
      for (std::uint32_t labels = 0; labels < (1u << n); ++labels) {
        std::vector<double> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (labels >> i & 1u) ? 1.0 : 0.0;
        const auto map = fit_isotonic(oracle::to_eigen(x), oracle::to_eigen(y));
        const auto want = oracle::best_monotone_fit(x, y);
        for (int i = 0; i < n; ++i) {
          if (std::abs(map(x[static_cast<std::size_t>(i)]) - want[static_cast<std::size_t>(i)]) > 1e-12) {
            ++pava_bad;
            break;
          }
        }
        ++pava;
      }
    }
  }
  o.require(pava_bad == 0, std::to_string(pava_bad) + " PAVA mismatches");
  o.detail << " k-means " << km << " instances, PAVA " << pava << " instances;";
  return o;
}

// Bias of every estimator/design pair and interval coverage at n = 200.
Outcome criterion6() {
  Outcome o;
  const auto pop = generate(two_point_spec(606));
  const auto part = kmeans_1d(pop.proxies(), 2);
  struct Pair {
    std::string name;
    McConfig cfg;
  };
  std::vector<Pair> pairs;
  for (Estimator e : {Estimator::HT, Estimator::DF}) {
    const std::string est(to_string(e));
    pairs.push_back({est + "/SRS", config(Strategy::Srs, e, part)});
    pairs.push_back({est + "/prop", config(Strategy::Proportional, e, part)});
    pairs.push_back({est + "/Neyman-true", config(Strategy::Neyman, e, part, SdSource::True)});
    pairs.push_back({est + "/Neyman-plugin", config(Strategy::Neyman, e, part, SdSource::Plugin)});
  }
  for (const auto& p : pairs) {
    const auto r = run_mc(pop, p.cfg, 200, 20000, 6001);
    const bool unbiased = std::abs(r.empirical_bias) <= 3 * r.bias_mc_se;
    const bool covered = r.coverage >= 0.94 && r.coverage <= 0.96;
    o.detail << " " << p.name << " bias/se=" << fmt(r.empirical_bias / r.bias_mc_se) << " cov=" << fmt(r.coverage)
             << ";";
    o.require(unbiased, p.name + " bias");
    o.require(covered, p.name + " coverage");
  }
  return o;
}

json simulate(const std::string& spec, const fs::path& dir) {
  const auto r = clitest::run({"simulate", "--spec", kData + "/" + spec, "--out", dir.string()});
  if (r.code != 0) throw std::runtime_error(spec + ": simulate exited with " + std::to_string(r.code) + " " + r.err);
  return json::parse(clitest::slurp(dir / "mc_results.json")).at("populations").at(0).at("results");
}

// Miscalibrated proxy: Neyman loses to SRS. Calibrated proxy: Neyman beats proportional by 20%.
Outcome criterion7() {
  Outcome o;
  const auto root = clitest::scratch("acceptance7");
  const auto mis = simulate("miscalibrated.json", root / "mis");
  const auto cal = simulate("calibrated.json", root / "cal");
  auto mse = [](const json& r, const char* m) { return r.at(m).at("empirical_mse").get<double>(); };
  auto se = [](const json& r, const char* m) { return r.at(m).at("mc_se").get<double>(); };
  const double re_mis = mse(mis, "SSRS,o+HT") / mse(mis, "SRS+HT");
  const double re_cal = mse(cal, "SSRS,o+HT") / mse(cal, "SSRS,p+HT");
  o.detail << " miscalibrated Neyman/SRS " << fmt(re_mis) << "; calibrated Neyman/prop " << fmt(re_cal) << ";";
  o.require(re_mis > 1.0, "miscalibrated efficiency");
  o.require(mse(mis, "SSRS,o+HT") - mse(mis, "SRS+HT") > 3 * std::hypot(se(mis, "SSRS,o+HT"), se(mis, "SRS+HT")),
            "miscalibrated gap significance");
  o.require(re_cal <= 0.8, "calibrated efficiency");
  return o;
}

// Two consecutive runs of every subcommand produce identical bytes.
Outcome criterion8() {
  Outcome o;
  const auto root = clitest::scratch("acceptance8");
  const std::string demo = kData + "/demo.csv";
  auto twice = [&](const std::string& name, std::vector<std::string> args) {
    const auto dir = root / name;
    args.push_back("--out");
    args.push_back(dir.string());
    const auto a = clitest::run(args);
    const auto first = clitest::snapshot(dir);
    const auto b = clitest::run(args);
    const bool same = a.code == 0 && b.code == 0 && !first.empty() && clitest::snapshot(dir) == first && a.out == b.out;
    o.detail << " " << name << (same ? " identical" : " DIFFERS") << ";";
    o.require(same, name);
  };
  twice("calibrate", {"calibrate", "--input", demo});
  twice("plan", {"plan", "--input", demo, "--budget", "80", "--strategy", "neyman"});
  std::map<std::string, std::string> labels;
  for (const auto& r : clitest::worksheet_rows(clitest::slurp(demo))) labels[r[0]] = r[2];
  clitest::spit(root / "filled.csv", clitest::annotate(clitest::slurp(root / "plan" / "worksheet.csv"), labels));
  twice("estimate", {"estimate", "--input", demo, "--worksheet", (root / "filled.csv").string(), "--plan",
                     (root / "plan" / "plan.json").string()});
  twice("simulate", {"simulate", "--spec", kData + "/prop1.json", "--reps", "2000"});
  clitest::spit(root / "pop.json", R"({"N":1000,"family":"two_point","p":[0.2,0.8],"seed":8})");
  twice("generate", {"generate", "--spec", (root / "pop.json").string()});
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 formula-simulation agreement", criterion1}, {"2 design ordering", criterion2},
      {"3 DF/HT ratio", criterion3},                  {"4 between-strata identities", criterion4},
      {"5 oracle equivalence", criterion5},           {"6 unbiasedness and coverage", criterion6},
      {"7 calibration phenomena", criterion7},        {"8 CLI determinism", criterion8},
  };
  bool all = true;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("Criterion %s: %s (%.1fs)%s\n", name.c_str(), o.pass ? "PASS" : "FAIL", secs, o.detail.str().c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
