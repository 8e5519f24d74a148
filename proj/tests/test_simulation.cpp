#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "sseval/error.hpp"
#include "sseval/simulation.hpp"

using namespace sseval;

namespace {

SuperpopSpec two_point(Eigen::Index N, std::uint64_t seed) {
  SuperpopSpec s;
  s.N = N;
  s.family = Family::TwoPoint;
  s.p = {0.2, 0.8};
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("two-point generation") {
  const auto spec = two_point(10000, 3);
  const auto pop = generate(spec);
  CHECK(pop.size() == 10000);
  CHECK(pop.fully_labelled());
  CHECK(std::abs(pop.proxies().mean() - 0.5) <= 0.02);
  for (const auto& u : pop.units()) CHECK((u.proxy == 0.2 || u.proxy == 0.8));
  CHECK(true_conditional_means(spec) == pop.proxies());
  // Loss frequencies track p(X) within each support point.
  double hi = 0, nhi = 0;
  for (const auto& u : pop.units()) {
    if (u.proxy == 0.8) {
      hi += *u.loss;
      ++nhi;
    }
  }
  CHECK(std::abs(hi / nhi - 0.8) < 0.02);
  CHECK(generate(spec).losses() == pop.losses());
}

TEST_CASE("beta(1,1) proxies are uniform") {
  SuperpopSpec s;
  s.N = 10000;
  s.family = Family::BetaConditional;
  s.seed = 4;
  auto v = oracle::to_std(generate(s).proxies());
  std::sort(v.begin(), v.end());
  double D = 0;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    D = std::max({D, (static_cast<double>(i) + 1) / n - v[i], v[i] - static_cast<double>(i) / n});
  }
  // Kolmogorov-Smirnov critical value at the 0.001 level.
  CHECK(D < 1.95 / std::sqrt(n));
}

TEST_CASE("identity distortion reproduces the calibrated family") {
  auto base = two_point(500, 9);
  auto mis = base;
  mis.family = Family::Miscalibrated;
  mis.base = Family::TwoPoint;
  mis.slope = 1.0;
  mis.offset = 0.0;
  const auto a = generate(base), b = generate(mis);
  CHECK(a.proxies() == b.proxies());
  CHECK(a.losses() == b.losses());

  mis.slope = 0.5;
  mis.offset = 0.6;
  const auto c = generate(mis);
  CHECK(c.losses() == a.losses());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i].proxy == doctest::Approx(std::min(1.0, 0.5 * a[i].proxy + 0.6)));
}

TEST_CASE("population description parsing") {
  const auto s = SuperpopSpec::from_json(R"({"N":100,"family":"two_point","p":[0.1,0.9],"weights":[1,3],"seed":2})");
  CHECK(s.N == 100);
  CHECK(s.weights == std::vector<double>{1, 3});
  const auto back = SuperpopSpec::from_json(s.to_json());
  CHECK(back.p == s.p);
  CHECK(back.seed == 2);
  CHECK_THROWS_AS(SuperpopSpec::from_json(R"({"N":100,"family":"three_point"})"), ParseError);
  CHECK_THROWS_AS(SuperpopSpec::from_json(R"({"N":0,"family":"beta"})"), PreconditionError);
  CHECK_THROWS_AS(SuperpopSpec::from_json(R"({"N":10,"family":"two_point","p":[1.5]})"), PreconditionError);
}

TEST_CASE("census replications have zero error") {
  const auto pop = generate(two_point(50, 1));
  McConfig cfg;
  const auto r = run_mc(pop, cfg, 50, 200, 5);
  CHECK(r.empirical_mse == 0.0);
  CHECK(r.empirical_bias == doctest::Approx(0.0).scale(1e-12));
  CHECK(r.coverage == 1.0);
  CHECK(r.avg_plugin_se == 0.0);
}

TEST_CASE("empirical MSE agrees with the closed forms") {
  const auto pop = generate(two_point(2000, 11));
  const auto z = pop.losses();
  const auto part = kmeans_1d(pop.proxies(), 2);
  const Eigen::Index n = 100;
  struct Case {
    McConfig cfg;
    double want;
  };
  std::vector<Case> cases;
  McConfig srs;
  cases.push_back({srs, mse_ht_srs(z, n)});
  McConfig prop;
  prop.strategy = Strategy::Proportional;
  prop.partition = part;
  cases.push_back({prop, variance_ht_ssrs(z, part, make_plan(pop, prop, n).n_h)});
  McConfig ney = prop;
  ney.strategy = Strategy::Neyman;
  ney.sd_source = SdSource::True;
  cases.push_back({ney, variance_ht_ssrs(z, part, make_plan(pop, ney, n).n_h)});
  McConfig dfc;
  dfc.estimator = Estimator::DF;
  cases.push_back({dfc, mse_df_srs(z, pop.proxies(), n)});
  for (const auto& c : cases) {
    const auto r = run_mc(pop, c.cfg, n, 20000, 17);
    CHECK(std::abs(r.empirical_mse - c.want) <= 3 * r.mc_se);
    CHECK(std::abs(r.empirical_bias) <= 3 * r.bias_mc_se);
  }
}

TEST_CASE("results do not depend on the thread count") {
  const auto pop = generate(two_point(300, 12));
  McConfig a;
  a.strategy = Strategy::Proportional;
  a.partition = kmeans_1d(pop.proxies(), 2);
  a.estimator = Estimator::DF;
  a.threads = 1;
  McConfig b = a;
  b.threads = 3;
  const auto ra = run_mc(pop, a, 30, 1000, 8);
  const auto rb = run_mc(pop, b, 30, 1000, 8);
  CHECK(ra.empirical_mse == rb.empirical_mse);
  CHECK(ra.coverage == rb.coverage);
  CHECK(to_json(ra) == to_json(rb));
}

TEST_CASE("DF to HT ratio under a calibrated two-point proxy") {
  const auto pop = generate(two_point(20000, 13));
  const auto z = pop.losses();
  const double ratio = mse_df_srs(z, pop.proxies(), 100) / mse_ht_srs(z, 100);
  CHECK(ratio == doctest::Approx(0.64).epsilon(0.05));
}

TEST_CASE("few replications are flagged") {
  const auto pop = generate(two_point(100, 1));
  const auto r = run_mc(pop, McConfig{}, 10, 10, 1);
  CHECK(r.reps == 10);
  bool flagged = false;
  for (const auto& w : r.warnings) flagged = flagged || w.find("mc_se too large for assertions") != std::string::npos;
  CHECK(flagged);
  CHECK_THROWS_AS(run_mc(pop, McConfig{}, 10, 1, 1), PreconditionError);
}

TEST_CASE("efficiency tables") {
  MCResult base, half, same;
  base.empirical_mse = 4e-4;
  half.empirical_mse = 2e-4;
  same.empirical_mse = 4e-4;
  const auto t = efficiency_table({{"SRS+DF", half}, {"SSRS,p+HT", same}}, base);
  CHECK(t[0].relative_efficiency == doctest::Approx(0.5));
  CHECK(t[1].relative_efficiency == doctest::Approx(1.0));
  CHECK(efficiency_table({{"SRS+HT", base}}, base)[0].relative_efficiency == 1.0);
  MCResult zero;
  CHECK_THROWS_AS(efficiency_table({{"x", base}}, zero), PreconditionError);

  const auto csv = efficiency_csv({{"two_point", t}});
  CHECK(csv == "population,SRS+DF,\"SSRS,p+HT\"\ntwo_point,0.5,1\n");
}

TEST_CASE("pairwise summation") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("MC result JSON") {
  MCResult r;
  r.empirical_mse = 1e-3;
  r.reps = 5;
  const auto j = nlohmann::json::parse(to_json(r));
  for (const char* key : {"empirical_mse", "empirical_bias", "avg_plugin_se", "coverage", "reps", "mc_se"}) {
    CHECK(j.contains(key));
  }
}
