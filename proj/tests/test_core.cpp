#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sseval/core.hpp"
#include "sseval/csv.hpp"
#include "sseval/error.hpp"
#include "sseval/rng.hpp"

using namespace sseval;

namespace {

Population parse_csv(const std::string& text, LossKind kind = LossKind::Accuracy) {
  LossSpec spec;
  spec.kind = kind;
  return ingest_text(text, false, spec);
}

std::vector<double> random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> s(k);
  double total = 0;
  for (auto& x : s) total += (x = rng.gamma(0.7));
  for (auto& x : s) x /= total;
  return s;
}

}  // namespace

TEST_CASE("ingest reads ids and proxies in file order") {
  const auto pop = parse_csv("id,proxy\na,0.1\nb,0.5\nc,0.9\n");
  CHECK(pop.size() == 3);
  CHECK(pop[0].id == "a");
  CHECK(pop[2].proxy == doctest::Approx(0.9));
  CHECK_FALSE(pop.fully_labelled());
  for (const auto& u : pop.units()) CHECK_FALSE(u.loss.has_value());
  CHECK_THROWS_AS(pop.losses(), PreconditionError);
}

TEST_CASE("ingest rejects an accuracy proxy above one and names the line") {
  try {
    parse_csv("id,proxy\na,0.1\nb,1.3\n");
    FAIL("expected a range error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("ingest validation errors") {
  CHECK_THROWS_AS(parse_csv("id,proxy\na,0.1\na,0.2\n"), ConsistencyError);
  CHECK_THROWS_AS(parse_csv("id,proxy,loss\na,0.1,0.5\nb,0.2,1\n"), Error);
  CHECK_THROWS_AS(parse_csv("id,proxy\na,0.1,7\nb,0.2\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("id,proxy\na,abc\nb,0.2\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("id,score\na,0.1\nb,0.2\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("id,proxy\na,-1\nb,0.2\n", LossKind::SquaredError), Error);
  LossSpec spec;
  CHECK_THROWS_AS(ingest_text("{\"id\":\"a\",\"proxy\":0.1,\"embedding\":[1,2]}\n"
                              "{\"id\":\"b\",\"proxy\":0.2,\"embedding\":[1]}\n",
                              true, spec),
                  ConsistencyError);
  CHECK_THROWS_AS(parse_csv("id,proxy\na,0.1\n"), Error);
}

TEST_CASE("unbounded losses accept proxies above one") {
  const auto pop = parse_csv("id,proxy,loss\na,2.5,3.1\nb,0.2,0\n", LossKind::CrossEntropy);
  CHECK(pop.finite_mean() == doctest::Approx(1.55));
}

TEST_CASE("ingest is deterministic and round-trips through the canonical CSV") {
  const std::string text = "# comment\nid,proxy,loss,emb_0,emb_1\nx,0.25,1,0.5,-1\n\"y,1\",0.75,,2,3\nz,0.1,0,0,0\n";
  const auto a = parse_csv(text);
  const auto b = parse_csv(text);
  CHECK(serialize_csv(a) == serialize_csv(b));
  const auto c = parse_csv(serialize_csv(a));
  CHECK(serialize_csv(c) == serialize_csv(a));
  CHECK(c.has_embeddings());
  CHECK(c.embedding_dim() == 2);
  CHECK(c[1].id == "y,1");
  CHECK_FALSE(c[1].loss.has_value());
  CHECK(c.embeddings()(1, 1) == 3.0);
}

TEST_CASE("JSONL and CSV inputs agree") {
  LossSpec spec;
  const auto j = ingest_text("{\"id\":\"a\",\"proxy\":0.3,\"loss\":1}\n{\"id\":\"b\",\"proxy\":0.6,\"loss\":null}\n", true,
                             spec);
  const auto c = parse_csv("id,proxy,loss\na,0.3,1\nb,0.6,\n");
  CHECK(serialize_csv(j) == serialize_csv(c));
}

TEST_CASE("round trip property on random populations") {
  Rng rng(11, 0);
  for (int t = 0; t < 50; ++t) {
    const auto N = 2 + rng.below(30);
    std::vector<double> proxies, losses;
    for (std::uint64_t i = 0; i < N; ++i) {
      proxies.push_back(rng.uniform());
      losses.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
    }
    const auto pop = oracle::make_population(proxies, losses);
    const auto back = parse_csv(serialize_csv(pop));
    REQUIRE(back.size() == pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
      CHECK(back[i].proxy == pop[i].proxy);
      CHECK(*back[i].loss == *pop[i].loss);
    }
  }
}

TEST_CASE("eval_loss examples") {
  const std::vector<double> s3{0.1, 0.2, 0.7};
  CHECK(eval_loss(LossKind::Accuracy, 2, s3) == 1.0);
  CHECK(eval_loss(LossKind::Accuracy, 0, s3) == 0.0);
  CHECK(eval_loss(LossKind::SquaredError, 0, std::vector<double>{1, 0, 0}) == 0.0);
  CHECK(eval_loss(LossKind::CrossEntropy, 1, std::vector<double>{0.5, 0.5}) == doctest::Approx(0.693147).epsilon(1e-6));
  // Zero probability is floored rather than producing infinity.
  const double guarded = eval_loss(LossKind::CrossEntropy, 1, std::vector<double>{1.0, 0.0});
  CHECK(std::isfinite(guarded));
  CHECK(guarded == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS(eval_loss(LossKind::Accuracy, 3, s3));
  CHECK_THROWS(eval_loss(LossKind::Accuracy, 0, std::vector<double>{0.5, 0.6}));
}

TEST_CASE("conditional_moments examples") {
  CHECK(conditional_moments(LossKind::Accuracy, std::vector<double>{0.8, 0.2}).first == doctest::Approx(0.8));
  const auto deg = conditional_moments(LossKind::SquaredError, std::vector<double>{1, 0});
  CHECK(deg.first == 0.0);
  CHECK(deg.second == 0.0);
  CHECK(conditional_moments(LossKind::SquaredError, std::vector<double>{0.5, 0.5}).first ==
        doctest::Approx(0.5 * 0.25 + 0.5 * 0.25));
}

TEST_CASE("conditional moments satisfy Jensen on random simplex points") {
  Rng rng(5, 1);
  for (LossKind kind : {LossKind::Accuracy, LossKind::SquaredError, LossKind::CrossEntropy}) {
    for (int t = 0; t < 2000; ++t) {
      const auto s = random_simplex(rng, 2 + rng.below(8));
      const auto [m1, m2] = conditional_moments(kind, s);
      CHECK(m2 >= 0.0);
      CHECK(m1 * m1 <= m2 + 1e-12);
      // Loss ranges.
      const auto label = rng.below(s.size());
      const double z = eval_loss(kind, label, s);
      if (kind == LossKind::Accuracy) CHECK((z == 0.0 || z == 1.0));
      if (kind == LossKind::SquaredError) CHECK((z >= 0.0 && z <= 1.0));
      if (kind == LossKind::CrossEntropy) CHECK(z >= 0.0);
    }
  }
}

TEST_CASE("class-score sidecar supplies proxies and losses") {
  LossSpec spec;
  spec.kind = LossKind::SquaredError;
  spec.class_scores = parse_class_scores("{\"id\":\"a\",\"label\":0,\"scores\":[0.5,0.5]}\n"
                                         "{\"id\":\"b\",\"scores\":[1,0]}\n");
  const auto pop = ingest_text("id\na\nb\n", false, spec);
  CHECK(pop[0].proxy == doctest::Approx(0.25));
  CHECK(*pop[0].proxy_sq == doctest::Approx(0.0625));
  CHECK(*pop[0].loss == doctest::Approx(0.25));
  CHECK_FALSE(pop[1].loss.has_value());
  CHECK(pop.proxy_second_moments()[1] == 0.0);

  CHECK_THROWS(parse_class_scores("{\"id\":\"a\",\"scores\":[0.5,0.6]}\n"));
  CHECK_THROWS(parse_class_scores("{\"id\":\"a\",\"scores\":[1.5,-0.5]}\n"));
}

TEST_CASE("csv number formatting round-trips") {
  Rng rng(3, 3);
  for (int t = 0; t < 1000; ++t) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
    CHECK(csv::parse_double(csv::format_double(x), "t") == x);
  }
  CHECK(csv::format_double(-0.0) == "0");
  CHECK(csv::format_double(0.5) == "0.5");
}
