#include "doctest.h"

#include <fstream>

#include "rstcoref/evalmetrics.hpp"
#include "support.hpp"

using namespace rstcoref;

namespace {

ClusterFile one(std::vector<Entity> entities, const std::string& id = "d") {
  ClusterFile f;
  f.documents[id] = std::move(entities);
  return f;
}

const CharMention a{0, 1}, b{2, 3}, c{4, 5}, d{6, 7};

}  // namespace

TEST_CASE("hand case gives exactly two fifths") {
  const LeaScore s = lea(one({{a, b, c}}), one({{a, b}, {c, d}}));
  CHECK(s.recall == Rational(1, 3));
  CHECK(s.precision == Rational(1, 2));
  CHECK(s.f1 == Rational(2, 5));
  CHECK(s.warnings.empty());
}

TEST_CASE("identical clusterings score one") {
  const auto k = one({{a, b}, {c, d}});
  const LeaScore s = lea(k, k);
  CHECK(s.f1 == 1);
}

TEST_CASE("empty response scores zero with a warning") {
  const LeaScore s = lea(one({{a, b}}), one({}));
  CHECK(s.recall == 0);
  CHECK(s.precision == 0);
  CHECK(s.f1 == 0);
  REQUIRE(s.warnings.size() == 1);
}

TEST_CASE("singleton entities carry no weight") {
  const LeaScore s = lea(one({{a}, {b}}), one({{a}, {b}}));
  CHECK(s.f1 == 0);
  CHECK(s.warnings.size() == 2);
  const LeaScore t = lea(one({{a, b}, {c}}), one({{a, b}, {d}}));
  CHECK(t.f1 == 1);
}

TEST_CASE("document set mismatch is reported") {
  CHECK_THROWS_AS(lea(one({{a, b}}, "x"), one({{a, b}}, "y")), DocumentSetMismatch);
  CHECK_THROWS_AS(lea(one({{a, b}, {b, c}}), one({{a, b}})), std::invalid_argument);
}

TEST_CASE("closed form equals pair enumeration on random clusterings") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    ClusterFile key, response;
    const int docs = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int k = 0; k < docs; ++k) {
      const int n = std::uniform_int_distribution<int>(1, 12)(rng);
      key.documents["d" + std::to_string(k)] = testing::random_entities(rng, n);
      response.documents["d" + std::to_string(k)] = testing::random_entities(rng, n);
    }
    const LeaScore s = lea(key, response);
    const auto o = testing::oracle_lea(key, response);
    CHECK(s.recall == o.recall);
    CHECK(s.precision == o.precision);
    CHECK(s.f1 == o.f1);
    CHECK(lea_oracle(key, response).f1 == o.f1);
  }
}

TEST_CASE("scores do not depend on entity or mention order") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto k = testing::random_entities(rng, 10);
    auto r = testing::random_entities(rng, 10);
    const Rational f1 = lea(one(k), one(r)).f1;
    std::shuffle(r.begin(), r.end(), rng);
    for (auto& e : k) std::shuffle(e.begin(), e.end(), rng);
    CHECK(lea(one(k), one(r)).f1 == f1);
  }
}

TEST_CASE("cluster files load from corpus and prediction formats") {
  testing::TempDir dir("eval");
  std::ofstream(dir.path / "k.json") << R"({"id":"d","text":"a b","entities":[[[0,1],[2,3]]]})";
  std::ofstream(dir.path / "manifest.json") << R"({"command":"x"})";
  const ClusterFile key = load_cluster_dir(dir.path);
  REQUIRE(key.documents.size() == 1);
  const ClusterFile resp = parse_cluster_json(R"({"id":"d","clusters":[[[0,1],[2,3]]]})");
  CHECK(lea(key, resp).f1 == 1);
  CHECK(lea_to_json(lea(key, resp)).find("\"f1\"") != std::string::npos);
  CHECK_THROWS(parse_cluster_json("{"));
}
