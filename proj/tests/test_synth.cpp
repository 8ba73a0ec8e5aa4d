#include "doctest.h"

#include <set>

#include "rstcoref/synth.hpp"

using namespace rstcoref;

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig cfg;
  const auto a = generate_synthetic_corpus(4, 3, cfg);
  const auto b = generate_synthetic_corpus(4, 3, cfg);
  const auto c = generate_synthetic_corpus(5, 3, cfg);
  REQUIRE(a.size() == 3);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(serialize_document(a[k].doc) == serialize_document(b[k].doc));
    CHECK(serialize_rst(a[k].trees) == serialize_rst(b[k].trees));
  }
  CHECK(a[0].doc.text != c[0].doc.text);
}

TEST_CASE("generic documents hold the configured entities") {
  SynthConfig cfg;
  cfg.n_entities = 2;
  cfg.mentions_per_entity = 3;
  cfg.pronoun_prob = 0.0;
  for (const auto& s : generate_synthetic_corpus(9, 5, cfg)) {
    REQUIRE(s.doc.gold_clusters.size() == 2);
    for (const auto& c : s.doc.gold_clusters) CHECK(c.size() == 3);
    for (const auto& c : s.doc.gold_clusters) {
      for (const auto& m : c) CHECK(m.length() <= cfg.max_name_tokens);
    }
    CHECK(s.trees.paragraph_trees.size() == s.doc.paragraphs.size());
    for (const auto& t : s.trees.paragraph_trees) CHECK_NOTHROW(validate_tree(t));
  }
}

TEST_CASE("rhetorical documents: one pronoun per paragraph linked two nuclei back") {
  SynthConfig cfg;
  cfg.kind = SynthKind::kRhetorical;
  cfg.paragraphs = 3;
  for (const auto& s : generate_synthetic_corpus(2, 4, cfg)) {
    REQUIRE(s.doc.gold_clusters.size() == 3);
    REQUIRE(s.trees.paragraph_trees.size() == 3);
    const EduTable table = build_edu_table(merge_paragraph_trees(s.trees.paragraph_trees), s.doc);
    for (const auto& cluster : s.doc.gold_clusters) {
      REQUIRE(cluster.size() == 2);
      CHECK(s.doc.tokens[static_cast<std::size_t>(cluster[1].start)].text == "he");
      CHECK(d_rh(table, cluster[0], cluster[1]) == 2);
    }
  }
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig cfg;
  cfg.name_pool = 1;
  cfg.n_entities = 3;
  CHECK_THROWS_AS(generate_synthetic_corpus(1, 1, cfg), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_corpus(1, 0, SynthConfig{}), ConfigError);
  SynthConfig r;
  r.kind = SynthKind::kRhetorical;
  r.min_named_units = 1;
  CHECK_THROWS_AS(validate_synth_config(r), ConfigError);
}

TEST_CASE("name pool first tokens are distinct") {
  SynthConfig cfg;
  cfg.name_pool = 40;
  const auto pool = synth_name_pool(cfg);
  std::set<std::string> first;
  for (const auto& n : pool) first.insert(n.front());
  CHECK(first.size() == pool.size());
}
