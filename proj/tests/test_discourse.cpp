#include "doctest.h"

#include <fstream>

#include "rstcoref/discourse.hpp"
#include "support.hpp"

using namespace rstcoref;

namespace {

// "A x. B y. C z." with EDUs per sentence: NS(A, SN(B, C)).
const char* kTree = R"({"id":"d","paragraph_trees":[
  {"kind":"rel","label":"Elaboration","nuc":"NS","span":[0,14],"children":[
    {"kind":"edu","span":[0,5],"text":"A x. "},
    {"kind":"rel","label":"Background","nuc":"SN","span":[5,14],"children":[
      {"kind":"edu","span":[5,10]},
      {"kind":"edu","span":[10,14]}]}]}]})";

}  // namespace

TEST_CASE("tree JSON loads and round-trips") {
  const RstDocument d = parse_rst_json(kTree);
  REQUIRE(d.paragraph_trees.size() == 1);
  const RstTree& t = d.paragraph_trees[0];
  CHECK(t.nodes.size() == 5);
  CHECK(t.leaves().size() == 3);
  CHECK(t.count_relations("Background") == 1);
  CHECK(serialize_rst(parse_rst_json(serialize_rst(d))) == serialize_rst(d));
}

TEST_CASE("distances on a hand-built tree") {
  const Document doc = make_document("d", "A x. B y. C z.", {}, nullptr, nullptr);
  const RstTree t = parse_rst_json(kTree).paragraph_trees[0];
  const EduTable table = build_edu_table(t, doc);
  REQUIRE(table.size() == 3);
  CHECK(table.is_nuclear == std::vector<bool>{true, false, true});
  const MentionSpan a{0, 0}, b{3, 3}, c{6, 6};
  CHECK(d_lin(table, a, c) == 2);
  CHECK(d_rh(table, a, c) == 1);
  CHECK(d_rh(table, a, b) == 0);
  CHECK(d_rh(table, a, c, RhInterval::kOpen) == 0);
  CHECK(d_lca(table, a, c) == 2);
  CHECK(d_lca(table, b, c) == 1);
  CHECK(d_lca(table, MentionSpan{0, 0}, MentionSpan{1, 1}) == 0);
  CHECK_THROWS_AS(d_lin(table, c, a), std::invalid_argument);
}

TEST_CASE("validation errors name the node") {
  SUBCASE("wrong arity") {
    const char* bad = R"({"paragraph_trees":[{"kind":"rel","nuc":"NS","span":[0,5],"children":[
      {"kind":"edu","span":[0,5]}]}]})";
    try {
      parse_rst_json(bad);
      FAIL("expected StructureError");
    } catch (const StructureError& e) {
      CHECK(e.node_id() == 0);
      CHECK(std::string(e.what()).find("node 0") != std::string::npos);
    }
  }
  SUBCASE("gap between children") {
    const char* bad = R"({"paragraph_trees":[{"kind":"rel","nuc":"NN","span":[0,9],"children":[
      {"kind":"edu","span":[0,4]},{"kind":"edu","span":[5,9]}]}]})";
    CHECK_THROWS_AS(parse_rst_json(bad), StructureError);
  }
  SUBCASE("unknown nuclearity") {
    const char* bad = R"({"paragraph_trees":[{"kind":"rel","nuc":"XX","span":[0,9],"children":[]}]})";
    CHECK_THROWS(parse_rst_json(bad));
  }
  SUBCASE("malformed JSON") { CHECK_THROWS_AS(parse_rst_json("{"), ParseError); }
}

TEST_CASE("tokens outside every EDU raise AlignmentError") {
  const Document doc = make_document("d", "A x. B y. C z. D", {}, nullptr, nullptr);
  const RstTree t = parse_rst_json(kTree).paragraph_trees[0];
  CHECK_THROWS_AS(build_edu_table(t, doc), AlignmentError);
}

TEST_CASE("EDU boundary inside a token warns") {
  const Document doc = make_document("d", "Ab cd", {}, nullptr, nullptr);
  RstTree t;
  RstNode rel;
  rel.kind = NodeKind::kRelation;
  rel.nuclearity = Nuclearity::kNN;
  rel.char_end = 5;
  const int r = add_node(t, -1, rel);
  RstNode e1;
  e1.char_end = 1;
  add_node(t, r, e1);
  RstNode e2;
  e2.char_start = 1;
  e2.char_end = 5;
  add_node(t, r, e2);
  const EduTable table = build_edu_table(t, doc);
  CHECK(table.edu_of_token == std::vector<int>{0, 1});
  CHECK_FALSE(table.warnings.empty());
}

TEST_CASE("merging paragraph trees") {
  for (int n : {1, 2, 3, 7}) {
    CAPTURE(n);
    CHECK(testing::merge_law_violation(n) == "");
  }
  const auto chain = testing::single_edu_paragraphs(3);
  const RstTree merged = merge_paragraph_trees(chain.trees);
  const RstNode& root = merged.node(merged.root);
  CHECK(root.label == "Joint");
  CHECK(root.char_start == 0);
  CHECK(root.char_end == static_cast<int>(chain.doc.text.size()));
  CHECK_NOTHROW(validate_tree(merged));
  CHECK_THROWS(merge_paragraph_trees({}));
}

TEST_CASE("distances agree with tree-walking oracles on random trees") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = testing::random_tree_instance(rng, 30);
    REQUIRE_NOTHROW(validate_tree(inst.tree));
    const EduTable table = build_edu_table(inst.tree, inst.doc);
    const int n = inst.doc.n_tokens();
    for (int q = 0; q < 20 && n > 1; ++q) {
      int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
      int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      const MentionSpan j{a, a}, i{b, b};
      const auto o = testing::oracle_distances(inst.tree, inst.doc, j, i);
      CHECK(d_lin(table, j, i) == o.lin);
      CHECK(d_rh(table, j, i) == o.rh);
      CHECK(d_lca(table, j, i) == o.lca);
    }
  }
}

TEST_CASE("RST directory loading") {
  testing::TempDir dir("rst");
  RstDocument d = parse_rst_json(kTree);
  save_rst(d, dir.path / "d.json");
  std::ofstream(dir.path / "manifest.json") << "{}";
  const auto all = load_rst_dir(dir.path);
  REQUIRE(all.size() == 1);
  CHECK(all.at("d").paragraph_trees.size() == 1);
  save_rst(d, dir.path / "copy.json");
  CHECK_THROWS(load_rst_dir(dir.path));
}
