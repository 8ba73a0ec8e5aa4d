#pragma once

// Small documents and models for scorer and training tests.

#include "rstcoref/scorer.hpp"
#include "rstcoref/training.hpp"
#include "support.hpp"

namespace testing {

/// "Ka lo he. Mi ra" (6 tokens): EDUs "Ka lo he. " and "Mi ra" joined by NS,
/// gold cluster {Ka, he}.
struct TinyInstance {
  Document doc;
  RstTree tree;
  EduTable edus;
  Eigen::MatrixXd tokens;
};

inline TinyInstance tiny_instance(int d_lm, std::mt19937_64& rng) {
  TinyInstance t;
  t.doc = make_document("tiny", "Ka lo he. Mi ra", {{{0, 2}, {6, 8}}}, nullptr, nullptr);
  RstNode rel;
  rel.kind = NodeKind::kRelation;
  rel.nuclearity = Nuclearity::kNS;
  rel.char_end = 15;
  const int r = add_node(t.tree, -1, rel);
  RstNode a;
  a.char_end = 10;
  add_node(t.tree, r, a);
  RstNode b;
  b.char_start = 10;
  b.char_end = 15;
  add_node(t.tree, r, b);
  t.edus = build_edu_table(t.tree, t.doc);
  t.tokens = random_matrix(t.doc.n_tokens(), d_lm, rng);
  return t;
}

/// Keeps every span and every antecedent so the loss is smooth in the parameters.
inline ModelConfig tiny_config(FeatureSet features) {
  ModelConfig c;
  c.d_lm = 4;
  c.d_c = 4;
  c.hidden = 5;
  c.d_f = 3;
  c.features = features;
  c.lambda = 100.0;
  c.top_antecedents = 100;
  c.max_span_length = 3;
  c.dropout = 0.0;
  return c;
}

/// Largest finite-difference error of the full training loss over every
/// model parameter.
inline double model_gradient_error(FeatureSet features, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ModelConfig cfg = tiny_config(features);
  TinyInstance inst = tiny_instance(cfg.d_lm, rng);
  ModelParams params = init_model(cfg, seed);
  DocumentInput input{&inst.doc, inst.tokens, &inst.edus};
  return gradient_check(params.all(), [&](ad::Tape& tape) {
    const ModelVars vars = bind_model(tape, params, true);
    const ScoredDocument scored = score_document(vars, cfg, input, nullptr);
    return ad::add(marginal_loss(scored, inst.doc), mention_loss(scored, inst.doc));
  });
}

}  // namespace testing
