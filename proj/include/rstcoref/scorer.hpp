#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rstcoref/autograd.hpp"
#include "rstcoref/corpus.hpp"
#include "rstcoref/discourse.hpp"
#include "rstcoref/encoder.hpp"

namespace rstcoref {

/// Discourse distances fed to the fine scorer next to token distance.
struct FeatureSet {
  bool lin = false;
  bool rh = false;
  bool lca = false;

  int count() const { return int(lin) + int(rh) + int(lca); }
  bool any() const { return count() > 0; }
  /// Comma-separated subset of {lin, rh, lca}; "" or "none" for the empty set.
  static FeatureSet parse(const std::string& text);
  std::string to_string() const;
  bool operator==(const FeatureSet&) const = default;
};

struct ModelConfig {
  int d_lm = 1024;
  int d_c = 100;
  int hidden = 150;
  int d_f = 20;
  FeatureSet features;
  double lambda = 0.4;        // retained spans per token
  int top_antecedents = 50;   // K
  int max_span_length = 13;   // L_max
  double dropout = 0.2;       // on the fine-scorer input
};

constexpr int kDistanceBuckets = 10;

/// Buckets [0],[1],[2],[3],[4],[5-7],[8-15],[16-31],[32-63],[64+].
int bucketize(int distance);

struct ScorerParams {
  ad::Parameter mention_w;   // 3d_c x 1
  ad::Parameter mention_b;   // 1 x 1
  ad::Parameter coarse;      // 3d_c x 3d_c
  ad::Parameter fine_w1;     // (6d_c + d_f * (1 + n_feat)) x hidden
  ad::Parameter fine_b1;     // 1 x hidden
  ad::Parameter fine_w2;     // hidden x 1
  ad::Parameter fine_b2;     // 1 x 1
  ad::Parameter token_distance;  // buckets x d_f
  std::optional<ad::Parameter> lin_distance;
  std::optional<ad::Parameter> rh_distance;
  std::optional<ad::Parameter> lca_distance;

  FeatureSet features() const { return {lin_distance.has_value(), rh_distance.has_value(), lca_distance.has_value()}; }
  std::vector<ad::Parameter*> all();
};

ScorerParams init_scorer(const ModelConfig& cfg, std::mt19937_64& rng);

struct ScorerVars {
  ad::Var mention_w, mention_b, coarse, fine_w1, fine_b1, fine_w2, fine_b2, token_distance;
  std::optional<ad::Var> lin_distance, rh_distance, lca_distance;
};

ScorerVars bind_scorer(ad::Tape& tape, ScorerParams& params, bool trainable);
ScorerVars bind_scorer(ad::Tape& tape, const ScorerParams& params);

struct ModelParams {
  EncoderParams encoder;
  ScorerParams scorer;
  std::vector<ad::Parameter*> all();
  void zero_grad();
};

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);

struct ModelVars {
  EncoderVars encoder;
  ScorerVars scorer;
};

ModelVars bind_model(ad::Tape& tape, ModelParams& params, bool trainable);
/// Values enter as constants; safe to call concurrently on shared params.
ModelVars bind_model(ad::Tape& tape, const ModelParams& params);

// ---------------------------------------------------------------------------
// Span collection and pruning

/// Every span of at most max_length tokens inside one paragraph, in (start, end) order.
std::vector<MentionSpan> enumerate_spans(const Document& doc, int max_length);

/// min(n_spans, ceil(lambda * n_tokens)).
int retained_count(double lambda, int n_tokens, int n_spans);

/// Indices of the k highest scores, ties resolved toward lower index,
/// returned in increasing index order.
std::vector<int> top_k_spans(const std::vector<double>& scores, int k);

/// coarse(i, j) is read for j < i only. Returns, per mention i, the K best
/// antecedents j in increasing order, ties resolved toward lower j.
std::vector<std::vector<int>> top_antecedents(const ad::Matrix& coarse, int k);

/// Bucket ids per pair for token distance and each enabled discourse distance.
struct PairFeatures {
  std::vector<int> token;
  std::vector<int> lin;
  std::vector<int> rh;
  std::vector<int> lca;
};

/// max(0, start_i - end_j - 1).
int token_distance(const MentionSpan& antecedent, const MentionSpan& mention);

/// FFNN over [g_i ; g_j ; distance embeddings...]; P x 1. Throws
/// ConfigError when the features present do not match the parameter tables.
ad::Var fine_scores(const ScorerVars& vars, ad::Var g_mention, ad::Var g_antecedent,
                    const PairFeatures& features, const ad::Matrix* dropout_mask);

// ---------------------------------------------------------------------------
// Document pipeline

struct DocumentInput {
  const Document* doc = nullptr;
  ad::Matrix tokens;               // n_tokens x d_lm, averaged subtokens
  const EduTable* edus = nullptr;  // required when discourse features are enabled
};

struct ScoredDocument {
  std::vector<MentionSpan> candidates;  // every enumerated span
  ad::Var candidate_scores;             // s_m for each candidate, n x 1
  std::vector<MentionSpan> mentions;   // retained spans, document order
  std::vector<double> mention_scores;
  std::vector<int> offsets;            // mention m owns pairs offsets[m]..offsets[m+1]-1
  std::vector<int> antecedents;        // per pair, index into mentions
  std::vector<double> pair_scores;     // S(i, j) = coarse + fine
  ad::Var scores;                      // the pair scores on the tape, P x 1
};

/// Steps 1-4 of the span-ranking pipeline. `dropout_rng` enables dropout.
ScoredDocument score_document(const ModelVars& vars, const ModelConfig& cfg, const DocumentInput& input,
                              std::mt19937_64* dropout_rng);

struct Prediction {
  std::vector<MentionSpan> mentions;
  std::vector<int> antecedent;  // per mention, index into mentions or -1 for the dummy
  std::vector<std::vector<MentionSpan>> clusters;
};

/// Per mention, argmax over the dummy (score 0) and its candidates; ties go
/// to the dummy, then to the earliest antecedent. Clusters are the linked
/// components with at least two mentions.
Prediction decode(const std::vector<MentionSpan>& mentions, const std::vector<int>& offsets,
                  const std::vector<int>& antecedents, const std::vector<double>& pair_scores);

Prediction predict(const ModelParams& params, const ModelConfig& cfg, const DocumentInput& input);

/// {"id": ..., "clusters": [[[start_char, end_char], ...], ...]}
std::string prediction_to_json(const Document& doc, const Prediction& prediction);

}  // namespace rstcoref
