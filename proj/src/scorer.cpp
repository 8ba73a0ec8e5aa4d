#include "rstcoref/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace rstcoref {

FeatureSet FeatureSet::parse(const std::string& text) {
  FeatureSet f;
  if (text.empty() || text == "none") return f;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "lin") {
      f.lin = true;
    } else if (item == "rh") {
      f.rh = true;
    } else if (item == "lca") {
      f.lca = true;
    } else {
      throw ConfigError("unknown feature '" + item + "' (expected lin, rh, lca)");
    }
  }
  return f;
}

std::string FeatureSet::to_string() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(lin, "lin");
  add(rh, "rh");
  add(lca, "lca");
  return s.empty() ? "none" : s;
}

int bucketize(int distance) {
  if (distance < 0) throw std::invalid_argument("bucketize: negative distance");
  if (distance < 5) return distance;
  int log2 = 0;
  while ((distance >> (log2 + 1)) > 0) ++log2;
  return std::min(log2 + 3, kDistanceBuckets - 1);
}

namespace {

ad::Matrix glorot(int rows, int cols, std::mt19937_64& rng, double gain = 1.0) {
  const double bound = gain * std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  ad::Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

ad::Matrix table(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  ad::Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

}  // namespace

std::vector<ad::Parameter*> ScorerParams::all() {
  std::vector<ad::Parameter*> out{&mention_w, &mention_b, &coarse,  &fine_w1,
                                  &fine_b1,   &fine_w2,   &fine_b2, &token_distance};
  if (lin_distance) out.push_back(&*lin_distance);
  if (rh_distance) out.push_back(&*rh_distance);
  if (lca_distance) out.push_back(&*lca_distance);
  return out;
}

ScorerParams init_scorer(const ModelConfig& cfg, std::mt19937_64& rng) {
  const int g = 3 * cfg.d_c;
  const int fine_in = 2 * g + cfg.d_f * (1 + cfg.features.count());
  ScorerParams p;
  p.mention_w = {"scorer.mention.w", glorot(g, 1, rng)};
  p.mention_b = {"scorer.mention.b", ad::Matrix::Zero(1, 1)};
  p.coarse = {"scorer.coarse", glorot(g, g, rng, 0.1)};
  p.fine_w1 = {"scorer.fine.w1", glorot(fine_in, cfg.hidden, rng)};
  p.fine_b1 = {"scorer.fine.b1", ad::Matrix::Zero(1, cfg.hidden)};
  p.fine_w2 = {"scorer.fine.w2", glorot(cfg.hidden, 1, rng)};
  p.fine_b2 = {"scorer.fine.b2", ad::Matrix::Zero(1, 1)};
  p.token_distance = {"scorer.distance.token", table(kDistanceBuckets, cfg.d_f, rng)};
  if (cfg.features.lin) p.lin_distance = ad::Parameter{"scorer.distance.lin", table(kDistanceBuckets, cfg.d_f, rng)};
  if (cfg.features.rh) p.rh_distance = ad::Parameter{"scorer.distance.rh", table(kDistanceBuckets, cfg.d_f, rng)};
  if (cfg.features.lca) p.lca_distance = ad::Parameter{"scorer.distance.lca", table(kDistanceBuckets, cfg.d_f, rng)};
  return p;
}

ScorerVars bind_scorer(ad::Tape& tape, ScorerParams& p, bool trainable) {
  if (!trainable) return bind_scorer(tape, static_cast<const ScorerParams&>(p));
  ScorerVars v{tape.parameter(p.mention_w), tape.parameter(p.mention_b), tape.parameter(p.coarse),
               tape.parameter(p.fine_w1),   tape.parameter(p.fine_b1),   tape.parameter(p.fine_w2),
               tape.parameter(p.fine_b2),   tape.parameter(p.token_distance), {}, {}, {}};
  if (p.lin_distance) v.lin_distance = tape.parameter(*p.lin_distance);
  if (p.rh_distance) v.rh_distance = tape.parameter(*p.rh_distance);
  if (p.lca_distance) v.lca_distance = tape.parameter(*p.lca_distance);
  return v;
}

ScorerVars bind_scorer(ad::Tape& tape, const ScorerParams& p) {
  ScorerVars v{tape.constant(p.mention_w.value), tape.constant(p.mention_b.value),
               tape.constant(p.coarse.value),    tape.constant(p.fine_w1.value),
               tape.constant(p.fine_b1.value),   tape.constant(p.fine_w2.value),
               tape.constant(p.fine_b2.value),   tape.constant(p.token_distance.value),
               {}, {}, {}};
  if (p.lin_distance) v.lin_distance = tape.constant(p.lin_distance->value);
  if (p.rh_distance) v.rh_distance = tape.constant(p.rh_distance->value);
  if (p.lca_distance) v.lca_distance = tape.constant(p.lca_distance->value);
  return v;
}

std::vector<ad::Parameter*> ModelParams::all() {
  auto out = encoder.all();
  for (auto* p : scorer.all()) out.push_back(p);
  return out;
}

void ModelParams::zero_grad() {
  for (auto* p : all()) p->zero_grad();
}

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.d_lm < 1 || cfg.hidden < 1 || cfg.d_f < 1) throw ConfigError("model dimensions must be positive");
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.encoder = init_encoder(cfg.d_lm, cfg.d_c, rng);
  p.scorer = init_scorer(cfg, rng);
  return p;
}

ModelVars bind_model(ad::Tape& tape, ModelParams& params, bool trainable) {
  return {bind_encoder(tape, params.encoder, trainable), bind_scorer(tape, params.scorer, trainable)};
}

ModelVars bind_model(ad::Tape& tape, const ModelParams& params) {
  return {bind_encoder(tape, params.encoder), bind_scorer(tape, params.scorer)};
}

// ---------------------------------------------------------------------------

std::vector<MentionSpan> enumerate_spans(const Document& doc, int max_length) {
  if (max_length < 1) throw std::invalid_argument("enumerate_spans: max_length must be >= 1");
  std::vector<MentionSpan> spans;
  for (const ParagraphBounds& p : doc.paragraphs) {
    for (int s = p.first_token; s <= p.last_token; ++s) {
      const int last = std::min(p.last_token, s + max_length - 1);
      for (int e = s; e <= last; ++e) spans.push_back({s, e});
    }
  }
  return spans;
}

int retained_count(double lambda, int n_tokens, int n_spans) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  // Guard against 0.4 * 10 evaluating to 4.000000000000001.
  const double k = std::ceil(lambda * n_tokens - 1e-9);
  return static_cast<int>(std::min<double>(k, n_spans));
}

std::vector<int> top_k_spans(const std::vector<double>& scores, int k) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  k = std::clamp(k, 0, static_cast<int>(scores.size()));
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)] ||
           (scores[static_cast<std::size_t>(a)] == scores[static_cast<std::size_t>(b)] && a < b);
  });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::vector<int>> top_antecedents(const ad::Matrix& coarse, int k) {
  if (k < 1) throw std::invalid_argument("top_antecedents: K must be >= 1");
  const int n = static_cast<int>(coarse.rows());
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(static_cast<std::size_t>(i));
    for (int j = 0; j < i; ++j) row[static_cast<std::size_t>(j)] = coarse(i, j);
    out[static_cast<std::size_t>(i)] = top_k_spans(row, k);
  }
  return out;
}

int token_distance(const MentionSpan& antecedent, const MentionSpan& mention) {
  return std::max(0, mention.start - antecedent.end - 1);
}

ad::Var fine_scores(const ScorerVars& vars, ad::Var g_mention, ad::Var g_antecedent,
                    const PairFeatures& features, const ad::Matrix* dropout_mask) {
  const std::size_t n_pairs = static_cast<std::size_t>(g_mention.rows());
  auto check = [&](const std::vector<int>& buckets, const std::optional<ad::Var>& tab, const char* name) {
    if (n_pairs == 0) return;
    if (tab.has_value() != !buckets.empty() || (tab && buckets.size() != n_pairs)) {
      throw ConfigError(std::string("feature '") + name + "' does not match the model's feature tables");
    }
  };
  if (features.token.size() != n_pairs) throw ConfigError("token distance missing for some pairs");
  check(features.lin, vars.lin_distance, "lin");
  check(features.rh, vars.rh_distance, "rh");
  check(features.lca, vars.lca_distance, "lca");

  std::vector<ad::Var> parts{g_mention, g_antecedent, ad::gather_rows(vars.token_distance, features.token)};
  if (vars.lin_distance) parts.push_back(ad::gather_rows(*vars.lin_distance, features.lin));
  if (vars.rh_distance) parts.push_back(ad::gather_rows(*vars.rh_distance, features.rh));
  if (vars.lca_distance) parts.push_back(ad::gather_rows(*vars.lca_distance, features.lca));
  ad::Var input = ad::concat_cols(parts);
  if (dropout_mask) input = ad::mul_const(input, *dropout_mask);
  const ad::Var hidden = ad::relu(ad::add_row(ad::matmul(input, vars.fine_w1), vars.fine_b1));
  return ad::add_row(ad::matmul(hidden, vars.fine_w2), vars.fine_b2);
}

ScoredDocument score_document(const ModelVars& vars, const ModelConfig& cfg, const DocumentInput& input,
                              std::mt19937_64* dropout_rng) {
  const Document& doc = *input.doc;
  ad::Tape& tape = *vars.encoder.attention.tape();
  ScoredDocument out;
  out.offsets.push_back(0);
  if (cfg.features.any() && !input.edus) {
    throw ConfigError("document " + doc.id + ": discourse features enabled but no RST tree given");
  }
  const std::vector<MentionSpan> spans = enumerate_spans(doc, cfg.max_span_length);
  out.candidates = spans;
  if (spans.empty()) {
    out.candidate_scores = tape.constant(ad::Matrix::Zero(0, 1));
    out.scores = tape.constant(ad::Matrix::Zero(0, 1));
    return out;
  }

  // 1. span representations
  const ad::Var tokens = tape.constant(input.tokens);
  const ad::Var compressed = compress(vars.encoder, tokens, doc.paragraphs);
  const ad::Var g_all = span_representations(vars.encoder, compressed, spans);

  // 2. mention scores and top-k pruning
  const ad::Var s_all = ad::add_row(ad::matmul(g_all, vars.scorer.mention_w), vars.scorer.mention_b);
  out.candidate_scores = s_all;
  std::vector<double> s_values(spans.size());
  for (std::size_t k = 0; k < spans.size(); ++k) s_values[k] = s_all.value()(static_cast<Eigen::Index>(k), 0);
  const std::vector<int> kept =
      top_k_spans(s_values, retained_count(cfg.lambda, doc.n_tokens(), static_cast<int>(spans.size())));
  for (int k : kept) {
    out.mentions.push_back(spans[static_cast<std::size_t>(k)]);
    out.mention_scores.push_back(s_values[static_cast<std::size_t>(k)]);
  }
  const ad::Var g = ad::gather_rows(g_all, kept);
  const ad::Var s = ad::gather_rows(s_all, kept);

  // 3. coarse bilinear scores and top-K antecedents
  const ad::Var bilinear = ad::matmul(ad::matmul(g, vars.scorer.coarse), ad::transpose(g));
  const auto n = static_cast<Eigen::Index>(kept.size());
  ad::Matrix coarse = bilinear.value();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) coarse(i, j) += s.value()(i, 0) + s.value()(j, 0);
  }
  const auto candidates = top_antecedents(coarse, cfg.top_antecedents);

  std::vector<int> mention_rows;
  std::vector<std::pair<int, int>> positions;
  PairFeatures features;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (int j : candidates[i]) {
      mention_rows.push_back(static_cast<int>(i));
      out.antecedents.push_back(j);
      positions.emplace_back(static_cast<int>(i), j);
      const MentionSpan& mi = out.mentions[i];
      const MentionSpan& mj = out.mentions[static_cast<std::size_t>(j)];
      features.token.push_back(bucketize(token_distance(mj, mi)));
      if (cfg.features.lin) features.lin.push_back(bucketize(d_lin(*input.edus, mj, mi)));
      if (cfg.features.rh) features.rh.push_back(bucketize(d_rh(*input.edus, mj, mi)));
      if (cfg.features.lca) features.lca.push_back(bucketize(d_lca(*input.edus, mj, mi)));
    }
    out.offsets.push_back(static_cast<int>(out.antecedents.size()));
  }
  if (out.antecedents.empty()) {
    out.scores = tape.constant(ad::Matrix::Zero(0, 1));
    return out;
  }

  // 4. fine scores, S = coarse + fine
  const ad::Var coarse_pairs =
      ad::add(ad::add(ad::gather_elements(bilinear, positions), ad::gather_rows(s, mention_rows)),
              ad::gather_rows(s, out.antecedents));
  const ad::Var g_i = ad::gather_rows(g, mention_rows);
  const ad::Var g_j = ad::gather_rows(g, out.antecedents);
  std::optional<ad::Matrix> mask;
  if (dropout_rng && cfg.dropout > 0.0) {
    const Eigen::Index width = vars.scorer.fine_w1.rows();
    mask = ad::Matrix(g_i.rows(), width);
    std::bernoulli_distribution keep(1.0 - cfg.dropout);
    for (Eigen::Index k = 0; k < mask->size(); ++k) mask->data()[k] = keep(*dropout_rng) ? 1.0 / (1.0 - cfg.dropout) : 0.0;
  }
  const ad::Var fine = fine_scores(vars.scorer, g_i, g_j, features, mask ? &*mask : nullptr);
  out.scores = ad::add(coarse_pairs, fine);
  out.pair_scores.assign(out.scores.value().data(), out.scores.value().data() + out.scores.rows());
  return out;
}

Prediction decode(const std::vector<MentionSpan>& mentions, const std::vector<int>& offsets,
                  const std::vector<int>& antecedents, const std::vector<double>& pair_scores) {
  Prediction p;
  p.mentions = mentions;
  const std::size_t n = mentions.size();
  p.antecedent.assign(n, -1);
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (std::size_t i = 0; i < n && i + 1 < offsets.size(); ++i) {
    double best = 0.0;  // dummy
    for (int k = offsets[i]; k < offsets[i + 1]; ++k) {
      if (pair_scores[static_cast<std::size_t>(k)] > best) {
        best = pair_scores[static_cast<std::size_t>(k)];
        p.antecedent[i] = antecedents[static_cast<std::size_t>(k)];
      }
    }
    if (p.antecedent[i] >= 0) {
      const int a = find(static_cast<int>(i));
      const int b = find(p.antecedent[i]);
      if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }
  std::map<int, std::vector<MentionSpan>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(static_cast<int>(i))].push_back(mentions[i]);
  for (auto& [root, members] : groups) {
    if (members.size() >= 2) p.clusters.push_back(std::move(members));
  }
  return p;
}

Prediction predict(const ModelParams& params, const ModelConfig& cfg, const DocumentInput& input) {
  ad::Tape tape;
  const ModelVars vars = bind_model(tape, params);
  const ScoredDocument scored = score_document(vars, cfg, input, nullptr);
  return decode(scored.mentions, scored.offsets, scored.antecedents, scored.pair_scores);
}

std::string prediction_to_json(const Document& doc, const Prediction& prediction) {
  nlohmann::json j;
  j["id"] = doc.id;
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : prediction.clusters) {
    nlohmann::json cluster = nlohmann::json::array();
    for (const auto& span : c) {
      auto [s, e] = doc.char_range(span);
      cluster.push_back({s, e});
    }
    clusters.push_back(std::move(cluster));
  }
  j["clusters"] = std::move(clusters);
  return j.dump();
}

}  // namespace rstcoref
