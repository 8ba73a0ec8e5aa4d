#include "rstcoref/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <thread>

#include "binary_io.hpp"
#include "json.hpp"

namespace rstcoref {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (top_antecedents < 1) throw ConfigError("top antecedents must be >= 1");
  if (max_span_length < 1) throw ConfigError("max span length must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must be in (0, 1)");
  }
  if (d_c < 2 || d_c % 2 != 0) throw ConfigError("d_c must be even and >= 2");
  if (hidden < 1 || d_f < 1) throw ConfigError("hidden and d_f must be positive");
  if (!(mention_loss_weight >= 0.0)) throw ConfigError("mention loss weight must be >= 0");
}

ModelConfig TrainConfig::model_config(int d_lm) const {
  ModelConfig m;
  m.d_lm = d_lm;
  m.d_c = d_c;
  m.hidden = hidden;
  m.d_f = d_f;
  m.features = features;
  m.lambda = lambda;
  m.top_antecedents = top_antecedents;
  m.max_span_length = max_span_length;
  m.dropout = dropout;
  return m;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["dropout"] = cfg.dropout;
  j["features"] = cfg.features.to_string();
  j["lambda"] = cfg.lambda;
  j["top_antecedents"] = cfg.top_antecedents;
  j["max_span_length"] = cfg.max_span_length;
  j["clip_norm"] = cfg.clip_norm;
  j["validation_fraction"] = cfg.validation_fraction;
  j["mention_loss_weight"] = cfg.mention_loss_weight;
  j["d_c"] = cfg.d_c;
  j["hidden"] = cfg.hidden;
  j["d_f"] = cfg.d_f;
  return j.dump();
}

std::string model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["d_lm"] = cfg.d_lm;
  j["d_c"] = cfg.d_c;
  j["hidden"] = cfg.hidden;
  j["d_f"] = cfg.d_f;
  j["features"] = cfg.features.to_string();
  j["lambda"] = cfg.lambda;
  j["top_antecedents"] = cfg.top_antecedents;
  j["max_span_length"] = cfg.max_span_length;
  j["dropout"] = cfg.dropout;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ModelConfig m;
    m.d_lm = j.at("d_lm").get<int>();
    m.d_c = j.at("d_c").get<int>();
    m.hidden = j.at("hidden").get<int>();
    m.d_f = j.at("d_f").get<int>();
    m.features = FeatureSet::parse(j.at("features").get<std::string>());
    m.lambda = j.at("lambda").get<double>();
    m.top_antecedents = j.at("top_antecedents").get<int>();
    m.max_span_length = j.at("max_span_length").get<int>();
    m.dropout = j.at("dropout").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

DocumentInput PreparedDocument::input() const {
  return {&doc, tokens, edus ? &*edus : nullptr};
}

std::vector<PreparedDocument> prepare_documents(const std::vector<Document>& docs, const EmbeddingStore& store,
                                                const std::map<std::string, RstDocument>* trees,
                                                bool require_trees) {
  std::vector<std::string> no_embeddings;
  std::vector<std::string> no_trees;
  for (const Document& d : docs) {
    if (!store.find(d.id)) no_embeddings.push_back(d.id);
    if (require_trees && (!trees || !trees->count(d.id))) no_trees.push_back(d.id);
  }
  if (!no_embeddings.empty() || !no_trees.empty()) {
    std::string msg;
    std::vector<std::string> ids;
    auto list = [&](const char* what, const std::vector<std::string>& missing) {
      if (missing.empty()) return;
      if (!msg.empty()) msg += "; ";
      msg += std::string("missing ") + what + " for:";
      for (const auto& id : missing) {
        msg += " " + id;
        ids.push_back(id);
      }
    };
    list("embeddings", no_embeddings);
    list("RST trees", no_trees);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    throw MissingInputError(msg, ids);
  }

  std::vector<PreparedDocument> out;
  out.reserve(docs.size());
  for (const Document& d : docs) {
    PreparedDocument p;
    p.doc = d;
    const FloatMatrix avg = average_subtokens(*store.find(d.id), d, store.d_lm());
    p.tokens = avg.cast<double>();
    if (trees) {
      auto it = trees->find(d.id);
      if (it != trees->end() && !it->second.paragraph_trees.empty()) {
        p.edus = build_edu_table(merge_paragraph_trees(it->second.paragraph_trees), d);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<char> gold_pairs(const Document& doc, const ScoredDocument& scored) {
  std::map<MentionSpan, int> cluster_of;
  for (std::size_t c = 0; c < doc.gold_clusters.size(); ++c) {
    for (const MentionSpan& s : doc.gold_clusters[c]) cluster_of[s] = static_cast<int>(c);
  }
  std::vector<int> mention_cluster(scored.mentions.size(), -1);
  for (std::size_t m = 0; m < scored.mentions.size(); ++m) {
    auto it = cluster_of.find(scored.mentions[m]);
    if (it != cluster_of.end()) mention_cluster[m] = it->second;
  }
  std::vector<char> gold(scored.antecedents.size(), 0);
  for (std::size_t m = 0; m + 1 < scored.offsets.size(); ++m) {
    if (mention_cluster[m] < 0) continue;
    for (int k = scored.offsets[m]; k < scored.offsets[m + 1]; ++k) {
      gold[static_cast<std::size_t>(k)] =
          mention_cluster[static_cast<std::size_t>(scored.antecedents[static_cast<std::size_t>(k)])] ==
          mention_cluster[m];
    }
  }
  return gold;
}

ad::Var marginal_loss(const ScoredDocument& scored, const Document& doc) {
  return ad::marginal_nll(scored.scores, scored.offsets, gold_pairs(doc, scored));
}

ad::Var mention_loss(const ScoredDocument& scored, const Document& doc) {
  std::set<MentionSpan> gold;
  for (const auto& c : doc.gold_clusters) gold.insert(c.begin(), c.end());
  std::vector<char> targets(scored.candidates.size());
  for (std::size_t k = 0; k < targets.size(); ++k) targets[k] = gold.count(scored.candidates[k]) > 0;
  return ad::logistic_loss(scored.candidate_scores, targets);
}

double optimizer_step(const std::vector<ad::Parameter*>& params, AdamState& state, double lr, double clip_norm) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  std::vector<std::string> bad;
  double sq = 0.0;
  for (const ad::Parameter* p : params) {
    if (!p->grad.allFinite()) bad.push_back(p->name);
    sq += p->grad.squaredNorm();
  }
  if (!bad.empty()) {
    std::string msg = "non-finite gradient in:";
    for (const auto& name : bad) msg += " " + name;
    throw NumericError(msg);
  }
  const double norm = std::sqrt(sq);
  const double factor = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const ad::Parameter* p : params) {
      state.m.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Parameter& p = *params[k];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw std::invalid_argument("gradient shape mismatch for " + p.name);
    }
    const ad::Matrix g = p.grad * factor;
    state.m[k] = kBeta1 * state.m[k] + (1.0 - kBeta1) * g;
    state.v[k] = kBeta2 * state.v[k] + (1.0 - kBeta2) * g.cwiseProduct(g);
    p.value.array() -= lr * (state.m[k].array() / c1) / ((state.v[k].array() / c2).sqrt() + kEps);
  }
  return norm;
}

// ---------------------------------------------------------------------------

namespace {

int resolve_workers(int workers, std::size_t jobs) {
  int n = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(1, n);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(1, jobs)));
}

Entity to_entity(const Document& doc, const std::vector<MentionSpan>& cluster) {
  Entity e;
  for (const MentionSpan& s : cluster) e.push_back(doc.char_range(s));
  return e;
}

}  // namespace

std::vector<Prediction> predict_all(const ModelParams& params, const ModelConfig& cfg,
                                    const std::vector<PreparedDocument>& docs, int workers) {
  std::vector<Prediction> out(docs.size());
  const int n = resolve_workers(workers, docs.size());
  if (n == 1) {
    for (std::size_t k = 0; k < docs.size(); ++k) out[k] = predict(params, cfg, docs[k].input());
    return out;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> threads;
  for (int w = 0; w < n; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t k = static_cast<std::size_t>(w); k < docs.size(); k += static_cast<std::size_t>(n)) {
          out[k] = predict(params, cfg, docs[k].input());
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

ClusterFile gold_cluster_file(const std::vector<PreparedDocument>& docs) {
  ClusterFile f;
  for (const auto& p : docs) {
    auto& entities = f.documents[p.doc.id];
    for (const auto& c : p.doc.gold_clusters) entities.push_back(to_entity(p.doc, c));
  }
  return f;
}

ClusterFile prediction_cluster_file(const std::vector<PreparedDocument>& docs,
                                    const std::vector<Prediction>& predictions) {
  ClusterFile f;
  for (std::size_t k = 0; k < docs.size(); ++k) {
    auto& entities = f.documents[docs[k].doc.id];
    for (const auto& c : predictions.at(k).clusters) entities.push_back(to_entity(docs[k].doc, c));
  }
  return f;
}

LeaScore evaluate(const ModelParams& params, const ModelConfig& cfg, const std::vector<PreparedDocument>& docs,
                  int workers) {
  const auto predictions = predict_all(params, cfg, docs, workers);
  return lea(gold_cluster_file(docs), prediction_cluster_file(docs, predictions));
}

std::string EpochRecord::to_json() const {
  json j;
  j["epoch"] = epoch;
  j["loss"] = loss;
  j["grad_norm"] = grad_norm;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  return j.dump();
}

std::pair<std::vector<PreparedDocument>, std::vector<PreparedDocument>> split_for_validation(
    std::vector<PreparedDocument> docs, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must be in (0, 1)");
  if (docs.size() < 2) throw ConfigError("need at least two documents to hold out a validation split");
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eed5a1175ULL);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_dev = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(docs.size()))), 1, docs.size() - 1);
  std::vector<char> is_dev(docs.size(), 0);
  for (std::size_t k = 0; k < n_dev; ++k) is_dev[order[k]] = 1;
  std::pair<std::vector<PreparedDocument>, std::vector<PreparedDocument>> out;
  for (std::size_t k = 0; k < docs.size(); ++k) {
    (is_dev[k] ? out.second : out.first).push_back(std::move(docs[k]));
  }
  return out;
}

TrainResult train(const std::vector<PreparedDocument>& train_docs, const std::vector<PreparedDocument>& dev_docs,
                  const TrainConfig& cfg, int workers, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_docs.empty()) throw ConfigError("no training documents");
  const int d_lm = static_cast<int>(train_docs.front().tokens.cols());
  std::vector<std::string> missing_trees;
  for (const auto* set : {&train_docs, &dev_docs}) {
    for (const auto& p : *set) {
      if (p.tokens.cols() != d_lm) throw ConfigError("document " + p.doc.id + " has a different embedding width");
      if (cfg.features.any() && !p.edus) missing_trees.push_back(p.doc.id);
    }
  }
  if (!missing_trees.empty()) {
    std::string msg = "discourse features enabled but no RST trees for:";
    for (const auto& id : missing_trees) msg += " " + id;
    throw MissingInputError(msg, missing_trees);
  }

  TrainResult result;
  result.config = cfg.model_config(d_lm);
  ModelParams params = init_model(result.config, cfg.seed);
  result.best = params;
  AdamState adam;
  std::mt19937_64 shuffle_rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
  std::mt19937_64 dropout_rng(cfg.seed * 0xbf58476d1ce4e5b9ULL + 2);
  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto trainable = params.all();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double norm_sum = 0.0;
    for (std::size_t k : order) {
      params.zero_grad();
      ad::Tape tape;
      const ModelVars vars = bind_model(tape, params, true);
      const ScoredDocument scored = score_document(vars, result.config, train_docs[k].input(), &dropout_rng);
      ad::Var loss = marginal_loss(scored, train_docs[k].doc);
      if (cfg.mention_loss_weight > 0.0) {
        loss = ad::add(loss, ad::scale(mention_loss(scored, train_docs[k].doc), cfg.mention_loss_weight));
      }
      ad::check_finite(loss.value(), "loss of " + train_docs[k].doc.id);
      rec.loss += loss.scalar();
      tape.backward(loss);
      norm_sum += optimizer_step(trainable, adam, cfg.learning_rate, cfg.clip_norm);
    }
    rec.grad_norm = norm_sum / static_cast<double>(order.size());
    if (!dev_docs.empty()) {
      const LeaScore score = evaluate(params, result.config, dev_docs, workers);
      rec.precision = score.precision_value();
      rec.recall = score.recall_value();
      rec.f1 = score.f1_value();
    }
    if (rec.f1 > result.best_f1) {
      result.best_f1 = rec.f1;
      result.best_epoch = epoch;
      result.best = params;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (result.best_f1 < 0.0) result.best_f1 = 0.0;
  result.final_params = params;
  return result;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'H', 'D', 'M'};

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  ModelParams params = checkpoint.params;
  const auto tensors = params.all();
  detail::Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(model_config_to_json(checkpoint.config));
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const ad::Parameter* p : tensors) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rows()));
    w.u32(static_cast<std::uint32_t>(p->value.cols()));
    // row-major on disk
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) w.f64(p->value(r, c));
    }
  }
  detail::write_file_atomic(path.string(), w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::vector<unsigned char> data;
  try {
    data = detail::read_file(path.string());
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
  detail::Reader<CheckpointError> r(data.data(), data.size());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw CheckpointError(path.string() + ": not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  Checkpoint out;
  try {
    out.config = model_config_from_json(r.str());
    out.params = init_model(out.config, 0);
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  auto tensors = out.params.all();
  std::map<std::string, ad::Parameter*> by_name;
  for (auto* p : tensors) by_name[p->name] = p;
  const std::uint32_t count = r.u32();
  if (count != tensors.size()) {
    throw CheckpointError(path.string() + ": expected " + std::to_string(tensors.size()) + " tensors, found " +
                          std::to_string(count));
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError(path.string() + ": unexpected tensor " + name);
    ad::Parameter& p = *it->second;
    by_name.erase(it);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw CheckpointError(path.string() + ": tensor " + name + " has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", config implies " + std::to_string(p.value.rows()) + "x" +
                            std::to_string(p.value.cols()));
    }
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) p.value(i, j) = r.f64();
    }
  }
  if (!r.done()) throw CheckpointError(path.string() + ": trailing bytes after last tensor");
  for (auto* p : tensors) p->zero_grad();
  return out;
}

}  // namespace rstcoref
