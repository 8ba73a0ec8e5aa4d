#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rstcoref/autograd.hpp"
#include "rstcoref/corpus.hpp"
#include "rstcoref/discourse.hpp"
#include "rstcoref/encoder.hpp"
#include "rstcoref/evalmetrics.hpp"
#include "rstcoref/scorer.hpp"

namespace rstcoref {

/// Some documents lack embeddings or trees; ids() lists them.
class MissingInputError : public std::runtime_error {
 public:
  MissingInputError(const std::string& what, std::vector<std::string> ids)
      : std::runtime_error(what), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 30;
  std::uint64_t seed = 1;
  double dropout = 0.2;
  FeatureSet features;
  double lambda = 0.4;
  int top_antecedents = 50;
  int max_span_length = 13;
  double clip_norm = 5.0;
  double mention_loss_weight = 1.0;  // 0 trains on the marginal loss alone
  double validation_fraction = 0.05;
  int d_c = 100;
  int hidden = 150;
  int d_f = 20;

  /// Throws ConfigError.
  void validate() const;
  ModelConfig model_config(int d_lm) const;
};

std::string train_config_to_json(const TrainConfig& cfg);
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

// ---------------------------------------------------------------------------

/// A document with its averaged token vectors and, when trees were given, its
/// merged EDU table.
struct PreparedDocument {
  Document doc;
  ad::Matrix tokens;
  std::optional<EduTable> edus;

  DocumentInput input() const;
};

/// Fails fast with MissingInputError naming every document without an
/// embedding entry, or without trees when `require_trees` is set.
std::vector<PreparedDocument> prepare_documents(const std::vector<Document>& docs, const EmbeddingStore& store,
                                                const std::map<std::string, RstDocument>* trees,
                                                bool require_trees);

/// Flags each candidate pair whose mentions belong to the same gold cluster.
std::vector<char> gold_pairs(const Document& doc, const ScoredDocument& scored);

/// Marginal negative log-likelihood of the gold antecedents, dummy gold when
/// a mention has none.
ad::Var marginal_loss(const ScoredDocument& scored, const Document& doc);

/// Logistic loss of every candidate's mention score against gold membership.
ad::Var mention_loss(const ScoredDocument& scored, const Document& doc);

struct AdamState {
  std::vector<ad::Matrix> m;
  std::vector<ad::Matrix> v;
  long step = 0;
};

/// Clips gradients to `clip_norm` (global L2, skipped when <= 0), then applies
/// one Adam update. Returns the pre-clip norm. Throws NumericError naming
/// the offending parameters on non-finite gradients, before any update.
double optimizer_step(const std::vector<ad::Parameter*>& params, AdamState& state, double lr, double clip_norm);

// ---------------------------------------------------------------------------

/// Per-document decoding, run on up to `workers` threads (0 = hardware).
std::vector<Prediction> predict_all(const ModelParams& params, const ModelConfig& cfg,
                                    const std::vector<PreparedDocument>& docs, int workers);

ClusterFile gold_cluster_file(const std::vector<PreparedDocument>& docs);
ClusterFile prediction_cluster_file(const std::vector<PreparedDocument>& docs,
                                    const std::vector<Prediction>& predictions);

LeaScore evaluate(const ModelParams& params, const ModelConfig& cfg, const std::vector<PreparedDocument>& docs,
                  int workers);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // summed over documents
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm

  std::string to_json() const;
};

struct TrainResult {
  ModelConfig config;
  ModelParams best;
  ModelParams final_params;
  int best_epoch = 0;
  double best_f1 = -1.0;
  std::vector<EpochRecord> log;
};

/// Deterministic split; the validation part holds max(1, round(f * n))
/// documents. Needs n >= 2.
std::pair<std::vector<PreparedDocument>, std::vector<PreparedDocument>> split_for_validation(
    std::vector<PreparedDocument> docs, double fraction, std::uint64_t seed);

/// One document per step, shuffled each epoch; `on_epoch` sees each record
/// as soon as it is computed.
TrainResult train(const std::vector<PreparedDocument>& train_docs, const std::vector<PreparedDocument>& dev_docs,
                  const TrainConfig& cfg, int workers,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws CheckpointError on bad magic, version mismatch, truncation or
/// tensors that do not match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rstcoref
