#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rstcoref/autograd.hpp"
#include "rstcoref/corpus.hpp"

namespace rstcoref {

using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class StoreFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Subtoken vectors of one paragraph. alignment[s] is the document-level
/// token index of subtoken s, or -1 for special subtokens.
struct EmbeddedParagraph {
  std::vector<std::int32_t> alignment;
  FloatMatrix vectors;  // n_subtokens x d_lm
};

struct StoreEntry {
  std::string id;
  std::vector<EmbeddedParagraph> paragraphs;
};

/// Frozen contextual embeddings. Read-only once loaded.
class EmbeddingStore {
 public:
  static constexpr char kMagic[4] = {'C', 'H', 'D', 'E'};
  static constexpr std::uint32_t kVersion = 1;

  explicit EmbeddingStore(int d_lm = 1024) : d_lm_(d_lm) {}

  int d_lm() const { return d_lm_; }
  /// Replaces an entry with the same id.
  void add(StoreEntry entry);
  const StoreEntry* find(const std::string& id) const;
  const std::vector<StoreEntry>& entries() const { return entries_; }

 private:
  int d_lm_;
  std::vector<StoreEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Little-endian binary: magic "CHDE", u32 version, u32 d_lm, then per
/// document: u32-length id, u32 paragraph count, and per paragraph u32
/// subtoken count, i32 alignment array, row-major f32 matrix.
void write_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_store(const std::filesystem::path& path);

struct StoreCheckReport {
  int documents = 0;
  int paragraphs = 0;
  long subtokens = 0;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

/// Structural checks, plus token coverage against `docs` when given.
StoreCheckReport check_store(const EmbeddingStore& store, const std::vector<Document>* docs);

/// n_tokens x d_lm; row t is the mean of the non-special subtoken rows aligned to t.
FloatMatrix average_subtokens(const StoreEntry& entry, const Document& doc, int d_lm);

/// One subtoken per token; a unit vector keyed by the lowercased token string.
StoreEntry synthetic_embeddings(const Document& doc, int d_lm, std::uint64_t seed);

// ---------------------------------------------------------------------------

/// Bidirectional LSTM compressor plus the span attention vector.
struct EncoderParams {
  ad::Parameter fw_input;   // d_lm x 4h
  ad::Parameter fw_hidden;  // h x 4h
  ad::Parameter fw_bias;    // 1 x 4h
  ad::Parameter bw_input;
  ad::Parameter bw_hidden;
  ad::Parameter bw_bias;
  ad::Parameter attention;  // d_c x 1

  int d_lm() const { return static_cast<int>(fw_input.value.rows()); }
  int d_c() const { return static_cast<int>(2 * fw_hidden.value.rows()); }
  std::vector<ad::Parameter*> all();
};

/// d_c must be even; each direction holds d_c/2 units.
EncoderParams init_encoder(int d_lm, int d_c, std::mt19937_64& rng);

struct EncoderVars {
  ad::Var fw_input, fw_hidden, fw_bias, bw_input, bw_hidden, bw_bias, attention;
};

/// Binds parameters to a tape. Without `trainable`, values enter as constants.
EncoderVars bind_encoder(ad::Tape& tape, EncoderParams& params, bool trainable);
EncoderVars bind_encoder(ad::Tape& tape, const EncoderParams& params);

/// Runs both directions over each paragraph separately (states reset at
/// paragraph boundaries) and returns n_tokens x d_c.
ad::Var compress(const EncoderVars& vars, ad::Var tokens,
                 const std::vector<ParagraphBounds>& paragraphs);

/// [x_start ; x_end ; attention-weighted sum] for each span, one row per span.
ad::Var span_representations(const EncoderVars& vars, ad::Var compressed,
                             const std::vector<MentionSpan>& spans);

}  // namespace rstcoref
