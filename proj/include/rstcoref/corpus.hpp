#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rstcoref {

/// Raised when an input file cannot be parsed. `offset` is the byte offset
/// reported by the JSON parser, or -1 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::int64_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::int64_t offset() const { return offset_; }

 private:
  std::int64_t offset_;
};

/// Token-level alignment failure between an annotation layer and a document.
class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Character offsets are Unicode code point indices into Document::text.
struct Token {
  std::string text;
  int char_start = 0;
  int char_end = 0;
};

/// Inclusive token span.
struct MentionSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  auto operator<=>(const MentionSpan&) const = default;
};

using Cluster = std::vector<MentionSpan>;

struct ParagraphBounds {
  int first_token = 0;
  int last_token = 0;
  auto operator<=>(const ParagraphBounds&) const = default;
};

/// Counters filled while loading; a document still loads when these are non-zero.
struct LoadWarnings {
  int misaligned_spans = 0;
  int cross_paragraph_spans = 0;
  int duplicate_spans = 0;
  std::vector<std::string> messages;

  int total() const { return misaligned_spans + cross_paragraph_spans + duplicate_spans; }
};

struct Document {
  std::string id;
  std::string text;
  std::vector<Token> tokens;
  std::vector<ParagraphBounds> paragraphs;
  std::vector<Cluster> gold_clusters;

  int n_tokens() const { return static_cast<int>(tokens.size()); }
  /// Paragraph index of a token.
  int paragraph_of(int token) const;
  /// Character range [begin, end) covered by a token span.
  std::pair<int, int> char_range(const MentionSpan& span) const;
};

// ---------------------------------------------------------------------------
// UTF-8 helpers

/// Byte offset of every code point, plus a trailing entry equal to text.size().
std::vector<std::size_t> codepoint_offsets(const std::string& text);
std::string substr_codepoints(const std::string& text, const std::vector<std::size_t>& offsets,
                              int begin, int end);

// ---------------------------------------------------------------------------
// Tokenization and paragraph segmentation

/// Fallback splitter: whitespace separates tokens, every punctuation
/// character is a token of its own, everything else groups into words.
std::vector<Token> fallback_tokenize(const std::string& text);

/// One paragraph per newline-separated line holding at least one token.
std::vector<ParagraphBounds> paragraphs_from_newlines(const std::string& text,
                                                      const std::vector<Token>& tokens);

/// Builds a document from text and character-offset clusters. Spans that do
/// not align with token boundaries are dropped and counted in `warnings`.
Document make_document(std::string id, std::string text,
                       const std::vector<std::vector<std::pair<int, int>>>& char_clusters,
                       const std::vector<std::pair<int, int>>* token_offsets,
                       LoadWarnings* warnings);

enum class DocumentFormat { kRucocoJson };

Document load_document(const std::filesystem::path& path,
                       DocumentFormat format = DocumentFormat::kRucocoJson,
                       LoadWarnings* warnings = nullptr);
Document parse_document_json(const std::string& json_text, LoadWarnings* warnings = nullptr);

/// Canonical JSON: id, text, tokens as code point offsets, entities as
/// clusters of [start_char, end_char] pairs.
std::string serialize_document(const Document& doc);
void save_document(const Document& doc, const std::filesystem::path& path);

/// Loads every *.json file in a directory except manifest.json, sorted by file name.
std::vector<Document> load_corpus_dir(const std::filesystem::path& dir,
                                      LoadWarnings* warnings = nullptr);

/// Checks the Document invariants; throws std::invalid_argument on violation.
void validate_document(const Document& doc);

// ---------------------------------------------------------------------------
// Statistics

struct StatsReport {
  int n_documents = 0;
  int n_mentions = 0;
  std::map<int, int> length_histogram;     // tokens -> mention count
  std::map<int, int> paragraph_histogram;  // paragraphs -> document count
  double mean_length = 0.0;
  int max_length = 0;
  double median_paragraphs = 0.0;
  int max_paragraphs = 0;

  /// Fraction of mentions whose length is <= cap. 0 when there are no mentions.
  double coverage(int cap) const;
};

StatsReport corpus_stats(const std::vector<Document>& docs);
std::string stats_to_json(const StatsReport& report, int cap);
std::string stats_to_table(const StatsReport& report, int cap);

}  // namespace rstcoref
