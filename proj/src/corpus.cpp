#include "rstcoref/corpus.hpp"
#include "rstcoref/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rstcoref {

using nlohmann::json;

namespace {

// Decodes one UTF-8 code point starting at text[i]; advances i.
char32_t decode_utf8(const std::string& text, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  unsigned char c = byte(i);
  int extra = 0;
  char32_t cp = 0;
  if (c < 0x80) {
    cp = c;
  } else if ((c >> 5) == 0x6) {
    cp = c & 0x1F;
    extra = 1;
  } else if ((c >> 4) == 0xE) {
    cp = c & 0x0F;
    extra = 2;
  } else if ((c >> 3) == 0x1E) {
    cp = c & 0x07;
    extra = 3;
  } else {
    ++i;
    return 0xFFFD;
  }
  ++i;
  for (int k = 0; k < extra && i < text.size(); ++k, ++i) {
    cp = (cp << 6) | (byte(i) & 0x3F);
  }
  return cp;
}

bool is_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
         cp == U'\v' || cp == 0x00A0 || cp == 0x2009 || cp == 0x202F || cp == 0x3000;
}

bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  switch (cp) {
    case 0x00AB:  // «
    case 0x00BB:  // »
    case 0x2013:  // en dash
    case 0x2014:  // em dash
    case 0x2026:  // ellipsis
    case 0x201C:
    case 0x201D:
    case 0x201E:
    case 0x2018:
    case 0x2019:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::vector<std::size_t> codepoint_offsets(const std::string& text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  std::size_t i = 0;
  while (i < text.size()) {
    offsets.push_back(i);
    decode_utf8(text, i);
  }
  offsets.push_back(text.size());
  return offsets;
}

std::string substr_codepoints(const std::string& text, const std::vector<std::size_t>& offsets,
                              int begin, int end) {
  return text.substr(offsets[begin], offsets[end] - offsets[begin]);
}

int Document::paragraph_of(int token) const {
  auto it = std::upper_bound(paragraphs.begin(), paragraphs.end(), token,
                             [](int t, const ParagraphBounds& p) { return t < p.first_token; });
  if (it == paragraphs.begin()) return -1;
  --it;
  if (token > it->last_token) return -1;
  return static_cast<int>(it - paragraphs.begin());
}

std::pair<int, int> Document::char_range(const MentionSpan& span) const {
  return {tokens.at(span.start).char_start, tokens.at(span.end).char_end};
}

std::vector<Token> fallback_tokenize(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  int cp_index = 0;
  int word_start = -1;
  std::size_t word_byte = 0;
  auto flush = [&](int end_cp, std::size_t end_byte) {
    if (word_start >= 0) {
      tokens.push_back({text.substr(word_byte, end_byte - word_byte), word_start, end_cp});
      word_start = -1;
    }
  };
  while (i < text.size()) {
    std::size_t begin = i;
    char32_t cp = decode_utf8(text, i);
    if (is_space(cp)) {
      flush(cp_index, begin);
    } else if (is_punct(cp)) {
      flush(cp_index, begin);
      tokens.push_back({text.substr(begin, i - begin), cp_index, cp_index + 1});
    } else if (word_start < 0) {
      word_start = cp_index;
      word_byte = begin;
    }
    ++cp_index;
  }
  flush(cp_index, text.size());
  return tokens;
}

std::vector<ParagraphBounds> paragraphs_from_newlines(const std::string& text,
                                                      const std::vector<Token>& tokens) {
  // Code point positions of newlines.
  std::vector<int> breaks;
  std::size_t i = 0;
  int cp_index = 0;
  while (i < text.size()) {
    if (decode_utf8(text, i) == U'\n') breaks.push_back(cp_index);
    ++cp_index;
  }
  std::vector<ParagraphBounds> out;
  std::size_t next_break = 0;
  int first = -1;
  for (int t = 0; t < static_cast<int>(tokens.size()); ++t) {
    bool crossed = false;
    while (next_break < breaks.size() && breaks[next_break] < tokens[t].char_start) {
      ++next_break;
      crossed = true;
    }
    if (crossed && first >= 0) {
      out.push_back({first, t - 1});
      first = -1;
    }
    if (first < 0) first = t;
  }
  if (first >= 0) out.push_back({first, static_cast<int>(tokens.size()) - 1});
  return out;
}

Document make_document(std::string id, std::string text,
                       const std::vector<std::vector<std::pair<int, int>>>& char_clusters,
                       const std::vector<std::pair<int, int>>* token_offsets,
                       LoadWarnings* warnings) {
  LoadWarnings local;
  LoadWarnings& warn = warnings ? *warnings : local;

  Document doc;
  doc.id = std::move(id);
  doc.text = std::move(text);
  const auto offsets = codepoint_offsets(doc.text);
  const int n_chars = static_cast<int>(offsets.size()) - 1;

  if (token_offsets) {
    int prev_end = 0;
    for (const auto& [s, e] : *token_offsets) {
      if (s < 0 || e > n_chars || s >= e || s < prev_end) {
        throw ParseError("document " + doc.id + ": invalid token offsets [" + std::to_string(s) +
                             "," + std::to_string(e) + "]",
                         -1);
      }
      doc.tokens.push_back({substr_codepoints(doc.text, offsets, s, e), s, e});
      prev_end = e;
    }
  } else {
    doc.tokens = fallback_tokenize(doc.text);
  }
  doc.paragraphs = paragraphs_from_newlines(doc.text, doc.tokens);

  std::map<int, int> token_by_start;
  std::map<int, int> token_by_end;
  for (int t = 0; t < doc.n_tokens(); ++t) {
    token_by_start[doc.tokens[t].char_start] = t;
    token_by_end[doc.tokens[t].char_end] = t;
  }

  std::set<MentionSpan> seen;
  for (const auto& cluster : char_clusters) {
    Cluster spans;
    for (const auto& [cs, ce] : cluster) {
      auto s = token_by_start.find(cs);
      auto e = token_by_end.find(ce);
      if (s == token_by_start.end() || e == token_by_end.end() || s->second > e->second) {
        ++warn.misaligned_spans;
        warn.messages.push_back(doc.id + ": span [" + std::to_string(cs) + "," +
                                std::to_string(ce) + ") does not align with token boundaries");
        continue;
      }
      MentionSpan span{s->second, e->second};
      if (!seen.insert(span).second) {
        ++warn.duplicate_spans;
        warn.messages.push_back(doc.id + ": duplicate span [" + std::to_string(cs) + "," +
                                std::to_string(ce) + ")");
        continue;
      }
      if (doc.paragraph_of(span.start) != doc.paragraph_of(span.end)) {
        ++warn.cross_paragraph_spans;
        warn.messages.push_back(doc.id + ": span [" + std::to_string(cs) + "," +
                                std::to_string(ce) + ") crosses a paragraph boundary");
      }
      spans.push_back(span);
    }
    if (!spans.empty()) {
      std::sort(spans.begin(), spans.end());
      doc.gold_clusters.push_back(std::move(spans));
    }
  }
  return doc;
}

Document parse_document_json(const std::string& json_text, LoadWarnings* warnings) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON at byte ") + std::to_string(e.byte) + ": " +
                         e.what(),
                     static_cast<std::int64_t>(e.byte));
  }
  try {
    std::string id = j.value("id", std::string{});
    std::string text = j.at("text").get<std::string>();
    std::vector<std::vector<std::pair<int, int>>> clusters;
    if (j.contains("entities")) {
      for (const auto& cluster : j.at("entities")) {
        auto& out = clusters.emplace_back();
        for (const auto& span : cluster) {
          out.emplace_back(span.at(0).get<int>(), span.at(1).get<int>());
        }
      }
    }
    std::vector<std::pair<int, int>> token_offsets;
    const bool has_tokens = j.contains("tokens") && !j.at("tokens").is_null();
    if (has_tokens) {
      for (const auto& t : j.at("tokens")) {
        token_offsets.emplace_back(t.at(0).get<int>(), t.at(1).get<int>());
      }
    }
    return make_document(std::move(id), std::move(text), clusters,
                         has_tokens ? &token_offsets : nullptr, warnings);
  } catch (const json::exception& e) {
    throw ParseError(std::string("document schema error: ") + e.what(), -1);
  }
}

Document load_document(const std::filesystem::path& path, DocumentFormat format,
                       LoadWarnings* warnings) {
  if (format != DocumentFormat::kRucocoJson) throw ConfigError("unsupported document format");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Document doc = parse_document_json(buf.str(), warnings);
  if (doc.id.empty()) doc.id = path.stem().string();
  return doc;
}

std::string serialize_document(const Document& doc) {
  json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  json tokens = json::array();
  for (const auto& t : doc.tokens) tokens.push_back({t.char_start, t.char_end});
  j["tokens"] = std::move(tokens);
  json entities = json::array();
  for (const auto& cluster : doc.gold_clusters) {
    json c = json::array();
    for (const auto& span : cluster) {
      auto [s, e] = doc.char_range(span);
      c.push_back({s, e});
    }
    entities.push_back(std::move(c));
  }
  j["entities"] = std::move(entities);
  return j.dump();
}

void save_document(const Document& doc, const std::filesystem::path& path) {
  write_text_atomic(path, serialize_document(doc) + "\n");
}

std::vector<Document> load_corpus_dir(const std::filesystem::path& dir, LoadWarnings* warnings) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        entry.path().filename() != "manifest.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  docs.reserve(files.size());
  for (const auto& f : files) docs.push_back(load_document(f, DocumentFormat::kRucocoJson, warnings));
  return docs;
}

void validate_document(const Document& doc) {
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("document " + doc.id + ": " + msg);
  };
  for (int t = 0; t < doc.n_tokens(); ++t) {
    const auto& tok = doc.tokens[t];
    if (tok.char_start >= tok.char_end) fail("empty token " + std::to_string(t));
    if (t > 0 && tok.char_start < doc.tokens[t - 1].char_end) {
      fail("overlapping tokens at " + std::to_string(t));
    }
  }
  int expected = 0;
  for (const auto& p : doc.paragraphs) {
    if (p.first_token != expected || p.last_token < p.first_token) fail("paragraphs do not partition tokens");
    expected = p.last_token + 1;
  }
  if (expected != doc.n_tokens()) fail("paragraphs do not cover all tokens");
  std::set<MentionSpan> seen;
  for (const auto& cluster : doc.gold_clusters) {
    if (cluster.empty()) fail("empty gold cluster");
    for (const auto& span : cluster) {
      if (span.start < 0 || span.start > span.end || span.end >= doc.n_tokens()) {
        fail("span out of range");
      }
      if (!seen.insert(span).second) fail("gold clusters are not disjoint");
    }
  }
}

// ---------------------------------------------------------------------------

double StatsReport::coverage(int cap) const {
  if (n_mentions == 0) return 0.0;
  long covered = 0;
  for (const auto& [len, count] : length_histogram) {
    if (len <= cap) covered += count;
  }
  return static_cast<double>(covered) / n_mentions;
}

StatsReport corpus_stats(const std::vector<Document>& docs) {
  if (docs.empty()) throw std::invalid_argument("corpus_stats: empty document list");
  StatsReport r;
  r.n_documents = static_cast<int>(docs.size());
  long total_len = 0;
  std::vector<int> paragraph_counts;
  for (const auto& doc : docs) {
    for (const auto& cluster : doc.gold_clusters) {
      for (const auto& span : cluster) {
        ++r.length_histogram[span.length()];
        ++r.n_mentions;
        total_len += span.length();
        r.max_length = std::max(r.max_length, span.length());
      }
    }
    const int np = static_cast<int>(doc.paragraphs.size());
    ++r.paragraph_histogram[np];
    paragraph_counts.push_back(np);
    r.max_paragraphs = std::max(r.max_paragraphs, np);
  }
  r.mean_length = r.n_mentions ? static_cast<double>(total_len) / r.n_mentions : 0.0;
  std::sort(paragraph_counts.begin(), paragraph_counts.end());
  const std::size_t n = paragraph_counts.size();
  r.median_paragraphs = n % 2 ? paragraph_counts[n / 2]
                              : 0.5 * (paragraph_counts[n / 2 - 1] + paragraph_counts[n / 2]);
  return r;
}

std::string stats_to_json(const StatsReport& r, int cap) {
  json j;
  j["documents"] = r.n_documents;
  j["mentions"] = r.n_mentions;
  j["mean_mention_length"] = r.mean_length;
  j["max_mention_length"] = r.max_length;
  j["length_cap"] = cap;
  j["cap_coverage"] = r.coverage(cap);
  j["median_paragraphs"] = r.median_paragraphs;
  j["max_paragraphs"] = r.max_paragraphs;
  json lh = json::object();
  for (const auto& [k, v] : r.length_histogram) lh[std::to_string(k)] = v;
  json ph = json::object();
  for (const auto& [k, v] : r.paragraph_histogram) ph[std::to_string(k)] = v;
  j["mention_length_histogram"] = std::move(lh);
  j["paragraph_count_histogram"] = std::move(ph);
  return j.dump(2);
}

std::string stats_to_table(const StatsReport& r, int cap) {
  std::ostringstream os;
  os << std::fixed;
  os << std::left << std::setw(24) << "documents" << r.n_documents << '\n'
     << std::setw(24) << "mentions" << r.n_mentions << '\n'
     << std::setw(24) << "mean mention length" << std::setprecision(3) << r.mean_length << '\n'
     << std::setw(24) << "max mention length" << r.max_length << '\n'
     << std::setw(24) << ("coverage at cap " + std::to_string(cap))
     << std::setprecision(2) << 100.0 * r.coverage(cap) << "%\n"
     << std::setw(24) << "median paragraphs" << std::setprecision(1) << r.median_paragraphs << '\n'
     << std::setw(24) << "max paragraphs" << r.max_paragraphs << "\n\n";

  auto histogram = [&](const char* title, const std::map<int, int>& h) {
    os << title << '\n';
    int peak = 1;
    for (const auto& [k, v] : h) peak = std::max(peak, v);
    for (const auto& [k, v] : h) {
      const int bar = static_cast<int>(40.0 * v / peak + 0.5);
      os << std::right << std::setw(6) << k << std::setw(9) << v << "  "
         << std::string(static_cast<std::size_t>(std::max(bar, v > 0 ? 1 : 0)), '#') << '\n';
    }
    os << '\n';
  };
  histogram("mention length (tokens)   count", r.length_histogram);
  histogram("paragraphs per document   count", r.paragraph_histogram);
  return os.str();
}

}  // namespace rstcoref
