#include "rstcoref/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>

namespace rstcoref {

namespace {

constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ra", "te", "vo", "su", "ni",
                                      "da", "pe", "zo", "bu", "ge", "fa", "ri", "to"};
constexpr int kSyllableCount = 16;

std::string syllable_word(int index, int length) {
  std::string w;
  for (int k = 0; k < length; ++k) {
    w += kSyllables[index % kSyllableCount];
    index /= kSyllableCount;
  }
  return w;
}

std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

std::vector<std::string> filler_words(const SynthConfig& cfg) {
  std::vector<std::string> words;
  for (int i = 0; i < cfg.filler_vocab; ++i) words.push_back(syllable_word(i * 7 + 3, 3));
  return words;
}

// Builds text line by line while recording unit spans and mentions.
class TextBuilder {
 public:
  int pos() const { return static_cast<int>(text_.size()); }

  void word(const std::string& w) {
    if (!line_start_ && !text_.empty() && text_.back() != ' ') text_ += ' ';
    text_ += w;
    line_start_ = false;
  }
  void period() {
    text_ += '.';
    line_start_ = false;
  }
  void space() { text_ += ' '; }
  void newline() {
    text_ += '\n';
    line_start_ = true;
  }
  std::pair<int, int> name(const std::vector<std::string>& tokens) {
    if (!line_start_ && !text_.empty() && text_.back() != ' ') text_ += ' ';
    const int start = pos();
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      if (k) text_ += ' ';
      text_ += tokens[k];
    }
    line_start_ = false;
    return {start, pos()};
  }
  std::string take() { return std::move(text_); }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  bool line_start_ = true;
};

struct Unit {
  int start = 0;
  int end = 0;
  bool nuclear = true;
};

// Right-branching chain over the units of one paragraph. A nuclear unit
// heads an NN relation with the rest, a satellite an SN relation, so the
// final unit is always a nucleus.
RstTree chain_tree(const std::vector<Unit>& units, const std::string& text, bool alternate_ns) {
  RstTree tree;
  int parent = -1;
  const int m = static_cast<int>(units.size());
  const int line_end = units.back().end;
  for (int k = 0; k < m; ++k) {
    RstNode edu;
    edu.kind = NodeKind::kEdu;
    edu.char_start = units[k].start;
    edu.char_end = units[k].end;
    edu.text = text.substr(static_cast<std::size_t>(units[k].start),
                           static_cast<std::size_t>(units[k].end - units[k].start));
    if (k == m - 1) {
      add_node(tree, parent, std::move(edu));
      break;
    }
    RstNode rel;
    rel.kind = NodeKind::kRelation;
    rel.char_start = units[k].start;
    rel.char_end = line_end;
    if (units[k].nuclear) {
      rel.nuclearity = alternate_ns ? Nuclearity::kNS : Nuclearity::kNN;
      rel.label = alternate_ns ? "Elaboration" : "Sequence";
    } else {
      rel.nuclearity = Nuclearity::kSN;
      rel.label = "Background";
    }
    parent = add_node(tree, parent, std::move(rel));
    add_node(tree, parent, std::move(edu));
  }
  return tree;
}

std::string doc_id(std::uint64_t seed, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "synth-%llu-%04d", static_cast<unsigned long long>(seed), index);
  return buf;
}

SynthDocument finish(const std::string& id, TextBuilder& tb,
                     const std::vector<std::vector<std::pair<int, int>>>& clusters,
                     const std::vector<std::vector<Unit>>& paragraphs, bool alternate_ns) {
  SynthDocument out;
  std::string text = tb.take();
  for (const auto& units : paragraphs) {
    out.trees.paragraph_trees.push_back(chain_tree(units, text, alternate_ns));
  }
  out.trees.id = id;
  out.doc = make_document(id, std::move(text), clusters, nullptr, nullptr);
  return out;
}

SynthDocument generic_document(std::mt19937_64& rng, const std::string& id, const SynthConfig& cfg,
                               const std::vector<std::vector<std::string>>& pool,
                               const std::vector<std::string>& filler) {
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  std::vector<int> entity_pool(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) entity_pool[i] = static_cast<int>(i);
  std::shuffle(entity_pool.begin(), entity_pool.end(), rng);
  entity_pool.resize(static_cast<std::size_t>(cfg.n_entities));

  std::vector<int> slots;
  for (int e = 0; e < cfg.n_entities; ++e) {
    for (int m = 0; m < cfg.mentions_per_entity; ++m) slots.push_back(e);
  }
  std::shuffle(slots.begin(), slots.end(), rng);

  TextBuilder tb;
  std::vector<std::vector<std::pair<int, int>>> clusters(static_cast<std::size_t>(cfg.n_entities));
  std::vector<bool> introduced(static_cast<std::size_t>(cfg.n_entities), false);
  std::vector<std::vector<Unit>> paragraphs;
  std::vector<Unit> units;
  int last_named = -1;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const int e = slots[s];
    if (s > 0 && s % static_cast<std::size_t>(cfg.sentences_per_paragraph) == 0) {
      units.back().end = tb.pos();
      paragraphs.push_back(std::move(units));
      units.clear();
      tb.newline();
    } else if (s > 0) {
      tb.space();
    }
    Unit unit;
    unit.start = tb.pos();
    unit.nuclear = units.size() % 2 == 0;
    if (chance(0.3)) tb.word(capitalize(filler[static_cast<std::size_t>(uniform(0, cfg.filler_vocab - 1))]));
    std::pair<int, int> span;
    const bool pronoun = introduced[static_cast<std::size_t>(e)] && last_named == e &&
                         chance(cfg.pronoun_prob);
    if (pronoun) {
      span = tb.name({entity_pool[static_cast<std::size_t>(e)] % 2 ? "she" : "he"});
    } else {
      span = tb.name(pool[static_cast<std::size_t>(entity_pool[static_cast<std::size_t>(e)])]);
      last_named = e;
      introduced[static_cast<std::size_t>(e)] = true;
    }
    clusters[static_cast<std::size_t>(e)].push_back(span);
    const int n_fill = uniform(cfg.min_filler, cfg.max_filler);
    for (int k = 0; k < n_fill; ++k) tb.word(filler[static_cast<std::size_t>(uniform(0, cfg.filler_vocab - 1))]);
    tb.period();
    unit.end = tb.pos();
    units.push_back(unit);
  }
  paragraphs.push_back(std::move(units));
  for (auto& p : paragraphs) {
    for (std::size_t k = 0; k + 1 < p.size(); ++k) p[k].end = p[k + 1].start;
  }
  // Entities mentioned once are singletons and carry no gold link.
  std::erase_if(clusters, [](const auto& c) { return c.size() < 2; });
  return finish(id, tb, clusters, paragraphs, /*alternate_ns=*/true);
}

SynthDocument rhetorical_document(std::mt19937_64& rng, const std::string& id,
                                  const SynthConfig& cfg,
                                  const std::vector<std::vector<std::string>>& pool,
                                  const std::vector<std::string>& filler) {
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto fill = [&](TextBuilder& tb, int n) {
    for (int k = 0; k < n; ++k) tb.word(filler[static_cast<std::size_t>(uniform(0, cfg.filler_vocab - 1))]);
  };

  std::vector<int> names(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) names[i] = static_cast<int>(i);
  std::shuffle(names.begin(), names.end(), rng);
  std::size_t next_name = 0;

  TextBuilder tb;
  std::vector<std::vector<std::pair<int, int>>> clusters;
  std::vector<std::vector<Unit>> paragraphs;
  for (int p = 0; p < cfg.paragraphs; ++p) {
    if (p > 0) tb.newline();
    std::vector<Unit> units;
    std::vector<std::pair<int, int>> name_spans;
    const int n_named = uniform(cfg.min_named_units, cfg.max_named_units);
    auto satellites = [&] {
      const int n_sat = uniform(0, cfg.max_satellites);
      for (int s = 0; s < n_sat; ++s) {
        if (!units.empty()) tb.space();
        Unit u{tb.pos(), 0, false};
        fill(tb, uniform(cfg.min_filler + 1, cfg.max_filler + 2));
        tb.period();
        u.end = tb.pos();
        units.push_back(u);
      }
    };
    for (int k = 0; k < n_named; ++k) {
      if (k > 0) satellites();
      if (!units.empty()) tb.space();
      Unit u{tb.pos(), 0, true};
      fill(tb, uniform(0, 1));
      name_spans.push_back(tb.name(pool[static_cast<std::size_t>(names[next_name++])]));
      fill(tb, uniform(cfg.min_filler, cfg.max_filler));
      tb.period();
      u.end = tb.pos();
      units.push_back(u);
    }
    satellites();
    tb.space();
    Unit u{tb.pos(), 0, true};
    fill(tb, uniform(0, 1));
    const auto pronoun = tb.name({"he"});
    fill(tb, uniform(cfg.min_filler, cfg.max_filler));
    tb.period();
    u.end = tb.pos();
    units.push_back(u);
    for (std::size_t k = 0; k + 1 < units.size(); ++k) units[k].end = units[k + 1].start;
    clusters.push_back({name_spans[name_spans.size() - 2], pronoun});
    paragraphs.push_back(std::move(units));
  }
  return finish(id, tb, clusters, paragraphs, /*alternate_ns=*/false);
}

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("invalid synthetic config: ") + msg);
  };
  require(cfg.filler_vocab >= 1, "filler_vocab must be positive");
  require(cfg.name_pool >= 1, "name_pool must be positive");
  require(cfg.name_pool <= kSyllableCount * kSyllableCount, "name_pool too large");
  require(cfg.max_name_tokens >= 1, "max_name_tokens must be positive");
  require(cfg.min_filler >= 0 && cfg.min_filler <= cfg.max_filler, "filler range");
  require(cfg.pronoun_prob >= 0.0 && cfg.pronoun_prob <= 1.0, "pronoun_prob outside [0,1]");
  if (cfg.kind == SynthKind::kGeneric) {
    require(cfg.n_entities >= 1, "n_entities must be positive");
    require(cfg.mentions_per_entity >= 1, "mentions_per_entity must be positive");
    require(cfg.sentences_per_paragraph >= 1, "sentences_per_paragraph must be positive");
    require(cfg.name_pool >= cfg.n_entities, "name_pool smaller than n_entities");
  } else {
    require(cfg.paragraphs >= 1, "paragraphs must be positive");
    require(cfg.min_named_units >= 2, "min_named_units must be at least 2");
    require(cfg.max_named_units >= cfg.min_named_units, "named unit range");
    require(cfg.max_satellites >= 0, "max_satellites must be nonnegative");
    require(cfg.name_pool >= cfg.paragraphs * cfg.max_named_units,
            "name_pool smaller than names per document");
  }
}

std::vector<std::vector<std::string>> synth_name_pool(const SynthConfig& cfg) {
  std::vector<std::vector<std::string>> pool;
  for (int i = 0; i < cfg.name_pool; ++i) {
    // First tokens are distinct: syllable pairs indexed by i.
    std::vector<std::string> name{capitalize(syllable_word(i, 2))};
    const int extra = i % cfg.max_name_tokens;
    for (int k = 0; k < extra; ++k) name.push_back(capitalize(syllable_word(i * 5 + k + 11, 2) + "ov"));
    pool.push_back(std::move(name));
  }
  return pool;
}

std::vector<SynthDocument> generate_synthetic_corpus(std::uint64_t seed, int n_docs,
                                                     const SynthConfig& cfg) {
  if (n_docs < 1) throw ConfigError("n_docs must be at least 1");
  validate_synth_config(cfg);
  const auto pool = synth_name_pool(cfg);
  const auto filler = filler_words(cfg);
  std::mt19937_64 rng(seed);
  std::vector<SynthDocument> out;
  for (int d = 0; d < n_docs; ++d) {
    const std::string id = doc_id(seed, d);
    out.push_back(cfg.kind == SynthKind::kGeneric ? generic_document(rng, id, cfg, pool, filler)
                                                  : rhetorical_document(rng, id, cfg, pool, filler));
  }
  return out;
}

}  // namespace rstcoref
