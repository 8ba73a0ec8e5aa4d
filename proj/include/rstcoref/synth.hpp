#pragma once

#include <cstdint>
#include <vector>

#include "rstcoref/corpus.hpp"
#include "rstcoref/discourse.hpp"

namespace rstcoref {

enum class SynthKind {
  /// Repeated names plus pronouns bound to the nearest preceding name.
  kGeneric,
  /// One pronoun per paragraph whose antecedent is the name two nuclear
  /// units back. Satellite units of random length sit between named units,
  /// so token distance does not identify the antecedent.
  kRhetorical,
};

struct SynthConfig {
  SynthKind kind = SynthKind::kGeneric;
  int n_entities = 3;
  int mentions_per_entity = 3;
  int sentences_per_paragraph = 3;
  double pronoun_prob = 0.4;
  int max_name_tokens = 2;
  int min_filler = 1;
  int max_filler = 4;
  int name_pool = 16;
  int filler_vocab = 40;
  // kRhetorical only
  int paragraphs = 3;
  int min_named_units = 2;
  int max_named_units = 4;
  int max_satellites = 2;
};

struct SynthDocument {
  Document doc;
  RstDocument trees;
};

/// Throws ConfigError.
void validate_synth_config(const SynthConfig& cfg);

/// Deterministic in (seed, cfg). The name pool depends on cfg only, so
/// corpora generated with different seeds share names.
std::vector<SynthDocument> generate_synthetic_corpus(std::uint64_t seed, int n_docs,
                                                     const SynthConfig& cfg);

/// Names available to the generator, each as its token list.
std::vector<std::vector<std::string>> synth_name_pool(const SynthConfig& cfg);

}  // namespace rstcoref
