#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "rstcoref/corpus.hpp"
#include "rstcoref/evalmetrics.hpp"
#include "rstcoref/synth.hpp"
#include "rstcoref/training.hpp"

namespace rstcoref::cli {

namespace fs = std::filesystem;

/// Written as manifest.json next to every command's outputs.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_json = "{}";
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;

  std::string to_json() const;
};

struct StatsOptions {
  fs::path corpus;
  int cap = 13;
  bool json = false;
  std::optional<fs::path> out;  // also write the JSON report here
};
StatsReport cmd_stats(const StatsOptions& opt, std::ostream& out);

struct SynthOptions {
  fs::path out;
  std::uint64_t seed = 1;
  int n_docs = 10;
  SynthConfig config;
  int d_lm = 64;
  std::uint64_t embed_seed = 7;
};
/// Writes out/docs/*.json, out/trees/*.json, out/embeddings.chde and a manifest.
void cmd_synth(const SynthOptions& opt, std::ostream& out);

struct TrainOptions {
  fs::path corpus;
  fs::path embeddings;
  std::optional<fs::path> trees;
  std::optional<fs::path> dev_corpus;  // otherwise split off validation_fraction
  fs::path out;
  TrainConfig config;
  int workers = 0;
};
/// Writes out/model.chdm (best validation F1), out/final.chdm,
/// out/metrics.jsonl and a manifest.
TrainResult cmd_train(const TrainOptions& opt, std::ostream& out);

struct PredictOptions {
  fs::path checkpoint;
  fs::path corpus;
  fs::path embeddings;
  std::optional<fs::path> trees;
  fs::path out;
  int workers = 0;
};
/// One <id>.json per document plus a manifest.
void cmd_predict(const PredictOptions& opt, std::ostream& out);

struct EvalOptions {
  fs::path key;
  fs::path response;
  bool json = false;
};
LeaScore cmd_eval(const EvalOptions& opt, std::ostream& out);

struct ExportCheckOptions {
  fs::path store;
  std::optional<fs::path> corpus;
  std::optional<int> d_lm;
};
StoreCheckReport cmd_export_check(const ExportCheckOptions& opt, std::ostream& out);

}  // namespace rstcoref::cli
