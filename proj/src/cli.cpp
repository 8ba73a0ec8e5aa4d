#include "rstcoref/cli.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rstcoref/io.hpp"

namespace rstcoref::cli {

using nlohmann::json;

std::string RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["formats"] = {{"checkpoint", kCheckpointVersion}, {"store", EmbeddingStore::kVersion}};
  j["seed"] = seed;
  j["config"] = json::parse(config_json);
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

namespace {

/// Files written so far by a command; removed again if the command fails.
class OutputGuard {
 public:
  void add(const fs::path& p) { written_.push_back(p); }
  void commit() { written_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

 private:
  std::vector<fs::path> written_;
};

void write(OutputGuard& guard, const fs::path& path, const std::string& text) {
  write_text_atomic(path, text);
  guard.add(path);
}

std::string synth_config_json(const SynthConfig& c) {
  json j;
  j["kind"] = c.kind == SynthKind::kGeneric ? "generic" : "rhetorical";
  j["n_entities"] = c.n_entities;
  j["mentions_per_entity"] = c.mentions_per_entity;
  j["sentences_per_paragraph"] = c.sentences_per_paragraph;
  j["pronoun_prob"] = c.pronoun_prob;
  j["max_name_tokens"] = c.max_name_tokens;
  j["min_filler"] = c.min_filler;
  j["max_filler"] = c.max_filler;
  j["name_pool"] = c.name_pool;
  j["filler_vocab"] = c.filler_vocab;
  j["paragraphs"] = c.paragraphs;
  j["min_named_units"] = c.min_named_units;
  j["max_named_units"] = c.max_named_units;
  j["max_satellites"] = c.max_satellites;
  return j.dump();
}

std::vector<Document> load_corpus(const fs::path& dir, std::ostream& out) {
  LoadWarnings warnings;
  auto docs = load_corpus_dir(dir, &warnings);
  for (const auto& m : warnings.messages) out << "warning: " << m << "\n";
  return docs;
}

std::vector<PreparedDocument> prepare(const std::vector<Document>& docs, const EmbeddingStore& store,
                                      const std::optional<fs::path>& trees_dir, bool require_trees) {
  std::map<std::string, RstDocument> trees;
  if (trees_dir) trees = load_rst_dir(*trees_dir);
  return prepare_documents(docs, store, trees_dir ? &trees : nullptr, require_trees);
}

}  // namespace

StatsReport cmd_stats(const StatsOptions& opt, std::ostream& out) {
  const auto docs = load_corpus(opt.corpus, out);
  const StatsReport report = corpus_stats(docs);
  const std::string as_json = stats_to_json(report, opt.cap);
  out << (opt.json ? as_json + "\n" : stats_to_table(report, opt.cap));
  if (opt.out) write_text_atomic(*opt.out, as_json + "\n");
  return report;
}

void cmd_synth(const SynthOptions& opt, std::ostream& out) {
  const auto corpus = generate_synthetic_corpus(opt.seed, opt.n_docs, opt.config);
  const fs::path docs_dir = opt.out / "docs";
  const fs::path trees_dir = opt.out / "trees";
  fs::create_directories(docs_dir);
  fs::create_directories(trees_dir);
  OutputGuard guard;
  EmbeddingStore store(opt.d_lm);
  for (const SynthDocument& s : corpus) {
    write(guard, docs_dir / (s.doc.id + ".json"), serialize_document(s.doc) + "\n");
    write(guard, trees_dir / (s.doc.id + ".json"), serialize_rst(s.trees) + "\n");
    store.add(synthetic_embeddings(s.doc, opt.d_lm, opt.embed_seed));
  }
  const fs::path store_path = opt.out / "embeddings.chde";
  write_store(store, store_path);
  guard.add(store_path);

  RunManifest m;
  m.command = "synth";
  m.seed = opt.seed;
  json cfg = json::parse(synth_config_json(opt.config));
  cfg["n_docs"] = opt.n_docs;
  cfg["d_lm"] = opt.d_lm;
  cfg["embed_seed"] = opt.embed_seed;
  m.config_json = cfg.dump();
  m.outputs = {{"docs", docs_dir.string()}, {"trees", trees_dir.string()}, {"embeddings", store_path.string()}};
  write(guard, opt.out / "manifest.json", m.to_json());
  guard.commit();
  out << "wrote " << corpus.size() << " documents to " << opt.out.string() << "\n";
}

TrainResult cmd_train(const TrainOptions& opt, std::ostream& out) {
  opt.config.validate();
  const EmbeddingStore store = read_store(opt.embeddings);
  const bool need_trees = opt.config.features.any();
  auto train_docs = prepare(load_corpus(opt.corpus, out), store, opt.trees, need_trees);
  std::vector<PreparedDocument> dev_docs;
  if (opt.dev_corpus) {
    dev_docs = prepare(load_corpus(*opt.dev_corpus, out), store, opt.trees, need_trees);
  } else {
    std::tie(train_docs, dev_docs) =
        split_for_validation(std::move(train_docs), opt.config.validation_fraction, opt.config.seed);
  }
  out << "training on " << train_docs.size() << " documents, validating on " << dev_docs.size() << "\n";

  std::string log;
  TrainResult result = train(train_docs, dev_docs, opt.config, opt.workers, [&](const EpochRecord& r) {
    log += r.to_json() + "\n";
    out << r.to_json() << "\n";
  });

  fs::create_directories(opt.out);
  OutputGuard guard;
  const fs::path best = opt.out / "model.chdm";
  const fs::path final_path = opt.out / "final.chdm";
  const fs::path metrics = opt.out / "metrics.jsonl";
  save_checkpoint({result.config, result.best}, best);
  guard.add(best);
  save_checkpoint({result.config, result.final_params}, final_path);
  guard.add(final_path);
  write(guard, metrics, log);

  RunManifest m;
  m.command = "train";
  m.seed = opt.config.seed;
  json cfg = json::parse(train_config_to_json(opt.config));
  cfg["model"] = json::parse(model_config_to_json(result.config));
  cfg["workers"] = opt.workers;
  m.config_json = cfg.dump();
  m.inputs = {{"corpus", opt.corpus.string()}, {"embeddings", opt.embeddings.string()}};
  if (opt.trees) m.inputs["trees"] = opt.trees->string();
  if (opt.dev_corpus) m.inputs["dev_corpus"] = opt.dev_corpus->string();
  m.outputs = {{"best_checkpoint", best.string()}, {"final_checkpoint", final_path.string()},
               {"metrics", metrics.string()}};
  write(guard, opt.out / "manifest.json", m.to_json());
  guard.commit();
  out << "best epoch " << result.best_epoch << " (F1 " << result.best_f1 << "), wrote " << opt.out.string() << "\n";
  return result;
}

void cmd_predict(const PredictOptions& opt, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  const EmbeddingStore store = read_store(opt.embeddings);
  if (store.d_lm() != ckpt.config.d_lm) {
    throw ConfigError("embedding width " + std::to_string(store.d_lm()) + " does not match the checkpoint's " +
                      std::to_string(ckpt.config.d_lm));
  }
  const auto docs = prepare(load_corpus(opt.corpus, out), store, opt.trees, ckpt.config.features.any());
  const auto predictions = predict_all(ckpt.params, ckpt.config, docs, opt.workers);

  fs::create_directories(opt.out);
  OutputGuard guard;
  for (std::size_t k = 0; k < docs.size(); ++k) {
    write(guard, opt.out / (docs[k].doc.id + ".json"), prediction_to_json(docs[k].doc, predictions[k]) + "\n");
  }
  RunManifest m;
  m.command = "predict";
  m.config_json = model_config_to_json(ckpt.config);
  m.inputs = {{"checkpoint", opt.checkpoint.string()}, {"corpus", opt.corpus.string()},
              {"embeddings", opt.embeddings.string()}};
  if (opt.trees) m.inputs["trees"] = opt.trees->string();
  m.outputs = {{"predictions", opt.out.string()}};
  write(guard, opt.out / "manifest.json", m.to_json());
  guard.commit();
  out << "wrote " << docs.size() << " predictions to " << opt.out.string() << "\n";
}

LeaScore cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const LeaScore score = lea(load_cluster_dir(opt.key), load_cluster_dir(opt.response));
  out << (opt.json ? lea_to_json(score) + "\n" : lea_to_table(score));
  return score;
}

StoreCheckReport cmd_export_check(const ExportCheckOptions& opt, std::ostream& out) {
  StoreCheckReport report;
  EmbeddingStore store;
  try {
    store = read_store(opt.store);
  } catch (const StoreFormatError& e) {
    report.errors.push_back(e.what());
    out << "FAIL " << opt.store.string() << ": " << e.what() << "\n";
    return report;
  }
  std::vector<Document> docs;
  if (opt.corpus) docs = load_corpus(*opt.corpus, out);
  report = check_store(store, opt.corpus ? &docs : nullptr);
  if (opt.d_lm && *opt.d_lm != store.d_lm()) {
    report.errors.push_back("header d_lm " + std::to_string(store.d_lm()) + ", expected " + std::to_string(*opt.d_lm));
  }
  out << "store " << opt.store.string() << ": d_lm " << store.d_lm() << ", " << report.documents << " documents, "
      << report.paragraphs << " paragraphs, " << report.subtokens << " subtokens\n";
  for (const auto& e : report.errors) out << "error: " << e << "\n";
  out << (report.ok() ? "OK\n" : "FAIL\n");
  return report;
}

}  // namespace rstcoref::cli
