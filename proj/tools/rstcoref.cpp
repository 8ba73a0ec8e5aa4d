// rstcoref: stats, synth, train, predict, eval and export-check subcommands.

#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "rstcoref/cli.hpp"
#include "rstcoref/io.hpp"

using namespace rstcoref;

namespace {

void add_train_flags(CLI::App* app, TrainConfig& c, std::string& features) {
  app->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  app->add_option("--epochs", c.epochs)->capture_default_str();
  app->add_option("--seed", c.seed)->capture_default_str();
  app->add_option("--dropout", c.dropout, "dropout on the fine-scorer input")->capture_default_str();
  app->add_option("--features", features, "comma-separated subset of lin,rh,lca, or none")->capture_default_str();
  app->add_option("--lambda", c.lambda, "retained spans per token")->capture_default_str();
  app->add_option("--topk-antecedents", c.top_antecedents)->capture_default_str();
  app->add_option("--lmax", c.max_span_length, "maximum span length in tokens")->capture_default_str();
  app->add_option("--clip-norm", c.clip_norm, "global gradient norm; <= 0 disables")->capture_default_str();
  app->add_option("--validation-fraction", c.validation_fraction)->capture_default_str();
  app->add_option("--mention-loss-weight", c.mention_loss_weight)->capture_default_str();
  app->add_option("--d-c", c.d_c, "compressed embedding width")->capture_default_str();
  app->add_option("--hidden", c.hidden, "fine scorer hidden width")->capture_default_str();
  app->add_option("--d-f", c.d_f, "distance embedding width")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coreference resolution with RST referential-distance features"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  cli::StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "mention length and paragraph count statistics");
  stats_cmd->add_option("corpus", stats.corpus, "directory of document JSON files")->required();
  stats_cmd->add_option("--cap", stats.cap, "length cap for the coverage figure")->capture_default_str();
  stats_cmd->add_flag("--json", stats.json, "print JSON instead of a table");
  stats_cmd->add_option("--out", stats.out, "also write the JSON report to this file");

  cli::SynthOptions synth;
  std::string synth_kind = "generic";
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus with trees and embeddings");
  synth_cmd->add_option("--out", synth.out)->required();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--docs", synth.n_docs)->capture_default_str();
  synth_cmd->add_option("--kind", synth_kind)->check(CLI::IsMember({"generic", "rhetorical"}))->capture_default_str();
  synth_cmd->add_option("--d-lm", synth.d_lm, "embedding width")->capture_default_str();
  synth_cmd->add_option("--embed-seed", synth.embed_seed)->capture_default_str();
  synth_cmd->add_option("--entities", synth.config.n_entities)->capture_default_str();
  synth_cmd->add_option("--mentions-per-entity", synth.config.mentions_per_entity)->capture_default_str();
  synth_cmd->add_option("--sentences-per-paragraph", synth.config.sentences_per_paragraph)->capture_default_str();
  synth_cmd->add_option("--pronoun-prob", synth.config.pronoun_prob)->capture_default_str();
  synth_cmd->add_option("--max-name-tokens", synth.config.max_name_tokens)->capture_default_str();
  synth_cmd->add_option("--min-filler", synth.config.min_filler)->capture_default_str();
  synth_cmd->add_option("--max-filler", synth.config.max_filler)->capture_default_str();
  synth_cmd->add_option("--name-pool", synth.config.name_pool)->capture_default_str();
  synth_cmd->add_option("--filler-vocab", synth.config.filler_vocab)->capture_default_str();
  synth_cmd->add_option("--paragraphs", synth.config.paragraphs)->capture_default_str();
  synth_cmd->add_option("--min-named-units", synth.config.min_named_units)->capture_default_str();
  synth_cmd->add_option("--max-named-units", synth.config.max_named_units)->capture_default_str();
  synth_cmd->add_option("--max-satellites", synth.config.max_satellites)->capture_default_str();

  cli::TrainOptions train;
  std::string train_features = "none";
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--corpus", train.corpus)->required();
  train_cmd->add_option("--embeddings", train.embeddings)->required();
  train_cmd->add_option("--trees", train.trees, "directory of RST JSON files");
  train_cmd->add_option("--dev-corpus", train.dev_corpus, "validation documents; default splits --corpus");
  train_cmd->add_option("--out", train.out)->required();
  train_cmd->add_option("--workers", train.workers, "threads for validation; 0 = all cores")->capture_default_str();
  add_train_flags(train_cmd, train.config, train_features);

  cli::PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "write predicted clusters per document");
  predict_cmd->add_option("--checkpoint", predict.checkpoint)->required();
  predict_cmd->add_option("--corpus", predict.corpus)->required();
  predict_cmd->add_option("--embeddings", predict.embeddings)->required();
  predict_cmd->add_option("--trees", predict.trees);
  predict_cmd->add_option("--out", predict.out)->required();
  predict_cmd->add_option("--workers", predict.workers, "0 = all cores")->capture_default_str();

  cli::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "LEA precision, recall and F1");
  eval_cmd->add_option("--key", eval.key, "gold documents or cluster files")->required();
  eval_cmd->add_option("--response", eval.response, "prediction files")->required();
  eval_cmd->add_flag("--json", eval.json);

  cli::ExportCheckOptions check;
  auto* check_cmd = app.add_subcommand("export-check", "validate an embedding store");
  check_cmd->add_option("store", check.store)->required();
  check_cmd->add_option("--corpus", check.corpus, "check alignment against these documents");
  check_cmd->add_option("--d-lm", check.d_lm, "expected embedding width");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stats_cmd) {
      cli::cmd_stats(stats, std::cout);
    } else if (*synth_cmd) {
      synth.config.kind = synth_kind == "generic" ? SynthKind::kGeneric : SynthKind::kRhetorical;
      cli::cmd_synth(synth, std::cout);
    } else if (*train_cmd) {
      train.config.features = FeatureSet::parse(train_features);
      cli::cmd_train(train, std::cout);
    } else if (*predict_cmd) {
      cli::cmd_predict(predict, std::cout);
    } else if (*eval_cmd) {
      cli::cmd_eval(eval, std::cout);
    } else if (*check_cmd) {
      if (!cli::cmd_export_check(check, std::cout).ok()) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
