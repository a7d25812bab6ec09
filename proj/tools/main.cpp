#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using discsense::cli::RunConfig;

void AddShared(CLI::App* app, RunConfig& cfg) {
  app->add_option("--relations", cfg.relations, "relations file (JSON lines)");
  app->add_option("--parses", cfg.parses, "parses file for --relations");
  app->add_option("--embeddings", cfg.embeddings, "word2vec binary embeddings");
  app->add_option("--lexicon", cfg.lexicon, "sentiment lexicon (word<TAB>polarity)");
  app->add_option("--seed", cfg.seed, "random seed");
  app->add_option("--config", cfg.config, "settings file (key = value or JSON)");
  app->add_option("--out", cfg.out, "output file");
}

void AddTraining(CLI::App* app, RunConfig& cfg) {
  app->add_option("--dev-relations", cfg.dev_relations, "dev relations file");
  app->add_option("--dev-parses", cfg.dev_parses, "parses file for --dev-relations");
  app->add_option("--clusters", cfg.clusters, "word cluster file");
  app->add_option("--branch", cfg.branch, "explicit or nonexplicit");
  app->add_option("--set", cfg.overrides, "override a setting, key=value");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discourse sense classification"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* train = app.add_subcommand("train", "train one branch classifier");
  AddShared(train, cfg);
  AddTraining(train, cfg);
  train->add_option("--model", cfg.models, "model file to write")->required();
  train->add_option("--log", cfg.log, "per-epoch log (JSON lines)");

  auto* tune = app.add_subcommand("tune", "Bayesian hyperparameter search");
  AddShared(tune, cfg);
  AddTraining(tune, cfg);
  tune->add_option("--budget", cfg.budget, "number of trials");
  tune->add_option("--best-config", cfg.best_config, "best configuration (JSON)");

  auto* predict = app.add_subcommand("predict", "label relations with trained models");
  AddShared(predict, cfg);
  predict->add_option("--model", cfg.models, "model file, one per branch")->required();
  predict->add_option("--clusters", cfg.clusters, "word cluster file");

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold");
  AddShared(evaluate, cfg);
  evaluate->add_option("--predictions", cfg.predictions, "predictions file")->required();
  evaluate->add_flag("--json", cfg.json, "JSON instead of tables");

  auto* cluster = app.add_subcommand("cluster-embeddings", "k-means word clusters");
  AddShared(cluster, cfg);
  cluster->add_option("--k", cfg.k, "number of clusters");
  cluster->add_option("--set", cfg.overrides, "override a setting, key=value");

  auto* ablate = app.add_subcommand("ablate", "incremental feature ablation");
  AddShared(ablate, cfg);
  AddTraining(ablate, cfg);
  ablate->add_option("--schedule", cfg.schedule, "comma-separated feature families");
  ablate->add_flag("--json", cfg.json, "JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) {
      discsense::cli::CmdTrain(cfg);
    } else if (*tune) {
      discsense::cli::CmdTune(cfg);
    } else if (*predict) {
      discsense::cli::CmdPredict(cfg);
    } else if (*evaluate) {
      discsense::cli::CmdEvaluate(cfg);
    } else if (*cluster) {
      discsense::cli::CmdCluster(cfg);
    } else if (*ablate) {
      discsense::cli::CmdAblate(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
