#ifndef DISCSENSE_TOOLS_COMMANDS_HPP_
#define DISCSENSE_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "discsense/features.hpp"
#include "discsense/trainer.hpp"

namespace discsense::cli {

// Everything a subcommand may consume. Paths left empty are "not given".
struct RunConfig {
  std::string relations;      // training (or input / gold) relations
  std::string dev_relations;
  std::string parses;
  std::string dev_parses;
  std::string embeddings;
  std::string clusters;
  std::string lexicon;
  std::vector<std::string> models;
  std::string predictions;
  std::string config;         // flat key=value file or JSON object
  std::string out;
  std::string log;
  std::string best_config;
  std::string branch;
  std::string schedule;       // comma-separated feature families
  std::optional<std::uint64_t> seed;
  std::optional<int> budget;
  std::optional<int> k;
  std::vector<std::string> overrides;  // key=value, applied after --config
  bool json = false;
};

// Resolved training settings: config file, then overrides, then flags.
struct Settings {
  Hyperparams hyperparams;
  TrainOptions options;
  int max_len = 80;
  int min_count = 2;
  int budget = 20;
  int k = 1000;
  std::optional<FamilySet> families;
};

// Parses "key = value" lines ('#' comments) or a JSON object of named values.
std::map<std::string, std::string> ReadConfigFile(const std::string& path);
Settings ResolveSettings(const RunConfig& cfg);

void CmdTrain(const RunConfig& cfg);
void CmdTune(const RunConfig& cfg);
void CmdPredict(const RunConfig& cfg);
// Returns the rendered report (also written to --out when given).
std::string CmdEvaluate(const RunConfig& cfg);
void CmdCluster(const RunConfig& cfg);
void CmdAblate(const RunConfig& cfg);

}  // namespace discsense::cli

#endif  // DISCSENSE_TOOLS_COMMANDS_HPP_
