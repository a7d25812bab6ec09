#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "discsense/ablation.hpp"
#include "discsense/corpus.hpp"
#include "discsense/embeddings.hpp"
#include "discsense/error.hpp"
#include "discsense/hyperopt.hpp"
#include "discsense/model.hpp"
#include "discsense/scorer.hpp"

namespace discsense::cli {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitCommas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double ToNumber(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw Error("config: " + key + " expects a number, got \"" + value + "\"");
  }
  return v;
}

int ToInt(const std::string& key, const std::string& value) {
  const double v = ToNumber(key, value);
  if (v != static_cast<double>(static_cast<long long>(v))) {
    throw Error("config: " + key + " expects an integer");
  }
  return static_cast<int>(v);
}

void Apply(Settings& s, const std::string& key, const std::string& value) {
  if (Hyperparams::IsName(key)) {
    s.hyperparams.SetNamed(key, ToNumber(key, value));
  } else if (key == "batch_size") {
    s.options.batch_size = ToInt(key, value);
  } else if (key == "patience") {
    s.options.patience = ToInt(key, value);
  } else if (key == "max_epochs") {
    s.options.max_epochs = ToInt(key, value);
  } else if (key == "size_cap") {
    s.options.size_cap = ToInt(key, value);
  } else if (key == "seed") {
    s.options.seed = static_cast<std::uint64_t>(ToNumber(key, value));
  } else if (key == "max_len") {
    s.max_len = ToInt(key, value);
  } else if (key == "min_count") {
    s.min_count = ToInt(key, value);
  } else if (key == "budget") {
    s.budget = ToInt(key, value);
  } else if (key == "k") {
    s.k = ToInt(key, value);
  } else if (key == "families") {
    FamilySet f;
    for (const auto& name : SplitCommas(value)) f.insert(ParseFamily(name));
    s.families = f;
  } else {
    throw Error("config: unknown key \"" + key + "\"");
  }
}

void Require(const std::string& path, const std::string& what) {
  if (path.empty()) throw Error(what + " required");
  if (!std::filesystem::exists(path)) throw Error(what + " not found: " + path);
}

Branch RequireBranch(const RunConfig& cfg) {
  if (cfg.branch.empty()) throw Error("--branch required (explicit or nonexplicit)");
  return ParseBranch(cfg.branch);
}

// Loaded inputs kept alive for the duration of a command.
struct Inputs {
  std::unique_ptr<EmbeddingTable> embeddings;
  std::unique_ptr<ClusterModel> clusters;
  std::unique_ptr<ParseIndex> parses;
  std::unique_ptr<ParseIndex> dev_parses;
  SentimentLexicon lexicon;

  Resources For(const ParseIndex* p) const {
    Resources r;
    r.embeddings = embeddings.get();
    r.clusters = clusters.get();
    r.parses = p;
    r.lexicon = lexicon;
    return r;
  }
};

Inputs LoadInputs(const RunConfig& cfg, bool need_nonexplicit) {
  Inputs in;
  Require(cfg.embeddings, "embeddings");
  in.embeddings = std::make_unique<EmbeddingTable>(LoadBinaryFile(cfg.embeddings));
  if (need_nonexplicit) {
    Require(cfg.parses, "parses");
    Require(cfg.clusters, "clusters");
  }
  if (!cfg.clusters.empty()) {
    Require(cfg.clusters, "clusters");
    in.clusters = std::make_unique<ClusterModel>(ReadClusterModelFile(cfg.clusters));
  }
  if (!cfg.parses.empty()) {
    Require(cfg.parses, "parses");
    in.parses = std::make_unique<ParseIndex>(ReadParsesFile(cfg.parses));
  }
  if (!cfg.dev_parses.empty()) {
    Require(cfg.dev_parses, "dev parses");
    in.dev_parses = std::make_unique<ParseIndex>(ReadParsesFile(cfg.dev_parses));
  }
  if (!cfg.lexicon.empty()) {
    Require(cfg.lexicon, "lexicon");
    in.lexicon = ReadLexiconFile(cfg.lexicon);
  }
  return in;
}

std::vector<Relation> LoadRelations(const std::string& path, const ParseIndex* parses,
                                    const std::string& what) {
  Require(path, what);
  std::vector<Relation> rels = ReadRelationsFile(path);
  if (parses != nullptr) {
    const std::size_t misses = AttachParses(rels, *parses);
    if (misses > 0) {
      std::cerr << "warning: " << misses << " tokens in " << path
                << " have no POS tag\n";
    }
  }
  return rels;
}

struct Splits {
  std::vector<Relation> train;
  std::vector<Relation> dev;
};

Splits LoadSplits(const RunConfig& cfg, const Inputs& in) {
  Splits s;
  s.train = LoadRelations(cfg.relations, in.parses.get(), "training relations");
  Require(cfg.dev_relations, "dev relations");
  const ParseIndex* dev_p = in.dev_parses ? in.dev_parses.get() : in.parses.get();
  s.dev = LoadRelations(cfg.dev_relations, dev_p, "dev relations");
  return s;
}

TrainSpec MakeSpec(const Settings& s, Branch branch) {
  TrainSpec spec;
  spec.branch = branch;
  spec.families = s.families.value_or(AllFamilies(branch));
  spec.hyperparams = s.hyperparams;
  spec.options = s.options;
  spec.max_len = s.max_len;
  spec.min_count = s.min_count;
  return spec;
}

void CheckBounds(const Hyperparams& hp) {
  const SearchSpace space = SearchSpace::ClassifierSpace();
  const NamedConfig named = hp.ToNamed();
  if (!space.Contains(named)) {
    std::string msg = "hyperparameters outside the search space:";
    for (const Dimension& d : space.dims()) {
      const double v = named.at(d.name);
      if (v < d.lower || v > d.upper) msg += " " + d.name;
    }
    throw Error(msg);
  }
}

// Sentence lookups are keyed by document, so one merged index serves both
// the training and the dev split.
Resources TrainingResources(const Inputs& in, ParseIndex& merged) {
  if (!in.dev_parses) return in.For(in.parses.get());
  merged = in.parses ? *in.parses : ParseIndex{};
  for (const auto& [doc, sents] : in.dev_parses->docs) merged.docs[doc] = sents;
  return in.For(&merged);
}

std::ofstream OpenOut(const std::string& path) {
  if (path.empty()) throw Error("--out required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

}  // namespace

std::map<std::string, std::string> ReadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::map<std::string, std::string> out;
  const std::string trimmed = Trim(text);
  if (!trimmed.empty() && trimmed.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(trimmed);
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ": " + e.what());
    }
    for (const auto& [k, v] : j.items()) {
      if (v.is_string()) {
        out[k] = v.get<std::string>();
      } else {
        std::ostringstream s;
        s.precision(17);
        s << v.get<double>();
        out[k] = s.str();
      }
    }
    return out;
  }
  std::istringstream lines(text);
  std::string line;
  long line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  return out;
}

Settings ResolveSettings(const RunConfig& cfg) {
  Settings s;
  if (!cfg.config.empty()) {
    for (const auto& [k, v] : ReadConfigFile(cfg.config)) Apply(s, k, v);
  }
  for (const std::string& kv : cfg.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got " + kv);
    Apply(s, Trim(kv.substr(0, eq)), Trim(kv.substr(eq + 1)));
  }
  if (cfg.seed) s.options.seed = *cfg.seed;
  if (cfg.budget) s.budget = *cfg.budget;
  if (cfg.k) s.k = *cfg.k;
  return s;
}

void CmdTrain(const RunConfig& cfg) {
  const Branch branch = RequireBranch(cfg);
  const Settings settings = ResolveSettings(cfg);
  CheckBounds(settings.hyperparams);
  if (cfg.models.size() != 1) throw Error("train writes exactly one --model");
  const Inputs in = LoadInputs(cfg, branch == Branch::kNonExplicit);
  const Splits splits = LoadSplits(cfg, in);

  ParseIndex merged;
  const Resources res = TrainingResources(in, merged);
  const TrainedModel trained =
      TrainModel(splits.train, splits.dev, MakeSpec(settings, branch), res);
  SaveModelFile(trained.model, cfg.models.front());

  const std::string log_path =
      cfg.log.empty() ? cfg.models.front() + ".log.jsonl" : cfg.log;
  std::ofstream log(log_path);
  if (!log) throw Error("cannot write " + log_path);
  for (const EpochLog& e : trained.result.trace) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["dev_loss"] = e.dev_loss;
    j["best"] = e.epoch == trained.result.best_epoch;
    log << j.dump() << '\n';
  }
}

void CmdTune(const RunConfig& cfg) {
  const Branch branch = RequireBranch(cfg);
  const Settings settings = ResolveSettings(cfg);
  if (settings.budget < 1) throw Error("budget must be at least 1");
  const Inputs in = LoadInputs(cfg, branch == Branch::kNonExplicit);
  const Splits splits = LoadSplits(cfg, in);

  ParseIndex merged;
  const Resources res = TrainingResources(in, merged);

  const SearchSpace space = SearchSpace::ClassifierSpace();
  int trial_index = 0;
  auto objective = [&](const NamedConfig& config) {
    TrainSpec spec = MakeSpec(settings, branch);
    for (const auto& [k, v] : config) spec.hyperparams.SetNamed(k, v);
    spec.options.seed = settings.options.seed + static_cast<std::uint64_t>(trial_index++);
    return TrainModel(splits.train, splits.dev, spec, res).result.best_dev_loss;
  };

  std::ofstream trace_out = OpenOut(cfg.out);
  const SearchResult result =
      RunSearch(objective, space, settings.budget, settings.options.seed, {},
                [&trace_out](const TraceEntry& e) {
                  WriteTrace({e}, trace_out);
                  trace_out.flush();
                });
  const std::string best_path =
      cfg.best_config.empty() ? cfg.out + ".best.json" : cfg.best_config;
  std::ofstream best(best_path);
  if (!best) throw Error("cannot write " + best_path);
  WriteNamedConfig(result.best().config, best);
}

void CmdPredict(const RunConfig& cfg) {
  if (cfg.models.empty()) throw Error("at least one --model required");
  std::map<Branch, Model> models;
  for (const std::string& path : cfg.models) {
    Require(path, "model");
    Model m = LoadModelFile(path);
    const Branch b = m.branch;
    if (!models.emplace(b, std::move(m)).second) {
      throw Error("two models given for branch " + std::string(BranchName(b)));
    }
  }
  const Inputs in = LoadInputs(cfg, models.count(Branch::kNonExplicit) > 0);
  const std::vector<Relation> rels =
      LoadRelations(cfg.relations, in.parses.get(), "input relations");

  std::set<Branch> missing;
  for (const Relation& r : rels) {
    if (!models.count(r.branch())) missing.insert(r.branch());
  }
  if (!missing.empty()) {
    std::string msg = "no model loaded for branch:";
    for (Branch b : missing) msg += " " + std::string(BranchName(b));
    throw Error(msg);
  }
  const Resources res = in.For(in.parses.get());
  std::vector<Prediction> predictions;
  predictions.reserve(rels.size());
  for (const Relation& r : rels) {
    predictions.push_back({r.doc_id, r.rel_id, PredictSense(models.at(r.branch()), r, res)});
  }
  std::ofstream out = OpenOut(cfg.out);
  WritePredictions(predictions, out);
}

std::string CmdEvaluate(const RunConfig& cfg) {
  Require(cfg.predictions, "predictions");
  Require(cfg.relations, "gold relations");
  const std::vector<Relation> gold = ReadRelationsFile(cfg.relations);
  const std::vector<Prediction> preds = ReadPredictionsFile(cfg.predictions);
  std::vector<ScoreReport> reports;
  for (Partition p : {Partition::kAll, Partition::kExplicit, Partition::kNonExplicit}) {
    reports.push_back(Score(preds, gold, p));
  }
  std::string text;
  if (cfg.json) {
    text = ReportJson(reports);
  } else {
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (i > 0) text += '\n';
      text += ReportTable(reports[i]);
    }
  }
  if (!cfg.out.empty()) {
    std::ofstream out = OpenOut(cfg.out);
    out << text;
  } else {
    std::cout << text;
  }
  return text;
}

void CmdCluster(const RunConfig& cfg) {
  const Settings settings = ResolveSettings(cfg);
  Require(cfg.embeddings, "embeddings");
  const EmbeddingTable table = LoadBinaryFile(cfg.embeddings);
  std::vector<std::string> vocab;
  if (cfg.relations.empty()) {
    vocab = table.words();
  } else {
    std::unique_ptr<ParseIndex> parses;
    if (!cfg.parses.empty()) {
      Require(cfg.parses, "parses");
      parses = std::make_unique<ParseIndex>(ReadParsesFile(cfg.parses));
    }
    for (const Relation& r : LoadRelations(cfg.relations, parses.get(), "relations")) {
      for (const auto* span : {&r.arg1, &r.arg2, &r.connective}) {
        for (const Token& t : *span) {
          if (!t.surface.empty()) vocab.push_back(t.surface);
        }
      }
    }
  }
  const ClusterModel model =
      ClusterVocabulary(table, vocab, settings.k, settings.options.seed);
  std::ofstream out = OpenOut(cfg.out);
  WriteClusterModel(model, out);
}

void CmdAblate(const RunConfig& cfg) {
  const Branch branch = RequireBranch(cfg);
  const Settings settings = ResolveSettings(cfg);
  CheckBounds(settings.hyperparams);
  const Inputs in = LoadInputs(cfg, branch == Branch::kNonExplicit);
  const Splits splits = LoadSplits(cfg, in);
  ParseIndex merged;
  const Resources res = TrainingResources(in, merged);
  std::vector<Family> schedule;
  if (cfg.schedule.empty()) {
    schedule = DefaultSchedule(branch);
  } else {
    for (const auto& name : SplitCommas(cfg.schedule)) schedule.push_back(ParseFamily(name));
  }
  const auto rows = FeatureAblation(splits.train, splits.dev, schedule,
                                    MakeSpec(settings, branch), res,
                                    settings.options.seed);
  std::ofstream out = OpenOut(cfg.out);
  if (cfg.json) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      j.push_back({{"features", r.label}, {"dev_f1", r.dev_f1}, {"dev_loss", r.dev_loss}});
    }
    out << j.dump(2) << '\n';
  } else {
    out << AblationTable(rows, branch);
  }
}

}  // namespace discsense::cli
