#ifndef DISCSENSE_MODEL_HPP_
#define DISCSENSE_MODEL_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "discsense/corpus.hpp"
#include "discsense/embeddings.hpp"
#include "discsense/features.hpp"
#include "discsense/nn.hpp"
#include "discsense/trainer.hpp"

namespace discsense {

// A trained branch classifier plus everything needed to featurize input.
struct Model {
  Branch branch = Branch::kExplicit;
  std::vector<std::string> labels;  // sorted, unique
  FeatureVocab vocab;
  FamilySet families;
  int max_len = 80;
  int embedding_dim = 0;
  Hyperparams hyperparams;
  Network network;
};

// Versioned text header (labels, feature names, tensor shapes) with
// row-major little-endian float64 payloads. Save → load → save is
// byte-identical.
void SaveModel(const Model& model, std::ostream& out);
Model LoadModel(std::istream& in);
void SaveModelFile(const Model& model, const std::string& path);
Model LoadModelFile(const std::string& path);

// Inputs the feature extractors need beyond the relation itself.
struct Resources {
  const EmbeddingTable* embeddings = nullptr;
  const ClusterModel* clusters = nullptr;
  const ParseIndex* parses = nullptr;
  SentimentLexicon lexicon;
};

SparseFeatureVector ExtractFeatures(const Relation& rel, Branch branch,
                                    const FamilySet& families,
                                    const Resources& res);

// Embeds tokens column-wise, truncated to max_len. keep_tail keeps the last
// max_len tokens (arg1), otherwise the first (arg2).
Eigen::MatrixXd EmbedSequence(const std::vector<Token>& tokens,
                              const EmbeddingTable& table, int max_len,
                              bool keep_tail);

// Sorted unique first-listed senses.
std::vector<std::string> LabelInventory(const std::vector<Relation>& relations);

// Relations routed to `branch`.
std::vector<Relation> SelectBranch(const std::vector<Relation>& relations,
                                   Branch branch);

Instance MakeInstance(const Relation& rel, const Model& model,
                      const Resources& res);

struct TrainSpec {
  Branch branch = Branch::kExplicit;
  FamilySet families;
  Hyperparams hyperparams;
  TrainOptions options;
  int max_len = 80;
  int min_count = 2;
};

struct TrainedModel {
  Model model;
  TrainResult result;
};

// Filters both splits to the branch, fits labels and feature vocabulary on the
// training split, and trains.
TrainedModel TrainModel(const std::vector<Relation>& train,
                        const std::vector<Relation>& dev, const TrainSpec& spec,
                        const Resources& res);

std::string PredictSense(const Model& model, const Relation& rel,
                         const Resources& res);

}  // namespace discsense

#endif  // DISCSENSE_MODEL_HPP_
