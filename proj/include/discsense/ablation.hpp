#ifndef DISCSENSE_ABLATION_HPP_
#define DISCSENSE_ABLATION_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "discsense/model.hpp"
#include "discsense/scorer.hpp"

namespace discsense {

struct AblationRow {
  std::string label;  // "Distributed" or "+ <family>"
  FamilySet families;
  double dev_f1 = 0.0;
  double dev_loss = 0.0;
};

// Trains one model per prefix of `schedule`, starting from the distributed
// representation alone, and scores each on the dev split of the branch.
// Run i uses seed + i.
std::vector<AblationRow> FeatureAblation(const std::vector<Relation>& train,
                                         const std::vector<Relation>& dev,
                                         const std::vector<Family>& schedule,
                                         const TrainSpec& base,
                                         const Resources& res, std::uint64_t seed);

std::string AblationTable(const std::vector<AblationRow>& rows, Branch branch);

// Predicts every relation of the model's branch in `relations`.
std::vector<Prediction> PredictBranch(const Model& model,
                                      const std::vector<Relation>& relations,
                                      const Resources& res);

}  // namespace discsense

#endif  // DISCSENSE_ABLATION_HPP_
