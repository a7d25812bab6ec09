#include "discsense/ablation.hpp"

#include <algorithm>
#include <cstdio>

namespace discsense {

std::vector<Prediction> PredictBranch(const Model& model,
                                      const std::vector<Relation>& relations,
                                      const Resources& res) {
  std::vector<Prediction> out;
  for (const Relation& r : relations) {
    if (r.branch() != model.branch) continue;
    out.push_back({r.doc_id, r.rel_id, PredictSense(model, r, res)});
  }
  return out;
}

std::vector<AblationRow> FeatureAblation(const std::vector<Relation>& train,
                                         const std::vector<Relation>& dev,
                                         const std::vector<Family>& schedule,
                                         const TrainSpec& base,
                                         const Resources& res,
                                         std::uint64_t seed) {
  const Partition partition = base.branch == Branch::kExplicit
                                  ? Partition::kExplicit
                                  : Partition::kNonExplicit;
  const std::vector<Relation> dev_branch = SelectBranch(dev, base.branch);
  std::vector<AblationRow> rows;
  FamilySet active;
  for (std::size_t i = 0; i <= schedule.size(); ++i) {
    AblationRow row;
    if (i == 0) {
      row.label = "Distributed";
    } else {
      active.insert(schedule[i - 1]);
      row.label = "+ " + std::string(FamilyName(schedule[i - 1]));
    }
    row.families = active;
    TrainSpec spec = base;
    spec.families = active;
    spec.options.seed = seed + i;
    const TrainedModel trained = TrainModel(train, dev, spec, res);
    row.dev_loss = trained.result.best_dev_loss;
    const auto predictions = PredictBranch(trained.model, dev_branch, res);
    row.dev_f1 = Score(predictions, dev_branch, partition).micro.f1;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string AblationTable(const std::vector<AblationRow>& rows, Branch branch) {
  std::size_t width = 12;
  for (const auto& r : rows) width = std::max(width, r.label.size() + 2);
  std::string out = branch == Branch::kExplicit ? "Explicit\n" : "Non-Explicit\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.4f", r.dev_f1);
    out += r.label + std::string(width - r.label.size(), ' ') + buf + '\n';
  }
  return out;
}

}  // namespace discsense
