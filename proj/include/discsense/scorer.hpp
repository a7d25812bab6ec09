#ifndef DISCSENSE_SCORER_HPP_
#define DISCSENSE_SCORER_HPP_

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "discsense/corpus.hpp"

namespace discsense {

struct Prediction {
  std::string doc_id;
  long rel_id = 0;
  std::string sense;
};

enum class Partition { kAll, kExplicit, kNonExplicit };
std::string_view PartitionName(Partition p);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct SenseScore {
  Prf prf;
  long true_positives = 0;
  long false_positives = 0;
  long false_negatives = 0;
  long support = 0;  // gold relations credited to this sense (tp + fn)
};

struct ScoreReport {
  Partition partition = Partition::kAll;
  Prf micro;
  long correct = 0;
  long predicted = 0;
  long gold = 0;
  std::map<std::string, SenseScore> per_sense;
};

// Harmonic mean; 0 when both are 0.
double F1(double precision, double recall);

// A prediction is correct iff its sense is among the gold senses. Missed gold
// relations count against recall. Senses listed in `inventory` appear in the
// per-sense table even when unattested. Throws on duplicate predictions or
// predictions for relations absent from `gold`.
ScoreReport Score(const std::vector<Prediction>& predictions,
                  const std::vector<Relation>& gold, Partition partition,
                  const std::vector<std::string>& inventory = {});

// Fixed-width table with 4-decimal values, senses in lexicographic order and
// "-" cells for senses without support.
std::string ReportTable(const ScoreReport& report);
// Inverse of ReportTable for the numeric cells ("-" cells parse as support 0).
ScoreReport ParseReportTable(const std::string& text);
std::string ReportJson(const std::vector<ScoreReport>& reports);

// One JSON object per line: {"DocID", "ID", "Sense"}. Sense is written as a
// one-element list; a bare string is accepted on input.
std::vector<Prediction> ReadPredictions(std::istream& in);
std::vector<Prediction> ReadPredictionsFile(const std::string& path);
void WritePredictions(const std::vector<Prediction>& predictions, std::ostream& out);

}  // namespace discsense

#endif  // DISCSENSE_SCORER_HPP_
