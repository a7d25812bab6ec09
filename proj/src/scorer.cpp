#include "discsense/scorer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "discsense/error.hpp"

namespace discsense {

std::string_view PartitionName(Partition p) {
  switch (p) {
    case Partition::kAll: return "All";
    case Partition::kExplicit: return "Explicit";
    case Partition::kNonExplicit: return "NonExplicit";
  }
  return "";
}

namespace {

Partition ParsePartition(std::string_view name) {
  for (Partition p : {Partition::kAll, Partition::kExplicit, Partition::kNonExplicit}) {
    if (PartitionName(p) == name) return p;
  }
  throw Error("unknown partition \"" + std::string(name) + "\"");
}

bool InPartition(const Relation& r, Partition p) {
  switch (p) {
    case Partition::kAll: return true;
    case Partition::kExplicit: return r.branch() == Branch::kExplicit;
    case Partition::kNonExplicit: return r.branch() == Branch::kNonExplicit;
  }
  return false;
}

double Ratio(long num, long den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

using Key = std::pair<std::string, long>;

std::string KeyName(const Key& k) {
  return k.first + "#" + std::to_string(k.second);
}

}  // namespace

double F1(double precision, double recall) {
  // The harmonic mean of equal values is that value; the general formula can
  // be off by an ulp.
  if (precision == recall) return precision;
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

ScoreReport Score(const std::vector<Prediction>& predictions,
                  const std::vector<Relation>& gold, Partition partition,
                  const std::vector<std::string>& inventory) {
  std::map<Key, const Relation*> by_key;
  for (const Relation& r : gold) {
    if (!by_key.emplace(Key{r.doc_id, r.rel_id}, &r).second) {
      throw Error("duplicate gold relation " + KeyName({r.doc_id, r.rel_id}));
    }
  }
  std::map<Key, const Prediction*> predicted;
  for (const Prediction& p : predictions) {
    const Key key{p.doc_id, p.rel_id};
    if (!by_key.count(key)) {
      throw Error("prediction for unknown relation " + KeyName(key));
    }
    if (!predicted.emplace(key, &p).second) {
      throw Error("duplicate prediction for relation " + KeyName(key));
    }
  }

  ScoreReport report;
  report.partition = partition;
  for (const std::string& s : inventory) report.per_sense[s];
  for (const auto& [key, rel] : by_key) {
    if (!InPartition(*rel, partition)) continue;
    ++report.gold;
    for (const std::string& s : rel->senses) report.per_sense[s];
    auto it = predicted.find(key);
    if (it == predicted.end()) {
      for (const std::string& s : rel->senses) ++report.per_sense[s].false_negatives;
      continue;
    }
    ++report.predicted;
    const std::string& sense = it->second->sense;
    const bool correct =
        std::find(rel->senses.begin(), rel->senses.end(), sense) != rel->senses.end();
    if (correct) {
      ++report.correct;
      ++report.per_sense[sense].true_positives;
    } else {
      ++report.per_sense[sense].false_positives;
      for (const std::string& s : rel->senses) ++report.per_sense[s].false_negatives;
    }
  }
  report.micro.precision = Ratio(report.correct, report.predicted);
  report.micro.recall = Ratio(report.correct, report.gold);
  report.micro.f1 = F1(report.micro.precision, report.micro.recall);
  for (auto& [sense, s] : report.per_sense) {
    s.support = s.true_positives + s.false_negatives;
    s.prf.precision = Ratio(s.true_positives, s.true_positives + s.false_positives);
    s.prf.recall = Ratio(s.true_positives, s.support);
    s.prf.f1 = F1(s.prf.precision, s.prf.recall);
  }
  return report;
}

namespace {

constexpr const char* kMicroLabel = "Micro-Average";
constexpr int kNumWidth = 11;

std::string Cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string Pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string Row(const std::string& label, std::size_t label_width,
                const std::string& p, const std::string& r, const std::string& f,
                const std::string& support) {
  std::string line = Pad(label, label_width) + Pad(p, kNumWidth) +
                     Pad(r, kNumWidth) + Pad(f, kNumWidth) + support;
  return line + '\n';
}

}  // namespace

std::string ReportTable(const ScoreReport& report) {
  std::size_t width = std::string_view(kMicroLabel).size();
  for (const auto& [sense, s] : report.per_sense) width = std::max(width, sense.size());
  width += 2;

  std::string out = "Partition: " + std::string(PartitionName(report.partition)) + '\n';
  out += Row("Sense", width, "Precision", "Recall", "F1", "Support");
  out += std::string(width + 3 * kNumWidth + 7, '-') + '\n';
  out += Row(kMicroLabel, width, Cell(report.micro.precision),
             Cell(report.micro.recall), Cell(report.micro.f1),
             std::to_string(report.gold));
  for (const auto& [sense, s] : report.per_sense) {
    if (s.support == 0) {
      out += Row(sense, width, "-", "-", "-", "0");
    } else {
      out += Row(sense, width, Cell(s.prf.precision), Cell(s.prf.recall),
                 Cell(s.prf.f1), std::to_string(s.support));
    }
  }
  return out;
}

ScoreReport ParseReportTable(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  ScoreReport report;
  if (!std::getline(in, line) || line.rfind("Partition: ", 0) != 0) {
    throw Error("report: missing partition line");
  }
  report.partition = ParsePartition(line.substr(11));
  std::getline(in, line);  // column header
  std::getline(in, line);  // rule
  auto number = [](const std::string& s) { return s == "-" ? 0.0 : std::stod(s); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> cells;
    std::string w;
    while (ls >> w) cells.push_back(w);
    if (cells.size() != 5) throw Error("report: malformed row \"" + line + "\"");
    Prf prf{number(cells[1]), number(cells[2]), number(cells[3])};
    const long support = std::stol(cells[4]);
    if (cells[0] == kMicroLabel) {
      report.micro = prf;
      report.gold = support;
    } else {
      SenseScore& s = report.per_sense[cells[0]];
      s.prf = prf;
      s.support = support;
    }
  }
  return report;
}

std::string ReportJson(const std::vector<ScoreReport>& reports) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const ScoreReport& r : reports) {
    nlohmann::ordered_json j;
    j["partition"] = PartitionName(r.partition);
    j["micro"] = {{"precision", r.micro.precision},
                  {"recall", r.micro.recall},
                  {"f1", r.micro.f1}};
    j["correct"] = r.correct;
    j["predicted"] = r.predicted;
    j["gold"] = r.gold;
    nlohmann::ordered_json senses = nlohmann::ordered_json::object();
    for (const auto& [sense, s] : r.per_sense) {
      senses[sense] = {{"precision", s.prf.precision},
                       {"recall", s.prf.recall},
                       {"f1", s.prf.f1},
                       {"support", s.support}};
    }
    j["per_sense"] = std::move(senses);
    out.push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

std::vector<Prediction> ReadPredictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Prediction p;
      p.doc_id = j.at("DocID").get<std::string>();
      const auto& id = j.at("ID");
      p.rel_id = id.is_string() ? std::stol(id.get<std::string>()) : id.get<long>();
      const auto& sense = j.at("Sense");
      if (sense.is_array()) {
        if (sense.empty()) throw Error("empty Sense list");
        p.sense = sense[0].get<std::string>();
      } else {
        p.sense = sense.get<std::string>();
      }
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw Error("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Prediction> ReadPredictionsFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return ReadPredictions(in);
}

void WritePredictions(const std::vector<Prediction>& predictions, std::ostream& out) {
  for (const Prediction& p : predictions) {
    nlohmann::ordered_json j;
    j["DocID"] = p.doc_id;
    j["ID"] = p.rel_id;
    j["Sense"] = nlohmann::ordered_json::array({p.sense});
    out << j.dump() << '\n';
  }
}

}  // namespace discsense
