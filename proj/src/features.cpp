#include "discsense/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "discsense/error.hpp"

namespace discsense {

namespace {

struct FamilyEntry {
  Family family;
  std::string_view name;
};

constexpr FamilyEntry kFamilies[] = {
    {Family::kConnective, "connective"},
    {Family::kSentiment, "sentiment"},
    {Family::kArg1Last3, "arg1-last3"},
    {Family::kArg2First3, "arg2-first3"},
    {Family::kWordPairs, "word-pairs"},
    {Family::kPosPairs, "pos-pairs"},
    {Family::kRulePairs, "production-rules"},
    {Family::kAdverbPairs, "adverbs"},
    {Family::kInquirer, "inquirer"},
};

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string Join(const std::vector<std::string>& parts, std::size_t begin,
                 std::size_t end, char sep) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += sep;
    out += parts[i];
  }
  return out;
}

int Sign(double x) { return (x > 0.0) - (x < 0.0); }

bool IsAdverbTag(std::string_view tag) {
  return tag == "RB" || tag == "RBR" || tag == "RBS";
}

void AddTrigrams(const Relation& rel, const FamilySet& families,
                 SparseFeatureVector& out) {
  if (families.count(Family::kArg1Last3)) {
    const auto words = Surfaces(rel.arg1);
    const std::size_t n = words.size();
    out["tri1=" + Join(words, n >= 3 ? n - 3 : 0, n, '_')] = 1.0;
  }
  if (families.count(Family::kArg2First3)) {
    const auto words = Surfaces(rel.arg2);
    out["tri2=" + Join(words, 0, std::min<std::size_t>(3, words.size()), '_')] =
        1.0;
  }
}

template <typename A, typename B>
void AddPairs(std::string_view prefix, const A& left, const B& right,
              SparseFeatureVector& out) {
  for (const auto& l : left) {
    for (const auto& r : right) {
      std::ostringstream name;
      name << prefix << l << '|' << r;
      out[name.str()] = 1.0;
    }
  }
}

}  // namespace

Family ParseFamily(std::string_view name) {
  for (const auto& e : kFamilies) {
    if (e.name == name) return e.family;
  }
  throw Error("unknown feature family \"" + std::string(name) + "\"");
}

std::string_view FamilyName(Family family) {
  for (const auto& e : kFamilies) {
    if (e.family == family) return e.name;
  }
  return "";
}

FamilySet AllFamilies(Branch branch) {
  if (branch == Branch::kExplicit) {
    return {Family::kConnective, Family::kSentiment, Family::kArg1Last3,
            Family::kArg2First3};
  }
  return {Family::kArg1Last3, Family::kArg2First3, Family::kWordPairs,
          Family::kPosPairs,  Family::kRulePairs,  Family::kAdverbPairs};
}

std::vector<Family> DefaultSchedule(Branch branch) {
  if (branch == Branch::kExplicit) {
    return {Family::kConnective, Family::kSentiment, Family::kArg2First3,
            Family::kArg1Last3};
  }
  return {Family::kArg2First3,   Family::kArg1Last3, Family::kWordPairs,
          Family::kPosPairs,     Family::kAdverbPairs, Family::kInquirer,
          Family::kRulePairs};
}

SentimentLexicon ReadLexicon(std::istream& in) {
  SentimentLexicon lex;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string where = "lexicon line " + std::to_string(line_no);
    if (tab == std::string::npos) throw Error(where + ": expected word<TAB>polarity");
    double value = 0.0;
    try {
      value = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw Error(where + ": bad polarity");
    }
    if (!std::isfinite(value) || value < -1.0 || value > 1.0) {
      throw Error(where + ": polarity outside [-1, 1]");
    }
    lex.polarity[Lower(line.substr(0, tab))] = value;
  }
  return lex;
}

SentimentLexicon ReadLexiconFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return ReadLexicon(in);
}

double SentimentScore(const std::vector<std::string>& tokens,
                      const SentimentLexicon& lex) {
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(Lower(t));
  auto is_negator = [](const std::string& w) {
    return w == "not" || w == "never" || w == "no" || w == "n't";
  };
  double score = 0.0;
  for (std::size_t i = 0; i < lowered.size(); ++i) {
    auto it = lex.polarity.find(lowered[i]);
    if (it == lex.polarity.end()) continue;
    bool negated = (i >= 1 && is_negator(lowered[i - 1])) ||
                   (i >= 2 && is_negator(lowered[i - 2]));
    score += negated ? -it->second : it->second;
  }
  return score;
}

std::vector<std::string> Surfaces(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.surface);
  return out;
}

SparseFeatureVector ExplicitFeatures(const Relation& rel,
                                     const SentimentLexicon& lex,
                                     const FamilySet& families) {
  if (rel.branch() != Branch::kExplicit) {
    throw Error("relation " + std::to_string(rel.rel_id) +
                ": wrong branch for explicit features");
  }
  SparseFeatureVector out;
  if (families.count(Family::kConnective)) {
    std::string text = rel.connective_text;
    if (text.empty()) text = Join(Surfaces(rel.connective), 0, rel.connective.size(), ' ');
    text = Lower(text);
    std::replace(text.begin(), text.end(), ' ', '_');
    out["conn=" + text] = 1.0;
  }
  if (families.count(Family::kSentiment)) {
    const int s1 = Sign(SentimentScore(Surfaces(rel.arg1), lex));
    const int s2 = Sign(SentimentScore(Surfaces(rel.arg2), lex));
    out[s1 == s2 ? "sent=same" : "sent=diff"] = 1.0;
  }
  AddTrigrams(rel, families, out);
  return out;
}

SparseFeatureVector NonExplicitFeatures(const Relation& rel,
                                        const ClusterModel& clusters,
                                        const ParseIndex* parses,
                                        const FamilySet& families) {
  if (rel.branch() != Branch::kNonExplicit) {
    throw Error("relation " + std::to_string(rel.rel_id) +
                ": wrong branch for non-explicit features");
  }
  SparseFeatureVector out;
  AddTrigrams(rel, families, out);

  if (families.count(Family::kWordPairs)) {
    std::set<int> c1;
    std::set<int> c2;
    for (const Token& t : rel.arg1) c1.insert(clusters.ClusterOf(t.surface));
    for (const Token& t : rel.arg2) c2.insert(clusters.ClusterOf(t.surface));
    AddPairs("wp=", c1, c2, out);
  }
  if (families.count(Family::kPosPairs)) {
    std::set<std::string> p1;
    std::set<std::string> p2;
    for (const Token& t : rel.arg1) {
      if (!t.pos.empty()) p1.insert(t.pos);
    }
    for (const Token& t : rel.arg2) {
      if (!t.pos.empty()) p2.insert(t.pos);
    }
    AddPairs("pp=", p1, p2, out);
  }
  if (families.count(Family::kRulePairs) && parses != nullptr) {
    AddPairs("pr=", ArgumentProductionRules(rel.arg1, rel.doc_id, *parses),
             ArgumentProductionRules(rel.arg2, rel.doc_id, *parses), out);
  }
  if (families.count(Family::kAdverbPairs)) {
    std::set<std::string> a1;
    std::set<std::string> a2;
    for (const Token& t : rel.arg1) {
      if (IsAdverbTag(t.pos)) a1.insert(Lower(t.surface));
    }
    for (const Token& t : rel.arg2) {
      if (IsAdverbTag(t.pos)) a2.insert(Lower(t.surface));
    }
    if (!a1.empty() || !a2.empty()) {
      if (a1.empty()) a1.insert("NONE");
      if (a2.empty()) a2.insert("NONE");
      AddPairs("adv=", a1, a2, out);
    }
  }
  return out;
}

FeatureVocab::FeatureVocab(std::vector<std::string> names)
    : names_(std::move(names)) {
  index_.reserve(names_.size());
  for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
    if (names_[i].find('\n') != std::string::npos) {
      throw Error("feature name contains a newline");
    }
    if (!index_.emplace(names_[i], i).second) {
      throw Error("duplicate feature \"" + names_[i] + "\"");
    }
  }
}

int FeatureVocab::IndexOf(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

FeatureVocab FitVocab(const std::vector<SparseFeatureVector>& vectors,
                      int min_count) {
  std::map<std::string, int> counts;
  for (const auto& v : vectors) {
    for (const auto& [name, value] : v) ++counts[name];
  }
  std::vector<std::string> kept;
  for (const auto& [name, n] : counts) {
    if (n >= min_count && name.find('\n') == std::string::npos) {
      kept.push_back(name);
    }
  }
  return FeatureVocab(std::move(kept));
}

std::vector<int> ActiveIndices(const SparseFeatureVector& v,
                               const FeatureVocab& vocab) {
  std::vector<int> out;
  for (const auto& [name, value] : v) {
    const int idx = vocab.IndexOf(name);
    if (idx >= 0 && value != 0.0) out.push_back(idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> Vectorize(const SparseFeatureVector& v,
                              const FeatureVocab& vocab) {
  std::vector<double> out(vocab.size(), 0.0);
  for (int idx : ActiveIndices(v, vocab)) out[idx] = 1.0;
  return out;
}

}  // namespace discsense
