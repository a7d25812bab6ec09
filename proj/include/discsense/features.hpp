#ifndef DISCSENSE_FEATURES_HPP_
#define DISCSENSE_FEATURES_HPP_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "discsense/corpus.hpp"
#include "discsense/embeddings.hpp"

namespace discsense {

// Named features; every surface feature here is binary so values are 1.0.
using SparseFeatureVector = std::map<std::string, double>;

// Feature families, usable as ablation schedule entries.
enum class Family {
  kConnective,   // conn=
  kSentiment,    // sent=
  kArg1Last3,    // tri1=
  kArg2First3,   // tri2=
  kWordPairs,    // wp=
  kPosPairs,     // pp=
  kRulePairs,    // pr=
  kAdverbPairs,  // adv=
  kInquirer,     // accepted in schedules, contributes no features
};

Family ParseFamily(std::string_view name);
std::string_view FamilyName(Family family);
using FamilySet = std::set<Family>;

// Every family that applies to a branch.
FamilySet AllFamilies(Branch branch);
// Incremental ablation schedules (prefixes are trained in order).
std::vector<Family> DefaultSchedule(Branch branch);

struct SentimentLexicon {
  std::unordered_map<std::string, double> polarity;
};

// "word<TAB>polarity" per line; polarities must lie in [-1, 1].
SentimentLexicon ReadLexicon(std::istream& in);
SentimentLexicon ReadLexiconFile(const std::string& path);

// Sum of polarities of lowercased tokens. A negator (not, never, no, n't) in
// either of the two preceding positions flips a token's polarity.
double SentimentScore(const std::vector<std::string>& tokens,
                      const SentimentLexicon& lex);

std::vector<std::string> Surfaces(const std::vector<Token>& tokens);

SparseFeatureVector ExplicitFeatures(const Relation& rel,
                                     const SentimentLexicon& lex,
                                     const FamilySet& families);
inline SparseFeatureVector ExplicitFeatures(const Relation& rel,
                                            const SentimentLexicon& lex) {
  return ExplicitFeatures(rel, lex, AllFamilies(Branch::kExplicit));
}

// `parses` may be null, in which case production-rule pairs are skipped;
// POS pairs use the tags already attached to the tokens.
SparseFeatureVector NonExplicitFeatures(const Relation& rel,
                                        const ClusterModel& clusters,
                                        const ParseIndex* parses,
                                        const FamilySet& families);
inline SparseFeatureVector NonExplicitFeatures(const Relation& rel,
                                               const ClusterModel& clusters,
                                               const ParseIndex* parses) {
  return NonExplicitFeatures(rel, clusters, parses,
                             AllFamilies(Branch::kNonExplicit));
}

class FeatureVocab {
 public:
  FeatureVocab() = default;
  // Names must be unique; columns follow the given order.
  explicit FeatureVocab(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  // -1 for unknown features.
  int IndexOf(const std::string& name) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

// Keeps features seen in at least `min_count` vectors, in lexicographic order.
FeatureVocab FitVocab(const std::vector<SparseFeatureVector>& vectors,
                      int min_count = 2);

// Column indices of the known features, ascending.
std::vector<int> ActiveIndices(const SparseFeatureVector& v,
                               const FeatureVocab& vocab);
std::vector<double> Vectorize(const SparseFeatureVector& v,
                              const FeatureVocab& vocab);

}  // namespace discsense

#endif  // DISCSENSE_FEATURES_HPP_
