#ifndef DISCSENSE_CORPUS_HPP_
#define DISCSENSE_CORPUS_HPP_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace discsense {

struct Token {
  std::string surface;
  std::string pos;  // Penn Treebank tag, empty when unknown
  int sent_index = 0;
  int tok_index = 0;
};

enum class RelType { kExplicit, kImplicit, kEntRel, kAltLex };

// Explicit relations go to the explicit classifier, everything else to the
// non-explicit one.
enum class Branch { kExplicit, kNonExplicit };

RelType ParseRelType(std::string_view name);
std::string_view RelTypeName(RelType type);
Branch BranchOf(RelType type);
Branch ParseBranch(std::string_view name);
std::string_view BranchName(Branch branch);

struct Relation {
  std::string doc_id;
  long rel_id = 0;
  std::vector<Token> arg1;
  std::vector<Token> arg2;
  std::vector<Token> connective;
  std::string connective_text;
  RelType type = RelType::kImplicit;
  std::vector<std::string> senses;  // gold; empty at predict time

  Branch branch() const { return BranchOf(type); }
};

// Reads one JSON relation per line. Blank lines are skipped. Errors name the
// 1-based line number or the offending relation ID.
std::vector<Relation> ReadRelations(std::istream& in);
std::vector<Relation> ReadRelationsFile(const std::string& path);

// Constituency tree. Leaves carry the word in `label` and have no children.
struct ParseTree {
  std::string label;
  std::vector<ParseTree> children;

  bool is_leaf() const { return children.empty(); }
  bool is_preterminal() const {
    return children.size() == 1 && children[0].is_leaf();
  }
  friend bool operator==(const ParseTree&, const ParseTree&) = default;
};

// Parses a bracketed tree such as "(NP (DT the) (NN cat))". Throws Error with
// the character offset on malformed input.
ParseTree ParsePtb(std::string_view text);
// Inverse of ParsePtb, single-spaced.
std::string PrintPtb(const ParseTree& tree);

std::vector<std::string> Leaves(const ParseTree& tree);
// (word, tag) pairs read off preterminals, in order.
std::vector<std::pair<std::string, std::string>> TaggedLeaves(
    const ParseTree& tree);

// "LHS→RHS1 RHS2 ..." for every internal node that is not a preterminal.
std::set<std::string> ProductionRules(const ParseTree& tree);

// Lowest node whose leaf span covers every index in `leaf_indices`.
// Returns nullptr when `leaf_indices` is empty or out of range.
const ParseTree* MinimalCoveringSubtree(const ParseTree& tree,
                                        const std::vector<int>& leaf_indices);

struct SentenceParse {
  std::optional<ParseTree> tree;  // empty for the "(())" marker
  std::vector<std::pair<std::string, std::string>> words;  // (surface, pos)
};

struct ParseIndex {
  std::map<std::string, std::vector<SentenceParse>> docs;
  std::size_t missing_pos = 0;  // words with no POS tag in the input

  const SentenceParse* Sentence(const std::string& doc_id, int sent) const;
};

// Reads a parses document keyed by DocID. Each doc holds "sentences", each
// with "parsetree" and optionally "words" ([surface, {PartOfSpeech: ...}]).
ParseIndex ReadParses(std::istream& in);
ParseIndex ReadParsesFile(const std::string& path);

// Fills token POS (and missing surfaces) from the parses. Lookups that miss
// leave pos empty and are counted in the return value.
std::size_t AttachParses(std::vector<Relation>& relations,
                         const ParseIndex& parses);

// Production rules for one argument: per sentence touched by the argument,
// the rules of the minimal subtree covering its tokens.
std::set<std::string> ArgumentProductionRules(const std::vector<Token>& arg,
                                              const std::string& doc_id,
                                              const ParseIndex& parses);

// Throws if a relation violates the model invariants (empty spans, empty
// surfaces, explicit without connective).
void ValidateRelation(const Relation& rel);

}  // namespace discsense

#endif  // DISCSENSE_CORPUS_HPP_
