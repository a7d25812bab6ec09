#include "discsense/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "discsense/error.hpp"

namespace discsense {

using nlohmann::json;

RelType ParseRelType(std::string_view name) {
  if (name == "Explicit") return RelType::kExplicit;
  if (name == "Implicit") return RelType::kImplicit;
  if (name == "EntRel") return RelType::kEntRel;
  if (name == "AltLex" || name == "AltLexC") return RelType::kAltLex;
  throw Error("unknown relation type \"" + std::string(name) + "\"");
}

std::string_view RelTypeName(RelType type) {
  switch (type) {
    case RelType::kExplicit: return "Explicit";
    case RelType::kImplicit: return "Implicit";
    case RelType::kEntRel: return "EntRel";
    case RelType::kAltLex: return "AltLex";
  }
  return "";
}

Branch BranchOf(RelType type) {
  return type == RelType::kExplicit ? Branch::kExplicit : Branch::kNonExplicit;
}

Branch ParseBranch(std::string_view name) {
  if (name == "explicit") return Branch::kExplicit;
  if (name == "nonexplicit" || name == "non-explicit") {
    return Branch::kNonExplicit;
  }
  throw Error("unknown branch \"" + std::string(name) +
              "\" (expected explicit or nonexplicit)");
}

std::string_view BranchName(Branch branch) {
  return branch == Branch::kExplicit ? "explicit" : "nonexplicit";
}

namespace {

std::vector<std::string> SplitWhitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
      ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// Token layout: [charBegin, charEnd, docTokenOffset, sentOffset,
// sentTokenOffset]. Surfaces are recovered from RawText: whitespace split
// when the counts agree, else character offsets relative to the first token.
// Otherwise they stay empty until AttachParses fills them.
std::vector<Token> ReadSpan(const json& span) {
  std::vector<Token> tokens;
  if (!span.is_object() || !span.contains("TokenList")) return tokens;
  const json& list = span.at("TokenList");
  if (!list.is_array()) throw Error("TokenList is not an array");
  const std::string raw = span.value("RawText", std::string());

  std::vector<std::pair<long, long>> offsets;
  for (const json& t : list) {
    Token tok;
    if (!t.is_array() || t.size() < 5) {
      throw Error("TokenList element must be a 5-integer array");
    }
    tok.sent_index = t[3].get<int>();
    tok.tok_index = t[4].get<int>();
    if (tok.sent_index < 0 || tok.tok_index < 0) {
      throw Error("negative sentence or token offset");
    }
    offsets.emplace_back(t[0].get<long>(), t[1].get<long>());
    tokens.push_back(std::move(tok));
  }
  if (tokens.empty()) return tokens;

  std::vector<std::string> words = SplitWhitespace(raw);
  if (words.size() == tokens.size()) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      tokens[i].surface = std::move(words[i]);
    }
    return tokens;
  }
  const long base = offsets.front().first;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const long b = offsets[i].first - base;
    const long e = offsets[i].second - base;
    if (b < 0 || e <= b || e > static_cast<long>(raw.size())) {
      for (Token& t : tokens) t.surface.clear();
      return tokens;
    }
    tokens[i].surface = raw.substr(b, e - b);
  }
  return tokens;
}

Relation ReadRelationObject(const json& obj) {
  Relation rel;
  rel.doc_id = obj.at("DocID").get<std::string>();
  const json& id = obj.at("ID");
  rel.rel_id = id.is_string() ? std::stol(id.get<std::string>()) : id.get<long>();
  rel.type = ParseRelType(obj.at("Type").get<std::string>());
  rel.arg1 = ReadSpan(obj.at("Arg1"));
  rel.arg2 = ReadSpan(obj.at("Arg2"));
  if (obj.contains("Connective")) {
    const json& conn = obj.at("Connective");
    rel.connective = ReadSpan(conn);
    if (conn.is_object()) {
      rel.connective_text = conn.value("RawText", std::string());
    }
  }
  if (obj.contains("Sense")) {
    for (const json& s : obj.at("Sense")) {
      rel.senses.push_back(s.get<std::string>());
    }
  }
  if (rel.arg1.empty() || rel.arg2.empty()) {
    throw Error("relation " + std::to_string(rel.rel_id) +
                ": empty argument span");
  }
  if (rel.type == RelType::kExplicit && rel.connective.empty()) {
    throw Error("relation " + std::to_string(rel.rel_id) +
                ": explicit relation without connective tokens");
  }
  return rel;
}

std::ifstream OpenOrThrow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace

std::vector<Relation> ReadRelations(std::istream& in) {
  std::vector<Relation> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": malformed JSON (" +
                  e.what() + ")");
    }
    try {
      out.push_back(ReadRelationObject(obj));
    } catch (const json::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Relation> ReadRelationsFile(const std::string& path) {
  std::ifstream in = OpenOrThrow(path);
  try {
    return ReadRelations(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Bracketed trees.

namespace {

class PtbReader {
 public:
  explicit PtbReader(std::string_view text) : text_(text) {}

  ParseTree ReadTree() {
    SkipSpace();
    ParseTree tree = ReadNode();
    SkipSpace();
    if (pos_ != text_.size()) Fail("trailing characters");
    return tree;
  }

 private:
  [[noreturn]] void Fail(const std::string& what) const {
    throw Error("bracketed tree: " + what + " at offset " +
                std::to_string(pos_));
  }

  void SkipSpace() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  std::string ReadSymbol() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  ParseTree ReadNode() {
    if (pos_ >= text_.size()) Fail("unexpected end of input");
    if (text_[pos_] != '(') Fail("expected '('");
    ++pos_;
    SkipSpace();
    ParseTree node;
    node.label = ReadSymbol();
    for (;;) {
      SkipSpace();
      if (pos_ >= text_.size()) Fail("unexpected end of input");
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      if (text_[pos_] == '(') {
        node.children.push_back(ReadNode());
      } else {
        ParseTree leaf;
        leaf.label = ReadSymbol();
        node.children.push_back(std::move(leaf));
      }
    }
    if (node.children.empty()) Fail("node without children");
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void PrintInto(const ParseTree& tree, std::string& out) {
  if (tree.is_leaf()) {
    out += tree.label;
    return;
  }
  out += '(';
  out += tree.label;
  for (const ParseTree& child : tree.children) {
    out += ' ';
    PrintInto(child, out);
  }
  out += ')';
}

void CollectLeaves(const ParseTree& tree, std::vector<std::string>& out) {
  if (tree.is_leaf()) {
    out.push_back(tree.label);
    return;
  }
  for (const ParseTree& c : tree.children) CollectLeaves(c, out);
}

void CollectTagged(const ParseTree& tree,
                   std::vector<std::pair<std::string, std::string>>& out) {
  if (tree.is_preterminal()) {
    out.emplace_back(tree.children[0].label, tree.label);
    return;
  }
  for (const ParseTree& c : tree.children) CollectTagged(c, out);
}

void CollectRules(const ParseTree& tree, std::set<std::string>& out) {
  if (tree.is_leaf() || tree.is_preterminal()) return;
  std::string rule = tree.label + "→";
  bool first = true;
  for (const ParseTree& c : tree.children) {
    if (c.is_leaf()) continue;  // mixed leaf/constituent nodes keep labels only
    if (!first) rule += ' ';
    rule += c.label;
    first = false;
  }
  out.insert(std::move(rule));
  for (const ParseTree& c : tree.children) CollectRules(c, out);
}

// Returns the number of leaves under `tree`; sets *best to the deepest node
// whose span [start, start+n) contains [lo, hi].
int FindCovering(const ParseTree& tree, int start, int lo, int hi,
                 const ParseTree** best) {
  if (tree.is_leaf()) return 1;
  int n = 0;
  for (const ParseTree& c : tree.children) {
    n += FindCovering(c, start + n, lo, hi, best);
  }
  if (start <= lo && hi < start + n && *best == nullptr) *best = &tree;
  return n;
}

}  // namespace

ParseTree ParsePtb(std::string_view text) { return PtbReader(text).ReadTree(); }

std::string PrintPtb(const ParseTree& tree) {
  std::string out;
  PrintInto(tree, out);
  return out;
}

std::vector<std::string> Leaves(const ParseTree& tree) {
  std::vector<std::string> out;
  CollectLeaves(tree, out);
  return out;
}

std::vector<std::pair<std::string, std::string>> TaggedLeaves(
    const ParseTree& tree) {
  std::vector<std::pair<std::string, std::string>> out;
  CollectTagged(tree, out);
  return out;
}

std::set<std::string> ProductionRules(const ParseTree& tree) {
  std::set<std::string> out;
  CollectRules(tree, out);
  return out;
}

const ParseTree* MinimalCoveringSubtree(const ParseTree& tree,
                                        const std::vector<int>& leaf_indices) {
  if (leaf_indices.empty()) return nullptr;
  const auto [lo, hi] =
      std::minmax_element(leaf_indices.begin(), leaf_indices.end());
  if (*lo < 0) return nullptr;
  const ParseTree* best = nullptr;
  const int n = FindCovering(tree, 0, *lo, *hi, &best);
  if (*hi >= n) return nullptr;
  return best;
}

// ---------------------------------------------------------------------------
// Parses file.

const SentenceParse* ParseIndex::Sentence(const std::string& doc_id,
                                          int sent) const {
  auto it = docs.find(doc_id);
  if (it == docs.end() || sent < 0 ||
      sent >= static_cast<int>(it->second.size()))
    return nullptr;
  return &it->second[sent];
}

namespace {

bool IsEmptyParseMarker(std::string_view s) {
  std::string compact;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
  }
  return compact.empty() || compact == "(())" || compact == "()";
}

// Shared-task trees wrap the sentence in an unlabeled root: "( (S ...) )".
ParseTree StripEmptyRoot(ParseTree tree) {
  while (tree.label.empty() && tree.children.size() == 1 &&
         !tree.children[0].is_leaf()) {
    ParseTree child = std::move(tree.children[0]);
    tree = std::move(child);
  }
  return tree;
}

}  // namespace

ParseIndex ReadParses(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(std::string("parses: malformed JSON (") + e.what() + ")");
  }
  if (!doc.is_object()) throw Error("parses: top level must be an object");

  ParseIndex index;
  for (const auto& [doc_id, body] : doc.items()) {
    std::vector<SentenceParse> sentences;
    const json& sents = body.at("sentences");
    for (std::size_t s = 0; s < sents.size(); ++s) {
      const json& sj = sents[s];
      SentenceParse sp;
      const std::string tree_text = sj.value("parsetree", std::string());
      if (!IsEmptyParseMarker(tree_text)) {
        try {
          sp.tree = StripEmptyRoot(ParsePtb(tree_text));
        } catch (const Error& e) {
          throw Error("parses: doc " + doc_id + " sentence " +
                      std::to_string(s) + ": " + e.what());
        }
      }
      if (sj.contains("words")) {
        for (const json& w : sj.at("words")) {
          std::string surface;
          std::string pos;
          if (w.is_array() && !w.empty()) {
            surface = w[0].get<std::string>();
            if (w.size() > 1 && w[1].is_object() &&
                w[1].contains("PartOfSpeech")) {
              pos = w[1].at("PartOfSpeech").get<std::string>();
            }
          } else if (w.is_string()) {
            surface = w.get<std::string>();
          }
          if (pos.empty()) ++index.missing_pos;
          sp.words.emplace_back(std::move(surface), std::move(pos));
        }
      } else if (sp.tree) {
        sp.words = TaggedLeaves(*sp.tree);
      }
      sentences.push_back(std::move(sp));
    }
    index.docs.emplace(doc_id, std::move(sentences));
  }
  return index;
}

ParseIndex ReadParsesFile(const std::string& path) {
  std::ifstream in = OpenOrThrow(path);
  try {
    return ReadParses(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::size_t AttachParses(std::vector<Relation>& relations,
                         const ParseIndex& parses) {
  std::size_t misses = 0;
  auto attach = [&](const std::string& doc, std::vector<Token>& span) {
    for (Token& tok : span) {
      const SentenceParse* sent = parses.Sentence(doc, tok.sent_index);
      if (sent == nullptr ||
          tok.tok_index >= static_cast<int>(sent->words.size())) {
        tok.pos.clear();
        ++misses;
        continue;
      }
      const auto& [surface, pos] = sent->words[tok.tok_index];
      if (tok.surface.empty()) tok.surface = surface;
      tok.pos = pos;
      if (pos.empty()) ++misses;
    }
  };
  for (Relation& rel : relations) {
    attach(rel.doc_id, rel.arg1);
    attach(rel.doc_id, rel.arg2);
    attach(rel.doc_id, rel.connective);
  }
  return misses;
}

std::set<std::string> ArgumentProductionRules(const std::vector<Token>& arg,
                                              const std::string& doc_id,
                                              const ParseIndex& parses) {
  std::map<int, std::vector<int>> by_sentence;
  for (const Token& t : arg) by_sentence[t.sent_index].push_back(t.tok_index);

  std::set<std::string> rules;
  for (const auto& [sent, indices] : by_sentence) {
    const SentenceParse* sp = parses.Sentence(doc_id, sent);
    if (sp == nullptr || !sp->tree) continue;
    const ParseTree* sub = MinimalCoveringSubtree(*sp->tree, indices);
    if (sub == nullptr) continue;
    rules.merge(ProductionRules(*sub));
  }
  return rules;
}

void ValidateRelation(const Relation& rel) {
  const std::string where = "relation " + std::to_string(rel.rel_id);
  if (rel.arg1.empty() || rel.arg2.empty()) {
    throw Error(where + ": empty argument span");
  }
  if (rel.type == RelType::kExplicit && rel.connective.empty()) {
    throw Error(where + ": explicit relation without connective tokens");
  }
  for (const auto* span : {&rel.arg1, &rel.arg2, &rel.connective}) {
    for (const Token& t : *span) {
      if (t.surface.empty()) {
        throw Error(where +
                    ": token surface unavailable (supply a parses file)");
      }
    }
  }
}

}  // namespace discsense
