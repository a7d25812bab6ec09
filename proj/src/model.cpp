#include "discsense/model.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "discsense/error.hpp"

namespace discsense {

namespace {

constexpr const char* kMagic = "discsense-model";
constexpr int kVersion = 1;

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ParseDouble(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw Error("model: bad number \"" + s + "\"");
  return v;
}

std::string ReadLine(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(std::string("model: unexpected end of file reading ") + what);
  }
  return line;
}

// "key rest..." → rest, checking the key.
std::string Expect(std::istream& in, const std::string& key) {
  const std::string line = ReadLine(in, key.c_str());
  if (line == key) return "";
  if (line.rfind(key + " ", 0) != 0) {
    throw Error("model: expected \"" + key + "\", got \"" + line + "\"");
  }
  return line.substr(key.size() + 1);
}

std::vector<std::string> Words(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

void WriteTensor(std::ostream& out, const TensorView& t) {
  out << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
  std::vector<char> buf(static_cast<std::size_t>(t.size()) * 8);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < t.rows; ++r) {
    for (Eigen::Index c = 0; c < t.cols; ++c) {
      const auto bits = std::bit_cast<std::uint64_t>(t.data[c * t.rows + r]);
      for (int b = 0; b < 8; ++b) buf[k++] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out << '\n';
}

Eigen::MatrixXd ReadTensorPayload(std::istream& in, Eigen::Index rows,
                                  Eigen::Index cols, const std::string& name) {
  Eigen::MatrixXd m(rows, cols);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows * cols) * 8);
  if (!in.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size()))) {
    throw Error("model: truncated payload for tensor " + name);
  }
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[k++]) << (8 * b);
      m(r, c) = std::bit_cast<double>(bits);
    }
  }
  if (in.get() != '\n') throw Error("model: missing terminator after " + name);
  return m;
}

EncoderParams TakeEncoder(std::map<std::string, Eigen::MatrixXd>& tensors,
                          const std::string& prefix) {
  EncoderParams enc;
  for (int l = 0;; ++l) {
    const std::string base = prefix + ".l" + std::to_string(l);
    if (!tensors.count(base + ".fwd.W")) break;
    BiLayer layer;
    for (int dir = 0; dir < 2; ++dir) {
      LstmParams& p = dir == 0 ? layer.forward : layer.backward;
      const std::string d = base + (dir == 0 ? ".fwd" : ".bwd");
      for (const char* part : {".W", ".U", ".b"}) {
        if (!tensors.count(d + part)) throw Error("model: missing tensor " + d + part);
      }
      p.w = std::move(tensors[d + ".W"]);
      p.u = std::move(tensors[d + ".U"]);
      p.b = tensors[d + ".b"].col(0);
      const Eigen::Index h = p.u.cols();
      if (p.u.rows() != 4 * h || p.w.rows() != 4 * h || p.b.size() != 4 * h) {
        throw Error("model: inconsistent LSTM shapes in " + d);
      }
    }
    enc.layers.push_back(std::move(layer));
  }
  if (enc.layers.empty()) throw Error("model: no encoder layers for " + prefix);
  return enc;
}

}  // namespace

void SaveModel(const Model& model, std::ostream& out) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "branch " << BranchName(model.branch) << '\n';
  out << "embedding_dim " << model.embedding_dim << '\n';
  out << "max_len " << model.max_len << '\n';
  out << "families";
  for (Family f : model.families) out << ' ' << FamilyName(f);
  out << '\n';
  out << "hyperparams";
  for (const auto& [k, v] : model.hyperparams.ToNamed()) {
    out << ' ' << k << '=' << FormatDouble(v);
  }
  out << '\n';
  out << "dropout " << FormatDouble(model.network.head.dropout1) << ' '
      << FormatDouble(model.network.head.dropout2) << '\n';
  out << "labels " << model.labels.size() << '\n';
  for (const auto& l : model.labels) out << l << '\n';
  out << "features " << model.vocab.size() << '\n';
  for (const auto& f : model.vocab.names()) out << f << '\n';
  Network net = model.network;
  const auto tensors = Tensors(net);
  out << "tensors " << tensors.size() << '\n';
  for (const TensorView& t : tensors) WriteTensor(out, t);
  out << "end\n";
}

Model LoadModel(std::istream& in) {
  const auto header = Words(ReadLine(in, "header"));
  if (header.size() != 2 || header[0] != kMagic) {
    throw Error("model: not a model file");
  }
  if (header[1] != std::to_string(kVersion)) {
    throw Error("model: unsupported version " + header[1]);
  }
  Model m;
  m.branch = ParseBranch(Expect(in, "branch"));
  m.embedding_dim = std::stoi(Expect(in, "embedding_dim"));
  m.max_len = std::stoi(Expect(in, "max_len"));
  for (const auto& f : Words(Expect(in, "families"))) m.families.insert(ParseFamily(f));
  for (const auto& kv : Words(Expect(in, "hyperparams"))) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("model: bad hyperparameter " + kv);
    m.hyperparams.SetNamed(kv.substr(0, eq), ParseDouble(kv.substr(eq + 1)));
  }
  const auto dropout = Words(Expect(in, "dropout"));
  if (dropout.size() != 2) throw Error("model: bad dropout line");

  const long n_labels = std::stol(Expect(in, "labels"));
  for (long i = 0; i < n_labels; ++i) m.labels.push_back(ReadLine(in, "labels"));
  const long n_features = std::stol(Expect(in, "features"));
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(std::max(0L, n_features)));
  for (long i = 0; i < n_features; ++i) names.push_back(ReadLine(in, "features"));
  m.vocab = FeatureVocab(std::move(names));

  const long n_tensors = std::stol(Expect(in, "tensors"));
  std::map<std::string, Eigen::MatrixXd> tensors;
  for (long i = 0; i < n_tensors; ++i) {
    const auto spec = Words(ReadLine(in, "tensor header"));
    if (spec.size() != 3) throw Error("model: bad tensor header");
    const long rows = std::stol(spec[1]);
    const long cols = std::stol(spec[2]);
    if (rows < 0 || cols < 0) throw Error("model: negative tensor shape");
    tensors[spec[0]] = ReadTensorPayload(in, rows, cols, spec[0]);
  }
  if (ReadLine(in, "trailer") != "end") throw Error("model: missing end marker");

  Network& net = m.network;
  net.arg1 = TakeEncoder(tensors, "arg1");
  net.arg2 = TakeEncoder(tensors, "arg2");
  for (const char* name : {"dense1.W", "dense1.b", "dense2.W", "dense2.b",
                           "out.W", "out.b"}) {
    if (!tensors.count(name)) throw Error(std::string("model: missing tensor ") + name);
  }
  net.head.w1 = std::move(tensors["dense1.W"]);
  net.head.b1 = tensors["dense1.b"].col(0);
  net.head.w2 = std::move(tensors["dense2.W"]);
  net.head.b2 = tensors["dense2.b"].col(0);
  net.head.wo = std::move(tensors["out.W"]);
  net.head.bo = tensors["out.b"].col(0);
  net.head.dropout1 = ParseDouble(dropout[0]);
  net.head.dropout2 = ParseDouble(dropout[1]);

  if (m.labels.empty()) throw Error("model: empty label set");
  if (net.num_labels() != static_cast<int>(m.labels.size())) {
    throw Error("model: output layer does not match label count");
  }
  if (net.feature_dim() != static_cast<int>(m.vocab.size())) {
    throw Error("model: dense1 input does not match feature vocabulary");
  }
  if (net.arg1.input_dim() != m.embedding_dim ||
      net.arg2.input_dim() != m.embedding_dim) {
    throw Error("model: encoder input does not match embedding dimension");
  }
  return m;
}

void SaveModelFile(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  SaveModel(model, out);
  if (!out) throw Error("error writing " + path);
}

Model LoadModelFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return LoadModel(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

SparseFeatureVector ExtractFeatures(const Relation& rel, Branch branch,
                                    const FamilySet& families,
                                    const Resources& res) {
  if (rel.branch() != branch) {
    throw Error("relation " + std::to_string(rel.rel_id) + ": wrong branch");
  }
  if (branch == Branch::kExplicit) {
    return ExplicitFeatures(rel, res.lexicon, families);
  }
  static const ClusterModel kNoClusters;
  const ClusterModel& clusters = res.clusters ? *res.clusters : kNoClusters;
  return NonExplicitFeatures(rel, clusters, res.parses, families);
}

Eigen::MatrixXd EmbedSequence(const std::vector<Token>& tokens,
                              const EmbeddingTable& table, int max_len,
                              bool keep_tail) {
  const std::size_t n = tokens.size();
  const std::size_t take =
      max_len > 0 ? std::min(n, static_cast<std::size_t>(max_len)) : n;
  const std::size_t start = keep_tail ? n - take : 0;
  Eigen::MatrixXd seq(table.dim(), static_cast<Eigen::Index>(take));
  for (std::size_t i = 0; i < take; ++i) {
    seq.col(static_cast<Eigen::Index>(i)) =
        table.Lookup(tokens[start + i].surface).cast<double>();
  }
  return seq;
}

std::vector<std::string> LabelInventory(const std::vector<Relation>& relations) {
  std::vector<std::string> labels;
  for (const Relation& r : relations) {
    if (!r.senses.empty()) labels.push_back(r.senses.front());
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

std::vector<Relation> SelectBranch(const std::vector<Relation>& relations,
                                   Branch branch) {
  std::vector<Relation> out;
  for (const Relation& r : relations) {
    if (r.branch() == branch) out.push_back(r);
  }
  return out;
}

namespace {

Instance BuildInstance(const Relation& rel, const SparseFeatureVector& features,
                       const FeatureVocab& vocab,
                       const std::vector<std::string>& labels, int max_len,
                       const EmbeddingTable& table) {
  ValidateRelation(rel);
  Instance x;
  x.arg1 = EmbedSequence(rel.arg1, table, max_len, /*keep_tail=*/true);
  x.arg2 = EmbedSequence(rel.arg2, table, max_len, /*keep_tail=*/false);
  x.features = ActiveIndices(features, vocab);
  if (!rel.senses.empty()) {
    auto it = std::lower_bound(labels.begin(), labels.end(), rel.senses.front());
    if (it != labels.end() && *it == rel.senses.front()) {
      x.gold = static_cast<int>(it - labels.begin());
    }
  }
  return x;
}

}  // namespace

Instance MakeInstance(const Relation& rel, const Model& model,
                      const Resources& res) {
  if (res.embeddings == nullptr) throw Error("embeddings required");
  if (res.embeddings->dim() != model.embedding_dim) {
    throw Error("embedding dimension " + std::to_string(res.embeddings->dim()) +
                " does not match model (" + std::to_string(model.embedding_dim) +
                ")");
  }
  return BuildInstance(rel, ExtractFeatures(rel, model.branch, model.families, res),
                       model.vocab, model.labels, model.max_len, *res.embeddings);
}

TrainedModel TrainModel(const std::vector<Relation>& train,
                        const std::vector<Relation>& dev, const TrainSpec& spec,
                        const Resources& res) {
  if (res.embeddings == nullptr) throw Error("embeddings required");
  const std::vector<Relation> train_b = SelectBranch(train, spec.branch);
  const std::vector<Relation> dev_b = SelectBranch(dev, spec.branch);
  if (train_b.empty()) {
    throw Error("no " + std::string(BranchName(spec.branch)) +
                " relations in the training data");
  }

  TrainedModel out;
  Model& m = out.model;
  m.branch = spec.branch;
  m.families = spec.families;
  m.max_len = spec.max_len;
  m.embedding_dim = res.embeddings->dim();
  m.hyperparams = spec.hyperparams;
  m.labels = LabelInventory(train_b);
  if (m.labels.empty()) throw Error("training relations carry no senses");

  std::vector<SparseFeatureVector> train_feats;
  train_feats.reserve(train_b.size());
  for (const Relation& r : train_b) {
    train_feats.push_back(ExtractFeatures(r, spec.branch, spec.families, res));
  }
  m.vocab = FitVocab(train_feats, spec.min_count);

  std::vector<Instance> train_x;
  train_x.reserve(train_b.size());
  for (std::size_t i = 0; i < train_b.size(); ++i) {
    train_x.push_back(BuildInstance(train_b[i], train_feats[i], m.vocab, m.labels,
                                    m.max_len, *res.embeddings));
  }
  std::vector<Instance> dev_x;
  dev_x.reserve(dev_b.size());
  for (const Relation& r : dev_b) dev_x.push_back(MakeInstance(r, m, res));

  const NetworkShape shape =
      ShapeFor(spec.hyperparams, spec.options.size_cap, m.embedding_dim,
               static_cast<int>(m.vocab.size()), static_cast<int>(m.labels.size()));
  out.result = Train(train_x, dev_x, shape, spec.hyperparams.learning_rate,
                     spec.options);
  m.network = out.result.network;
  return out;
}

std::string PredictSense(const Model& model, const Relation& rel,
                         const Resources& res) {
  const Eigen::VectorXd p = Predict(model.network, MakeInstance(rel, model, res));
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return model.labels[static_cast<std::size_t>(best)];
}

}  // namespace discsense
