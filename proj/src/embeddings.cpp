#include "discsense/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "discsense/error.hpp"

namespace discsense {

EmbeddingTable::EmbeddingTable(std::vector<std::string> words,
                               FloatMatrix vectors)
    : words_(std::move(words)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(words_.size()) != vectors_.rows()) {
    throw Error("embedding table: word count does not match vector rows");
  }
  index_.reserve(words_.size());
  for (int i = 0; i < static_cast<int>(words_.size()); ++i) {
    if (!index_.emplace(words_[i], i).second) {
      throw Error("embedding table: duplicate word \"" + words_[i] + "\"");
    }
  }
}

int EmbeddingTable::IndexOf(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : it->second;
}

bool EmbeddingTable::Contains(std::string_view word) const {
  return IndexOf(word) >= 0;
}

Eigen::VectorXf EmbeddingTable::Lookup(std::string_view word) const {
  int idx = IndexOf(word);
  if (idx < 0) {
    std::string lower(word);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    idx = IndexOf(lower);
  }
  if (idx < 0) return Eigen::VectorXf::Zero(dim());
  return vectors_.row(idx).transpose();
}

namespace {

float DecodeFloatLE(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

void EncodeFloatLE(float v, char* p) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) p[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
}

}  // namespace

EmbeddingTable LoadBinary(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error("embeddings: missing header");
  std::istringstream hs(header);
  long long vocab_size = 0;
  long long dim = 0;
  if (!(hs >> vocab_size >> dim)) {
    throw Error("embeddings: malformed header \"" + header + "\"");
  }
  if (vocab_size <= 0 || dim <= 0) {
    throw Error("embeddings: header values must be positive");
  }

  std::vector<std::string> words;
  std::vector<float> data;
  words.reserve(static_cast<std::size_t>(vocab_size));
  data.reserve(static_cast<std::size_t>(vocab_size * dim));
  std::unordered_map<std::string, int> seen;
  std::vector<unsigned char> buf(static_cast<std::size_t>(dim) * 4);

  for (long long e = 0; e < vocab_size; ++e) {
    const std::string truncated =
        "embeddings: truncated at entry " + std::to_string(e);
    std::string word;
    int c = in.get();
    // Tolerate the newline terminating the previous entry.
    while (c == '\n') c = in.get();
    while (c != std::char_traits<char>::eof() && c != ' ') {
      word.push_back(static_cast<char>(c));
      c = in.get();
    }
    if (c == std::char_traits<char>::eof()) throw Error(truncated);
    if (!in.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size()))) {
      throw Error(truncated);
    }
    if (word.empty()) {
      throw Error("embeddings: empty word at entry " + std::to_string(e));
    }
    if (!seen.emplace(word, static_cast<int>(words.size())).second) continue;
    words.push_back(std::move(word));
    for (long long j = 0; j < dim; ++j) {
      data.push_back(DecodeFloatLE(buf.data() + 4 * j));
    }
  }
  if (in.peek() == '\n') in.get();

  FloatMatrix vectors(static_cast<Eigen::Index>(words.size()),
                      static_cast<Eigen::Index>(dim));
  std::copy(data.begin(), data.end(), vectors.data());
  return EmbeddingTable(std::move(words), std::move(vectors));
}

EmbeddingTable LoadBinaryFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return LoadBinary(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

void WriteBinary(const EmbeddingTable& table, std::ostream& out) {
  out << table.size() << ' ' << table.dim() << '\n';
  std::vector<char> buf(static_cast<std::size_t>(table.dim()) * 4);
  for (int i = 0; i < table.size(); ++i) {
    out << table.words()[i] << ' ';
    for (int j = 0; j < table.dim(); ++j) {
      EncodeFloatLE(table.vectors()(i, j), buf.data() + 4 * j);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

// ---------------------------------------------------------------------------

int ClusterModel::ClusterOf(std::string_view word) const {
  auto it = assignment.find(std::string(word));
  return it == assignment.end() ? k : it->second;
}

double SumSquaredError(const Eigen::MatrixXd& points,
                       const Eigen::MatrixXd& centroids,
                       const std::vector<int>& labels) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sse += (points.row(i) - centroids.row(labels[i])).squaredNorm();
  }
  return sse;
}

namespace {

// Nearest centroid, ties to the lower index.
int Nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x,
            double* dist2) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (x - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2 != nullptr) *dist2 = best_d;
  return best;
}

Eigen::MatrixXd SeedPlusPlus(const Eigen::MatrixXd& points, int k,
                             std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = points.row(first(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      pick = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;  // rounding may exhaust r; keep the last eligible point
        r -= d2[i];
        if (r < 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    centroids.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

}  // namespace

KMeansResult KMeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int max_iters) {
  const Eigen::Index n = points.rows();
  if (k <= 0) throw Error("kmeans: k must be positive");
  if (k > n) {
    throw Error("kmeans: k = " + std::to_string(k) + " exceeds point count " +
                std::to_string(n));
  }
  if (!points.allFinite()) throw Error("kmeans: non-finite input vector");

  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centroids = SeedPlusPlus(points, k, rng);
  result.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n));

  for (int iter = 0; iter < std::max(1, max_iters); ++iter) {
    bool changed = false;
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = Nearest(result.centroids, points.row(i), &dist[i]);
      if (c != result.labels[i]) changed = true;
      result.labels[i] = c;
      sse += dist[i];
    }
    result.sse_trace.push_back(sse);
    result.iterations = iter + 1;
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(result.labels[i]) += points.row(i);
      ++counts[result.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) result.centroids.row(c) = sums.row(c) / counts[c];
    }
    // Re-seed empty clusters from the point currently farthest from its
    // centroid; that point then moves to the new cluster.
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d =
            (points.row(i) - result.centroids.row(result.labels[i]))
                .squaredNorm();
        if (d > far_d && counts[result.labels[i]] > 1) {
          far_d = d;
          far = i;
        }
      }
      --counts[result.labels[far]];
      result.labels[far] = c;
      counts[c] = 1;
      result.centroids.row(c) = points.row(far);
    }
  }
  return result;
}

ClusterModel ClusterVocabulary(const EmbeddingTable& table,
                               const std::vector<std::string>& words, int k,
                               std::uint64_t seed, int max_iters) {
  std::vector<std::string> present;
  for (const std::string& w : words) {
    if (table.Contains(w)) present.push_back(w);
  }
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  if (k > static_cast<int>(present.size())) {
    throw Error("cluster: k = " + std::to_string(k) +
                " exceeds vocabulary size " + std::to_string(present.size()));
  }
  Eigen::MatrixXd points(static_cast<Eigen::Index>(present.size()), table.dim());
  for (std::size_t i = 0; i < present.size(); ++i) {
    points.row(static_cast<Eigen::Index>(i)) =
        table.vectors().row(table.IndexOf(present[i])).cast<double>();
  }
  KMeansResult km = KMeans(points, k, seed, max_iters);
  ClusterModel model;
  model.k = k;
  model.dim = table.dim();
  model.centroids = std::move(km.centroids);
  for (std::size_t i = 0; i < present.size(); ++i) {
    model.assignment.emplace(present[i], km.labels[i]);
  }
  return model;
}

void WriteClusterModel(const ClusterModel& model, std::ostream& out) {
  std::vector<std::pair<std::string, int>> rows(model.assignment.begin(),
                                                model.assignment.end());
  std::sort(rows.begin(), rows.end());
  out << model.k << ' ' << model.dim << '\n';
  for (const auto& [word, id] : rows) out << word << '\t' << id << '\n';
}

ClusterModel ReadClusterModel(std::istream& in) {
  ClusterModel model;
  std::string line;
  if (!std::getline(in, line)) throw Error("clusters: missing header");
  std::istringstream hs(line);
  if (!(hs >> model.k >> model.dim) || model.k <= 0) {
    throw Error("clusters: malformed header \"" + line + "\"");
  }
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw Error("clusters: line " + std::to_string(line_no) +
                  ": expected word<TAB>id");
    }
    const int id = std::stoi(line.substr(tab + 1));
    if (id < 0 || id >= model.k) {
      throw Error("clusters: line " + std::to_string(line_no) +
                  ": cluster id out of range");
    }
    model.assignment[line.substr(0, tab)] = id;
  }
  return model;
}

ClusterModel ReadClusterModelFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return ReadClusterModel(in);
}

}  // namespace discsense
