#ifndef DISCSENSE_EMBEDDINGS_HPP_
#define DISCSENSE_EMBEDDINGS_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace discsense {

using FloatMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Word vectors in word2vec binary layout. Rows of `vectors` follow `words`.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> words, FloatMatrix vectors);

  int dim() const { return static_cast<int>(vectors_.cols()); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  const FloatMatrix& vectors() const { return vectors_; }

  // -1 when absent.
  int IndexOf(std::string_view word) const;

  // Exact match, then lowercase match, then the OOV vector (zeros).
  Eigen::VectorXf Lookup(std::string_view word) const;
  bool Contains(std::string_view word) const;

 private:
  std::vector<std::string> words_;
  FloatMatrix vectors_;
  std::unordered_map<std::string, int> index_;
};

// "<vocab_size> <dim>\n" followed by, per entry, the word, one space and
// `dim` little-endian float32 values, optionally followed by '\n'.
EmbeddingTable LoadBinary(std::istream& in);
EmbeddingTable LoadBinaryFile(const std::string& path);
// Canonical form: no trailing newline after entries.
void WriteBinary(const EmbeddingTable& table, std::ostream& out);

struct ClusterModel {
  int k = 0;
  int dim = 0;
  Eigen::MatrixXd centroids;  // k x dim
  std::unordered_map<std::string, int> assignment;

  // Cluster id in [0, k) for clustered words, k for everything else.
  int ClusterOf(std::string_view word) const;
};

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  std::vector<double> sse_trace;  // SSE after each assignment step
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Rows of `points` are the data.
// Empty clusters are re-seeded from the point farthest from its centroid.
KMeansResult KMeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int max_iters = 100);

double SumSquaredError(const Eigen::MatrixXd& points,
                       const Eigen::MatrixXd& centroids,
                       const std::vector<int>& labels);

// Clusters the given words (those present in the table) into k groups.
ClusterModel ClusterVocabulary(const EmbeddingTable& table,
                               const std::vector<std::string>& words, int k,
                               std::uint64_t seed, int max_iters = 100);

// Text format: "k dim" header then "word<TAB>cluster_id" lines sorted by word.
void WriteClusterModel(const ClusterModel& model, std::ostream& out);
ClusterModel ReadClusterModel(std::istream& in);
ClusterModel ReadClusterModelFile(const std::string& path);

}  // namespace discsense

#endif  // DISCSENSE_EMBEDDINGS_HPP_
