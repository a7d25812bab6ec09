#ifndef DISCSENSE_HYPEROPT_HPP_
#define DISCSENSE_HYPEROPT_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace discsense {

using NamedConfig = std::map<std::string, double>;

enum class DimKind { kInteger, kReal };

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  DimKind kind = DimKind::kReal;
};

// Box-constrained search space. Points are handled internally in the unit
// hypercube; integer dimensions decode with half-up rounding.
class SearchSpace {
 public:
  explicit SearchSpace(std::vector<Dimension> dims);

  // lstm1..lstm6, dense1, dense2, dropout1, dropout2, lr.
  static SearchSpace ClassifierSpace();

  int size() const { return static_cast<int>(dims_.size()); }
  const std::vector<Dimension>& dims() const { return dims_; }

  NamedConfig Decode(const Eigen::VectorXd& unit) const;
  Eigen::VectorXd Encode(const NamedConfig& config) const;
  // Encode(Decode(u)): moves integer dimensions onto their grid.
  Eigen::VectorXd Snap(const Eigen::VectorXd& unit) const;
  bool Contains(const NamedConfig& config) const;

 private:
  std::vector<Dimension> dims_;
};

struct Trial {
  Eigen::VectorXd unit;
  NamedConfig config;
  std::optional<double> objective;  // empty while pending
};

// Matérn-5/2 with one lengthscale per dimension:
// k(r) = σ_f² (1 + √5 r + 5r²/3) exp(−√5 r), r² = Σ ((x_i − y_i)/ℓ_i)².
double Matern52(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                const Eigen::VectorXd& lengthscales, double amplitude);

struct KernelHyper {
  Eigen::VectorXd lengthscales;
  double amplitude = 1.0;  // σ_f²
  double noise = 1e-6;     // σ_n²
  double mean = 0.0;       // μ0
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;      // clamped at 0
  double raw_variance = 0.0;  // before clamping
};

// Posterior at one query given precomputed covariances: `gram` is K over the
// observations, `cross` is k(X, x*), `prior_var` is k(x*, x*).
Posterior PosteriorFromCovariances(const Eigen::MatrixXd& gram,
                                   const Eigen::VectorXd& cross, double prior_var,
                                   const Eigen::VectorXd& y, double noise,
                                   double mean);

// GP regression on fixed kernel hyperparameters. The Cholesky factor of
// K + σ_n² I is computed once; jitter from 1e-8 up to 1e-4 is added when the
// factorization fails, after which Error("ill-conditioned") is thrown.
class GaussianProcess {
 public:
  // Rows of `x` are observations.
  GaussianProcess(Eigen::MatrixXd x, Eigen::VectorXd y, KernelHyper hyper);

  Posterior Predict(const Eigen::VectorXd& query) const;
  double LogMarginalLikelihood() const;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  KernelHyper hyper_;
  Eigen::MatrixXd chol_;   // lower factor
  Eigen::VectorXd alpha_;  // (K + σ_n² I)^-1 (y − μ0)
};

// Minimization form: (best − μ)Φ(z) + σφ(z), z = (best − μ)/σ.
double ExpectedImprovement(double mean, double variance, double best);

struct SamplerOptions {
  int draws = 10;
  int burn_in = 20;
};

// Slice sampling over (log ℓ, log σ_f², log σ_n², μ0) against the log
// marginal likelihood plus log-normal priors. Needs at least 2 observations.
std::vector<KernelHyper> SampleKernelHyperparams(const Eigen::MatrixXd& x,
                                                 const Eigen::VectorXd& y,
                                                 std::uint64_t seed,
                                                 const SamplerOptions& options = {});

struct SuggestOptions {
  int initial_points = 3;
  int random_candidates = 1000;
  int local_candidates = 10;
  double local_sigma = 0.05;
  SamplerOptions sampler;
};

// Completed trials in `history` condition the GP; the first
// `initial_points` suggestions come from a seeded Latin hypercube.
Trial SuggestNext(const std::vector<Trial>& history, const SearchSpace& space,
                  std::uint64_t seed, const SuggestOptions& options = {});

struct TraceEntry {
  int index = 0;
  NamedConfig config;
  double objective = 0.0;
  double best_so_far = 0.0;
  double wall_seconds = 0.0;
};

struct SearchResult {
  std::vector<Trial> trials;
  std::vector<TraceEntry> trace;
  int best_index = 0;

  const Trial& best() const { return trials[static_cast<std::size_t>(best_index)]; }
};

using Objective = std::function<double(const NamedConfig&)>;

// Sequential suggest → evaluate → record. Non-finite objectives (and
// exceptions from the objective) are recorded as +inf.
SearchResult RunSearch(const Objective& objective, const SearchSpace& space,
                       int budget, std::uint64_t seed,
                       const SuggestOptions& options = {},
                       const std::function<void(const TraceEntry&)>& on_trial = {});

// One JSON object per line: {index, config, objective, best_so_far,
// wall_seconds}. Infinite objectives are written as null.
void WriteTrace(const std::vector<TraceEntry>& trace, std::ostream& out);
std::vector<TraceEntry> ReadTrace(std::istream& in);
// JSON object of named values.
void WriteNamedConfig(const NamedConfig& config, std::ostream& out);

}  // namespace discsense

#endif  // DISCSENSE_HYPEROPT_HPP_
