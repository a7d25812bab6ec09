#include "discsense/hyperopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <set>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "discsense/error.hpp"

namespace discsense {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Rng = std::mt19937_64;

double Uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double NormalPdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double NormalCdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// SplitMix64 finalizer, used to derive per-step seeds.
std::uint64_t Mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// Search space.

SearchSpace::SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
  std::set<std::string> names;
  for (const Dimension& d : dims_) {
    if (!(d.lower < d.upper)) {
      throw Error("search space: " + d.name + " needs lower < upper");
    }
    if (!names.insert(d.name).second) {
      throw Error("search space: duplicate dimension " + d.name);
    }
  }
}

SearchSpace SearchSpace::ClassifierSpace() {
  return SearchSpace({
      {"lstm1", 64, 320, DimKind::kInteger},
      {"lstm2", 64, 100, DimKind::kInteger},
      {"lstm3", 64, 320, DimKind::kInteger},
      {"lstm4", 64, 320, DimKind::kInteger},
      {"lstm5", 64, 100, DimKind::kInteger},
      {"lstm6", 64, 320, DimKind::kInteger},
      {"dense1", 64, 320, DimKind::kInteger},
      {"dense2", 64, 100, DimKind::kInteger},
      {"dropout1", 0.0, 0.9, DimKind::kReal},
      {"dropout2", 0.0, 0.9, DimKind::kReal},
      {"lr", 0.001, 0.5, DimKind::kReal},
  });
}

NamedConfig SearchSpace::Decode(const VectorXd& unit) const {
  if (unit.size() != size()) throw Error("search space: dimension mismatch");
  NamedConfig out;
  for (int i = 0; i < size(); ++i) {
    const Dimension& d = dims_[i];
    const double u = std::clamp(unit(i), 0.0, 1.0);
    double v = d.lower + u * (d.upper - d.lower);
    if (d.kind == DimKind::kInteger) {
      v = std::clamp(std::floor(v + 0.5), d.lower, d.upper);
    } else {
      v = std::clamp(v, d.lower, d.upper);
    }
    out[d.name] = v;
  }
  return out;
}

VectorXd SearchSpace::Encode(const NamedConfig& config) const {
  VectorXd u(size());
  for (int i = 0; i < size(); ++i) {
    const Dimension& d = dims_[i];
    auto it = config.find(d.name);
    if (it == config.end()) throw Error("config lacks " + d.name);
    u(i) = std::clamp((it->second - d.lower) / (d.upper - d.lower), 0.0, 1.0);
  }
  return u;
}

VectorXd SearchSpace::Snap(const VectorXd& unit) const {
  return Encode(Decode(unit));
}

bool SearchSpace::Contains(const NamedConfig& config) const {
  for (const Dimension& d : dims_) {
    auto it = config.find(d.name);
    if (it == config.end()) return false;
    const double v = it->second;
    if (!(v >= d.lower && v <= d.upper)) return false;
    if (d.kind == DimKind::kInteger && v != std::floor(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Gaussian process.

double Matern52(const VectorXd& x, const VectorXd& y, const VectorXd& lengthscales,
                double amplitude) {
  const double r = ((x - y).array() / lengthscales.array()).matrix().norm();
  const double s = std::sqrt(5.0) * r;
  return amplitude * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

namespace {

// Lower Cholesky factor of a + jitter·I, escalating jitter from 1e-8 to 1e-4.
MatrixXd RobustCholesky(const MatrixXd& a) {
  const Eigen::Index n = a.rows();
  double jitter = 0.0;
  for (;;) {
    MatrixXd m = a;
    if (jitter > 0.0) m.diagonal().array() += jitter;
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
      MatrixXd l = llt.matrixL();
      if (l.allFinite() && (n == 0 || l.diagonal().minCoeff() > 0.0)) return l;
    }
    jitter = jitter == 0.0 ? 1e-8 : jitter * 10.0;
    if (jitter > 1e-4 * (1.0 + 1e-9)) throw Error("ill-conditioned");
  }
}

}  // namespace

Posterior PosteriorFromCovariances(const MatrixXd& gram, const VectorXd& cross,
                                   double prior_var, const VectorXd& y,
                                   double noise, double mean) {
  MatrixXd k = gram;
  k.diagonal().array() += noise;
  const MatrixXd l = RobustCholesky(k);
  const VectorXd z = l.triangularView<Eigen::Lower>().solve(
      (y.array() - mean).matrix());
  const VectorXd alpha = l.transpose().triangularView<Eigen::Upper>().solve(z);
  const VectorXd v = l.triangularView<Eigen::Lower>().solve(cross);
  Posterior p;
  p.mean = mean + cross.dot(alpha);
  p.raw_variance = prior_var - v.squaredNorm();
  p.variance = std::max(0.0, p.raw_variance);
  return p;
}

GaussianProcess::GaussianProcess(MatrixXd x, VectorXd y, KernelHyper hyper)
    : x_(std::move(x)), y_(std::move(y)), hyper_(std::move(hyper)) {
  const Eigen::Index n = x_.rows();
  if (y_.size() != n) throw Error("gp: observation count mismatch");
  if (hyper_.lengthscales.size() != x_.cols()) {
    throw Error("gp: lengthscale count does not match input dimension");
  }
  if (!(hyper_.amplitude > 0.0) || !(hyper_.noise >= 0.0) ||
      (hyper_.lengthscales.array() <= 0.0).any()) {
    throw Error("gp: kernel hyperparameters must be positive");
  }
  MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = Matern52(x_.row(i).transpose(), x_.row(j).transpose(),
                                   hyper_.lengthscales, hyper_.amplitude);
    }
  }
  k.diagonal().array() += hyper_.noise;
  chol_ = RobustCholesky(k);
  const VectorXd z = chol_.triangularView<Eigen::Lower>().solve(
      (y_.array() - hyper_.mean).matrix());
  alpha_ = chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Posterior GaussianProcess::Predict(const VectorXd& query) const {
  const Eigen::Index n = x_.rows();
  VectorXd cross(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cross(i) = Matern52(x_.row(i).transpose(), query, hyper_.lengthscales,
                        hyper_.amplitude);
  }
  const VectorXd v = chol_.triangularView<Eigen::Lower>().solve(cross);
  Posterior p;
  p.mean = hyper_.mean + cross.dot(alpha_);
  p.raw_variance = hyper_.amplitude - v.squaredNorm();
  p.variance = std::max(0.0, p.raw_variance);
  return p;
}

double GaussianProcess::LogMarginalLikelihood() const {
  const double n = static_cast<double>(y_.size());
  const VectorXd centered = (y_.array() - hyper_.mean).matrix();
  return -0.5 * centered.dot(alpha_) - chol_.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

double ExpectedImprovement(double mean, double variance, double best) {
  const double sigma = std::sqrt(std::max(0.0, variance));
  const double gain = best - mean;
  if (sigma <= 0.0) return std::max(gain, 0.0);
  const double z = gain / sigma;
  return std::max(0.0, gain * NormalCdf(z) + sigma * NormalPdf(z));
}

// ---------------------------------------------------------------------------
// Kernel hyperparameter sampling.

namespace {

// Packed layout: [log ℓ_1..d, log σ_f², log σ_n², μ0].
KernelHyper Unpack(const VectorXd& theta, int d) {
  KernelHyper h;
  h.lengthscales = theta.head(d).array().exp();
  h.amplitude = std::exp(theta(d));
  h.noise = std::exp(theta(d + 1));
  h.mean = theta(d + 2);
  return h;
}

class HyperPosterior {
 public:
  HyperPosterior(const MatrixXd& x, const VectorXd& y) : x_(x), y_(y) {
    y_mean_ = y.mean();
    y_var_ = std::max((y.array() - y_mean_).square().mean(), 1e-6);
  }

  double y_mean() const { return y_mean_; }

  double operator()(const VectorXd& theta) const {
    const int d = static_cast<int>(x_.cols());
    if (!theta.allFinite()) return -kInf;
    // Keep the search inside a numerically sane box.
    if ((theta.head(d + 2).array().abs() > 20.0).any()) return -kInf;
    double lp = -0.5 * theta.head(d).squaredNorm();
    lp += -0.5 * theta(d) * theta(d);
    lp += -0.5 * (theta(d + 1) + 6.0) * (theta(d + 1) + 6.0);
    lp += -0.5 * (theta(d + 2) - y_mean_) * (theta(d + 2) - y_mean_) / y_var_;
    try {
      GaussianProcess gp(x_, y_, Unpack(theta, d));
      const double lml = gp.LogMarginalLikelihood();
      return std::isfinite(lml) ? lp + lml : -kInf;
    } catch (const Error&) {
      return -kInf;
    }
  }

 private:
  const MatrixXd& x_;
  const VectorXd& y_;
  double y_mean_ = 0.0;
  double y_var_ = 1.0;
};

// One univariate slice-sampling update per coordinate (stepping out, then
// shrinkage).
void SliceSweep(VectorXd& theta, double& logp, const HyperPosterior& f, Rng& rng) {
  constexpr double kWidth = 1.0;
  constexpr int kMaxSteps = 10;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double level = logp + std::log(Uniform(rng));
    const double x0 = theta(j);
    double lo = x0 - kWidth * Uniform(rng);
    double hi = lo + kWidth;
    auto eval_at = [&](double v) {
      VectorXd t = theta;
      t(j) = v;
      return f(t);
    };
    for (int s = 0; s < kMaxSteps && eval_at(lo) > level; ++s) lo -= kWidth;
    for (int s = 0; s < kMaxSteps && eval_at(hi) > level; ++s) hi += kWidth;
    for (int guard = 0; guard < 200; ++guard) {
      const double v = lo + (hi - lo) * Uniform(rng);
      const double lv = eval_at(v);
      if (lv > level) {
        theta(j) = v;
        logp = lv;
        break;
      }
      if (v < x0) {
        lo = v;
      } else {
        hi = v;
      }
    }
  }
}

}  // namespace

std::vector<KernelHyper> SampleKernelHyperparams(const MatrixXd& x,
                                                 const VectorXd& y,
                                                 std::uint64_t seed,
                                                 const SamplerOptions& options) {
  if (x.rows() < 2) throw Error("kernel sampling needs at least 2 observations");
  const int d = static_cast<int>(x.cols());
  HyperPosterior f(x, y);
  VectorXd theta = VectorXd::Zero(d + 3);
  theta(d + 1) = -6.0;
  theta(d + 2) = f.y_mean();
  // Propagates "ill-conditioned" if even the starting point cannot factor.
  GaussianProcess start(x, y, Unpack(theta, d));
  double logp = f(theta);
  if (!std::isfinite(logp)) throw Error("ill-conditioned");

  Rng rng(seed);
  for (int s = 0; s < options.burn_in; ++s) SliceSweep(theta, logp, f, rng);
  std::vector<KernelHyper> draws;
  draws.reserve(static_cast<std::size_t>(options.draws));
  for (int s = 0; s < options.draws; ++s) {
    SliceSweep(theta, logp, f, rng);
    draws.push_back(Unpack(theta, d));
  }
  return draws;
}

// ---------------------------------------------------------------------------
// Suggestion and search loop.

namespace {

MatrixXd LatinHypercube(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd pts(n, d);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng() % static_cast<std::uint64_t>(i + 1)]);
    }
    for (int i = 0; i < n; ++i) pts(i, j) = (perm[i] + Uniform(rng)) / n;
  }
  return pts;
}

}  // namespace

Trial SuggestNext(const std::vector<Trial>& history, const SearchSpace& space,
                  std::uint64_t seed, const SuggestOptions& options) {
  const int d = space.size();
  std::vector<const Trial*> done;
  for (const Trial& t : history) {
    if (t.objective) done.push_back(&t);
  }

  Trial next;
  const int n_init = std::max(1, options.initial_points);
  if (static_cast<int>(done.size()) < std::max(2, n_init)) {
    const MatrixXd design = LatinHypercube(n_init, d, seed);
    const int row = static_cast<int>(history.size());
    if (row < n_init) {
      next.unit = space.Snap(design.row(row).transpose());
    } else {
      Rng rng(Mix(seed ^ Mix(history.size())));
      VectorXd u(d);
      for (int j = 0; j < d; ++j) u(j) = Uniform(rng);
      next.unit = space.Snap(u);
    }
    next.config = space.Decode(next.unit);
    return next;
  }

  const Eigen::Index n = static_cast<Eigen::Index>(done.size());
  MatrixXd x(n, d);
  VectorXd y(n);
  double worst_finite = -kInf;
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = done[i]->unit.transpose();
    const double v = *done[i]->objective;
    if (std::isfinite(v)) worst_finite = std::max(worst_finite, v);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = *done[i]->objective;
    // Penalized trials enter the model at the worst finite value.
    y(i) = std::isfinite(v) ? v : (std::isfinite(worst_finite) ? worst_finite : 0.0);
  }
  const double mu = y.mean();
  double sd = std::sqrt((y.array() - mu).square().mean());
  if (!(sd > 1e-12)) sd = 1.0;
  const VectorXd z = ((y.array() - mu) / sd).matrix();
  Eigen::Index incumbent = 0;
  const double best = z.minCoeff(&incumbent);

  const std::uint64_t step_seed = Mix(seed ^ Mix(static_cast<std::uint64_t>(n) + 1));
  const std::vector<KernelHyper> draws =
      SampleKernelHyperparams(x, z, step_seed, options.sampler);
  std::vector<GaussianProcess> gps;
  gps.reserve(draws.size());
  for (const KernelHyper& h : draws) gps.emplace_back(x, z, h);

  Rng rng(Mix(step_seed));
  std::vector<VectorXd> candidates;
  candidates.reserve(static_cast<std::size_t>(options.random_candidates +
                                              options.local_candidates));
  for (int c = 0; c < options.random_candidates; ++c) {
    VectorXd u(d);
    for (int j = 0; j < d; ++j) u(j) = Uniform(rng);
    candidates.push_back(space.Snap(u));
  }
  std::normal_distribution<double> jitter(0.0, options.local_sigma);
  const VectorXd inc = x.row(incumbent).transpose();
  for (int c = 0; c < options.local_candidates; ++c) {
    VectorXd u = inc;
    for (int j = 0; j < d; ++j) u(j) = std::clamp(u(j) + jitter(rng), 0.0, 1.0);
    candidates.push_back(space.Snap(u));
  }

  // Index-ordered argmax; ties keep the earlier candidate.
  double best_ei = -1.0;
  std::size_t best_c = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double ei = 0.0;
    for (const GaussianProcess& gp : gps) {
      const Posterior p = gp.Predict(candidates[c]);
      ei += ExpectedImprovement(p.mean, p.variance, best);
    }
    ei /= static_cast<double>(gps.size());
    if (ei > best_ei) {
      best_ei = ei;
      best_c = c;
    }
  }
  next.unit = candidates[best_c];
  next.config = space.Decode(next.unit);
  return next;
}

SearchResult RunSearch(const Objective& objective, const SearchSpace& space,
                       int budget, std::uint64_t seed,
                       const SuggestOptions& options,
                       const std::function<void(const TraceEntry&)>& on_trial) {
  if (budget < 1) throw Error("search budget must be at least 1");
  SearchResult result;
  double best = kInf;
  for (int i = 0; i < budget; ++i) {
    Trial trial = SuggestNext(result.trials, space, seed, options);
    const auto start = std::chrono::steady_clock::now();
    double value = kInf;
    try {
      value = objective(trial.config);
    } catch (const std::exception&) {
      value = kInf;
    }
    if (!std::isfinite(value)) value = kInf;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trial.objective = value;
    if (i == 0 || value < *result.trials[result.best_index].objective) {
      result.best_index = i;
    }
    best = std::min(best, value);
    TraceEntry entry;
    entry.index = i;
    entry.config = trial.config;
    entry.objective = value;
    entry.best_so_far = best;
    entry.wall_seconds = secs;
    result.trials.push_back(std::move(trial));
    result.trace.push_back(entry);
    if (on_trial) on_trial(entry);
  }
  return result;
}

namespace {

nlohmann::json NumberOrNull(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double NumberOrInf(const nlohmann::json& j) {
  return j.is_null() ? kInf : j.get<double>();
}

// Whole numbers (layer widths) are written without a fractional part.
nlohmann::json ConfigJson(const NamedConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, v] : config) {
    if (std::isfinite(v) && v == std::round(v) && std::abs(v) < 1e15) {
      j[name] = static_cast<long long>(v);
    } else {
      j[name] = v;
    }
  }
  return j;
}

}  // namespace

void WriteTrace(const std::vector<TraceEntry>& trace, std::ostream& out) {
  for (const TraceEntry& e : trace) {
    nlohmann::ordered_json j;
    j["index"] = e.index;
    j["config"] = ConfigJson(e.config);
    j["objective"] = NumberOrNull(e.objective);
    j["best_so_far"] = NumberOrNull(e.best_so_far);
    j["wall_seconds"] = e.wall_seconds;
    out << j.dump() << '\n';
  }
}

std::vector<TraceEntry> ReadTrace(std::istream& in) {
  std::vector<TraceEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TraceEntry e;
    e.index = j.at("index").get<int>();
    e.config = j.at("config").get<NamedConfig>();
    e.objective = NumberOrInf(j.at("objective"));
    e.best_so_far = NumberOrInf(j.at("best_so_far"));
    e.wall_seconds = j.at("wall_seconds").get<double>();
    out.push_back(std::move(e));
  }
  return out;
}

void WriteNamedConfig(const NamedConfig& config, std::ostream& out) {
  out << ConfigJson(config).dump(2) << '\n';
}

}  // namespace discsense
