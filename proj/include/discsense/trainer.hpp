#ifndef DISCSENSE_TRAINER_HPP_
#define DISCSENSE_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "discsense/nn.hpp"

namespace discsense {

// Tunable architecture and optimizer settings. Defaults are a strong
// non-explicit configuration.
struct Hyperparams {
  // lstm[0..2]: arg1 encoder layers bottom to top; lstm[3..5]: arg2.
  std::array<int, 6> lstm = {259, 75, 263, 127, 89, 150};
  int dense1 = 269;
  int dense2 = 69;
  double dropout1 = 0.11;
  double dropout2 = 0.57;
  double learning_rate = 0.1549;

  // Named values: lstm1..lstm6, dense1, dense2, dropout1, dropout2, lr.
  std::map<std::string, double> ToNamed() const;
  // Unknown names are ignored; throws on a non-integral size.
  void SetNamed(const std::string& name, double value);
  static bool IsName(const std::string& name);
};

struct TrainOptions {
  int batch_size = 32;
  int patience = 5;
  int max_epochs = 50;
  // Caps every layer width when positive (used for fast tuning runs).
  int size_cap = 0;
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct TrainResult {
  Network network;  // best-dev checkpoint
  std::vector<EpochLog> trace;
  int best_epoch = 0;
  double best_dev_loss = 0.0;
};

NetworkShape ShapeFor(const Hyperparams& hp, int size_cap, int embedding_dim,
                      int feature_dim, int num_labels);

// Mini-batch SGD on cross-entropy with per-epoch shuffling, early stopping on
// dev cross-entropy (training loss when `dev` has no labeled instance).
// Deterministic for a fixed seed.
TrainResult Train(std::span<const Instance> train, std::span<const Instance> dev,
                  const NetworkShape& shape, double learning_rate,
                  const TrainOptions& options);

}  // namespace discsense

#endif  // DISCSENSE_TRAINER_HPP_
