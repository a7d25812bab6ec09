#include "discsense/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "discsense/error.hpp"

namespace discsense {

namespace {

int AsSize(const std::string& name, double value) {
  const double r = std::round(value);
  if (!std::isfinite(value) || std::abs(r - value) > 1e-9 || r <= 0) {
    throw Error("hyperparameter " + name + " must be a positive integer");
  }
  return static_cast<int>(r);
}

}  // namespace

std::map<std::string, double> Hyperparams::ToNamed() const {
  std::map<std::string, double> out;
  for (int i = 0; i < 6; ++i) out["lstm" + std::to_string(i + 1)] = lstm[i];
  out["dense1"] = dense1;
  out["dense2"] = dense2;
  out["dropout1"] = dropout1;
  out["dropout2"] = dropout2;
  out["lr"] = learning_rate;
  return out;
}

bool Hyperparams::IsName(const std::string& name) {
  static const char* kNames[] = {"lstm1",  "lstm2",    "lstm3",    "lstm4",
                                 "lstm5",  "lstm6",    "dense1",   "dense2",
                                 "dropout1", "dropout2", "lr", "sgd"};
  return std::find(std::begin(kNames), std::end(kNames), name) != std::end(kNames);
}

void Hyperparams::SetNamed(const std::string& name, double value) {
  if (name.size() == 5 && name.rfind("lstm", 0) == 0 && name[4] >= '1' &&
      name[4] <= '6') {
    lstm[name[4] - '1'] = AsSize(name, value);
  } else if (name == "dense1") {
    dense1 = AsSize(name, value);
  } else if (name == "dense2") {
    dense2 = AsSize(name, value);
  } else if (name == "dropout1") {
    dropout1 = value;
  } else if (name == "dropout2") {
    dropout2 = value;
  } else if (name == "lr" || name == "sgd") {
    learning_rate = value;
  }
}

NetworkShape ShapeFor(const Hyperparams& hp, int size_cap, int embedding_dim,
                      int feature_dim, int num_labels) {
  auto cap = [size_cap](int v) { return size_cap > 0 ? std::min(v, size_cap) : v; };
  NetworkShape s;
  s.embedding_dim = embedding_dim;
  for (int i = 0; i < 3; ++i) {
    s.arg1_hidden[i] = cap(hp.lstm[i]);
    s.arg2_hidden[i] = cap(hp.lstm[i + 3]);
  }
  s.dense1 = cap(hp.dense1);
  s.dense2 = cap(hp.dense2);
  s.feature_dim = feature_dim;
  s.num_labels = num_labels;
  s.dropout1 = hp.dropout1;
  s.dropout2 = hp.dropout2;
  if (!(s.dropout1 >= 0.0 && s.dropout1 < 1.0 && s.dropout2 >= 0.0 &&
        s.dropout2 < 1.0)) {
    throw Error("dropout must lie in [0, 1)");
  }
  return s;
}

TrainResult Train(std::span<const Instance> train, std::span<const Instance> dev,
                  const NetworkShape& shape, double learning_rate,
                  const TrainOptions& options) {
  if (train.empty()) throw Error("train: empty training set");
  if (options.batch_size <= 0 || options.max_epochs <= 0) {
    throw Error("train: batch size and epoch limit must be positive");
  }
  Rng rng(options.seed);
  TrainResult result;
  Network net = InitNetwork(shape, rng);
  Network grads = ZerosLike(net);
  result.network = net;
  result.best_dev_loss = std::numeric_limits<double>::infinity();

  std::vector<const Instance*> order;
  order.reserve(train.size());
  for (const Instance& x : train) order.push_back(&x);

  const bool dev_labeled = std::any_of(
      dev.begin(), dev.end(), [](const Instance& x) { return x.gold >= 0; });
  const std::span<const Instance> monitor = dev_labeled ? dev : train;
  int since_best = 0;
  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    // Fisher-Yates with the raw engine so the order is library-independent.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      const std::span<const Instance* const> batch(order.data() + start, end - start);
      const double loss = LossAndGradients(net, batch, rng, &grads);
      if (!std::isfinite(loss)) throw Error("diverged");
      SgdStep(net, grads, learning_rate);
      loss_sum += loss;
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(batches);
    log.dev_loss = MeanCrossEntropy(net, monitor);
    if (!std::isfinite(log.dev_loss)) throw Error("diverged");
    result.trace.push_back(log);
    if (log.dev_loss < result.best_dev_loss) {
      result.best_dev_loss = log.dev_loss;
      result.best_epoch = epoch;
      result.network = net;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  return result;
}

}  // namespace discsense
