#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "discsense/error.hpp"
#include "discsense/nn.hpp"
#include "discsense/trainer.hpp"

namespace discsense {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

LstmParams RandomLstm(int in, int hidden, Rng& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  LstmParams p(in, hidden);
  p.w = p.w.unaryExpr([&](double) { return u(rng); });
  p.u = p.u.unaryExpr([&](double) { return u(rng); });
  p.b = p.b.unaryExpr([&](double) { return u(rng); });
  return p;
}

TEST(LstmStep, ZeroParamsGiveZeroState) {
  const LstmParams p(3, 2);
  const LstmState s = LstmStep(VectorXd::Ones(3), VectorXd::Zero(2), VectorXd::Zero(2), p);
  EXPECT_EQ(s.c, VectorXd::Zero(2));
  EXPECT_EQ(s.h, VectorXd::Zero(2));
}

TEST(LstmStep, SaturatedForgetGateCopiesCell) {
  LstmParams p(2, 3);
  p.b.segment(3, 3).setConstant(20.0);  // forget block
  VectorXd c_prev(3);
  c_prev << 0.7, -0.4, 0.25;
  const LstmState s = LstmStep(VectorXd::Ones(2), VectorXd::Zero(3), c_prev, p);
  EXPECT_LT((s.c - c_prev).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LstmStep, ScalarOracle) {
  LstmParams p(1, 1);
  p.w.setConstant(0.5);
  p.u.setConstant(0.5);
  const LstmState s = LstmStep(VectorXd::Ones(1), VectorXd::Zero(1), VectorXd::Zero(1), p);
  // Five scalar equations in extended precision.
  const long double pre = 0.5L * 1.0L + 0.5L * 0.0L + 0.0L;
  const long double i = 1.0L / (1.0L + std::exp(-pre));
  const long double f = i;
  const long double o = i;
  const long double cand = std::tanh(pre);
  const long double c = f * 0.0L + i * cand;
  const long double h = o * std::tanh(c);
  EXPECT_NEAR(s.c(0), static_cast<double>(c), 1e-15);
  EXPECT_NEAR(s.h(0), static_cast<double>(h), 1e-15);
}

TEST(LstmStep, DimensionMismatch) {
  const LstmParams p(3, 2);
  EXPECT_THROW(LstmStep(VectorXd::Ones(2), VectorXd::Zero(2), VectorXd::Zero(2), p), Error);
}

TEST(LstmStep, CellGrowthBoundedAndOutputBounded) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 200; ++t) {
    const LstmParams p = RandomLstm(4, 5, rng, 2.0);
    const VectorXd x = VectorXd::NullaryExpr(4, [&] { return u(rng); });
    const VectorXd h = VectorXd::NullaryExpr(5, [&] { return u(rng) / 3; });
    const VectorXd c = VectorXd::NullaryExpr(5, [&] { return u(rng); });
    const LstmState s = LstmStep(x, h, c, p);
    for (int j = 0; j < 5; ++j) {
      EXPECT_LE(std::abs(s.c(j)), std::abs(c(j)) + 1.0);
      EXPECT_LT(std::abs(s.h(j)), 1.0);
    }
  }
}

EncoderParams RandomEncoder(int in, std::array<int, 3> hidden, Rng& rng) {
  EncoderParams enc;
  int d = in;
  for (int h : hidden) {
    enc.layers.push_back({RandomLstm(d, h, rng), RandomLstm(d, h, rng)});
    d = 2 * h;
  }
  return enc;
}

// Runs one direction with LstmStep only.
MatrixXd Direction(const MatrixXd& x, const LstmParams& p, bool reverse) {
  const int hdim = p.hidden_dim();
  MatrixXd out(hdim, x.cols());
  VectorXd h = VectorXd::Zero(hdim);
  VectorXd c = VectorXd::Zero(hdim);
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const Eigen::Index t = reverse ? x.cols() - 1 - k : k;
    const LstmState s = LstmStep(x.col(t), h, c, p);
    h = s.h;
    c = s.c;
    out.col(t) = h;
  }
  return out;
}

TEST(EncodeArgument, MatchesStepwiseComposition) {
  Rng rng(2);
  const EncoderParams enc = RandomEncoder(3, {4, 2, 3}, rng);
  const MatrixXd seq = MatrixXd::Random(3, 5);
  MatrixXd input = seq;
  MatrixXd hf, hb;
  for (const BiLayer& l : enc.layers) {
    hf = Direction(input, l.forward, false);
    hb = Direction(input, l.backward, true);
    MatrixXd next(hf.rows() + hb.rows(), input.cols());
    next << hf, hb;
    input = next;
  }
  VectorXd expected(hf.rows() + hb.rows());
  expected << hf.col(hf.cols() - 1), hb.col(0);
  EXPECT_LT((EncodeArgument(seq, enc) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EncodeArgument, SingleTokenEachDirectionOneStep) {
  Rng rng(3);
  EncoderParams enc;
  enc.layers.push_back({RandomLstm(2, 3, rng), RandomLstm(2, 3, rng)});
  const VectorXd x = VectorXd::Random(2);
  const VectorXd out = EncodeArgument(x, enc);
  const VectorXd z = VectorXd::Zero(3);
  EXPECT_EQ(out.head(3), LstmStep(x, z, z, enc.layers[0].forward).h);
  EXPECT_EQ(out.tail(3), LstmStep(x, z, z, enc.layers[0].backward).h);
  // Identical directions → identical halves.
  enc.layers[0].backward = enc.layers[0].forward;
  const VectorXd same = EncodeArgument(x, enc);
  EXPECT_EQ(same.head(3), same.tail(3));
}

// Swapping directions turns layer l's output [f; b] into [b; f], so deeper
// layers need their input columns swapped to see the same values.
MatrixXd SwapColumnHalves(const MatrixXd& w) {
  const Eigen::Index half = w.cols() / 2;
  MatrixXd out(w.rows(), w.cols());
  out << w.rightCols(half), w.leftCols(half);
  return out;
}

TEST(EncodeArgument, ReverseWithSwappedDirectionsSwapsHalves) {
  Rng rng(4);
  const EncoderParams enc = RandomEncoder(3, {3, 2, 4}, rng);
  EncoderParams swapped = enc;
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    std::swap(swapped.layers[l].forward, swapped.layers[l].backward);
    if (l > 0) {
      swapped.layers[l].forward.w = SwapColumnHalves(swapped.layers[l].forward.w);
      swapped.layers[l].backward.w = SwapColumnHalves(swapped.layers[l].backward.w);
    }
  }
  const MatrixXd seq = MatrixXd::Random(3, 4);
  const VectorXd a = EncodeArgument(seq, enc);
  const VectorXd b = EncodeArgument(seq.rowwise().reverse(), swapped);
  // Permuted columns change the summation order, hence the tolerance.
  EXPECT_LT((a.head(4) - b.tail(4)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((a.tail(4) - b.head(4)).cwiseAbs().maxCoeff(), 1e-14);

  // One layer: nothing is permuted and the swap is exact.
  EncoderParams one;
  one.layers = {enc.layers[0]};
  EncoderParams one_swapped = one;
  std::swap(one_swapped.layers[0].forward, one_swapped.layers[0].backward);
  const VectorXd c = EncodeArgument(seq, one);
  const VectorXd d = EncodeArgument(seq.rowwise().reverse(), one_swapped);
  EXPECT_EQ(c.head(3), d.tail(3));
  EXPECT_EQ(c.tail(3), d.head(3));
}

TEST(EncodeArgument, ZeroEncoderZeroOutput) {
  EncoderParams enc;
  enc.layers = {{LstmParams(3, 2), LstmParams(3, 2)}, {LstmParams(4, 2), LstmParams(4, 2)},
                {LstmParams(4, 2), LstmParams(4, 2)}};
  EXPECT_EQ(EncodeArgument(MatrixXd::Zero(3, 6), enc), VectorXd::Zero(4));
}

TEST(Softmax, Examples) {
  VectorXd l(2);
  l << std::log(3.0), 0.0;
  const VectorXd p = Softmax(l);
  EXPECT_NEAR(p(0), 0.75, 1e-15);
  EXPECT_NEAR(p(1), 0.25, 1e-15);
  VectorXd big(3);
  big << 1000, 1001, 999;
  const VectorXd shifted = Softmax(big);
  const VectorXd base = Softmax((big.array() - 1000).matrix());
  EXPECT_LT((shifted - base).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(shifted.sum(), 1.0, 1e-9);
  EXPECT_GT(shifted.minCoeff(), 0.0);
}

HeadParams ZeroHead(int in, int d1, int d2, int labels) {
  HeadParams h;
  h.w1 = MatrixXd::Zero(d1, in);
  h.b1 = VectorXd::Zero(d1);
  h.w2 = MatrixXd::Zero(d2, d1);
  h.b2 = VectorXd::Zero(d2);
  h.wo = MatrixXd::Zero(labels, d2);
  h.bo = VectorXd::Zero(labels);
  return h;
}

TEST(HeadForward, ZeroWeightsUniform) {
  Rng rng(1);
  HeadParams h = ZeroHead(4 + 3, 5, 4, 4);
  h.dropout1 = 0.5;
  for (bool train : {false, true}) {
    const VectorXd p = HeadForward(VectorXd::Ones(2), VectorXd::Ones(2), {0, 2}, h, train, rng);
    EXPECT_LT((p.array() - 0.25).abs().maxCoeff(), 1e-15);
  }
}

TEST(HeadForward, EvalModeIsPureAndDropoutScales) {
  Rng init(9);
  NetworkShape shape{3, {2, 2, 2}, {2, 2, 2}, 6, 5, 2, 3, 0.5, 0.3};
  const Network net = InitNetwork(shape, init);
  Rng r1(1), r2(2);
  const VectorXd e1 = VectorXd::Random(4), e2 = VectorXd::Random(4);
  EXPECT_EQ(HeadForward(e1, e2, {1}, net.head, false, r1),
            HeadForward(e1, e2, {1}, net.head, false, r2));
  Rng t1(5), t2(5);
  EXPECT_EQ(HeadForward(e1, e2, {1}, net.head, true, t1),
            HeadForward(e1, e2, {1}, net.head, true, t2));
}

Network SmallNetwork(std::uint64_t seed, double dropout1, double dropout2) {
  Rng rng(seed);
  NetworkShape shape;
  shape.embedding_dim = 3;
  shape.arg1_hidden = {4, 3, 5};
  shape.arg2_hidden = {3, 5, 4};
  shape.dense1 = 7;
  shape.dense2 = 6;
  shape.feature_dim = 4;
  shape.num_labels = 3;
  shape.dropout1 = dropout1;
  shape.dropout2 = dropout2;
  Network net = InitNetwork(shape, rng);
  // Non-zero biases so every path carries gradient.
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (TensorView t : Tensors(net)) {
    if (t.cols == 1) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] += u(rng);
    }
  }
  return net;
}

std::vector<Instance> SmallBatch(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  std::vector<Instance> batch(4);
  for (int i = 0; i < 4; ++i) {
    batch[i].arg1 = MatrixXd::NullaryExpr(3, 2 + i % 4, [&] { return n(rng); });
    batch[i].arg2 = MatrixXd::NullaryExpr(3, 5 - i, [&] { return n(rng); });
    batch[i].features = i % 2 ? std::vector<int>{0, 3} : std::vector<int>{2};
    batch[i].gold = i % 3;
  }
  return batch;
}

struct GradCheck {
  double max_rel = 0.0;
  std::string worst;
  long checked = 0;
};

// Central differences with the dropout masks held fixed by reseeding.
GradCheck CheckGradients(Network net, const std::vector<Instance>& batch, double h) {
  std::vector<const Instance*> ptrs;
  for (const Instance& x : batch) ptrs.push_back(&x);
  Network grads = ZerosLike(net);
  {
    Rng rng(77);
    LossAndGradients(net, ptrs, rng, &grads);
  }
  GradCheck out;
  std::vector<TensorView> params = Tensors(net);
  std::vector<TensorView> gviews = Tensors(grads);
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (Eigen::Index i = 0; i < params[t].size(); ++i) {
      const double saved = params[t].data[i];
      params[t].data[i] = saved + h;
      Rng a(77);
      const double up = LossAndGradients(net, ptrs, a, nullptr);
      params[t].data[i] = saved - h;
      Rng b(77);
      const double down = LossAndGradients(net, ptrs, b, nullptr);
      params[t].data[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = gviews[t].data[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / denom;
      ++out.checked;
      if (rel > out.max_rel) {
        out.max_rel = rel;
        out.worst = params[t].name + "[" + std::to_string(i) + "] analytic=" +
                    std::to_string(analytic) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return out;
}

TEST(LossAndGradients, MatchesCentralDifferences) {
  const GradCheck plain = CheckGradients(SmallNetwork(1, 0.0, 0.0), SmallBatch(2), 1e-4);
  EXPECT_LT(plain.max_rel, 1e-4) << plain.worst;
  const GradCheck dropped = CheckGradients(SmallNetwork(3, 0.3, 0.2), SmallBatch(4), 1e-4);
  EXPECT_LT(dropped.max_rel, 1e-4) << dropped.worst;
  EXPECT_GT(plain.checked, 500);
}

TEST(LossAndGradients, UniformPredictorGivesLogL) {
  Network net = SmallNetwork(1, 0, 0);
  for (TensorView t : Tensors(net)) {
    if (t.name.rfind("out.", 0) == 0) std::fill(t.data, t.data + t.size(), 0.0);
  }
  const auto batch = SmallBatch(3);
  EXPECT_NEAR(MeanCrossEntropy(net, batch), std::log(3.0), 1e-12);
}

TEST(LossAndGradients, ConfidentPredictorNearZero) {
  Network net = SmallNetwork(1, 0, 0);
  net.head.wo.setZero();
  net.head.bo << 10, 0, 0;
  std::vector<Instance> batch = SmallBatch(3);
  for (Instance& x : batch) x.gold = 0;
  const double loss = MeanCrossEntropy(net, batch);
  EXPECT_GE(loss, 0.0);
  EXPECT_NEAR(loss, std::log1p(2 * std::exp(-10.0)), 1e-15);
}

TEST(SgdStep, Examples) {
  Network p = SmallNetwork(1, 0, 0);
  Network g = ZerosLike(p);
  p.head.bo(0) = 1.0;
  g.head.bo(0) = 0.5;
  g.head.bo(1) = 1.0;
  const double before1 = p.head.bo(1);
  const double before2 = p.head.bo(2);
  SgdStep(p, g, 0.1);
  EXPECT_DOUBLE_EQ(p.head.bo(0), 0.95);
  EXPECT_EQ(p.head.bo(2), before2);
  EXPECT_DOUBLE_EQ(p.head.bo(1), before1 - 0.1);
  const double w = p.head.bo(1);
  SgdStep(p, g, 0.1549);
  EXPECT_DOUBLE_EQ(p.head.bo(1), w - 0.1549);
}

TEST(SgdStep, NonFiniteGradientLeavesParamsUntouched) {
  Network p = SmallNetwork(1, 0, 0);
  const Network before = p;
  Network g = ZerosLike(p);
  g.head.w1(0, 0) = 1.0;
  g.head.bo(2) = std::nan("");
  try {
    SgdStep(p, g, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
  EXPECT_EQ(p.head.w1, before.head.w1);
  EXPECT_THROW(SgdStep(p, ZerosLike(p), 0.0), Error);
}

std::vector<Instance> SeparableData(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0, 0.1);
  std::vector<Instance> out(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    out[i].arg1 = MatrixXd::NullaryExpr(3, 3, [&] { return noise(rng); });
    out[i].arg2 = MatrixXd::NullaryExpr(3, 2, [&] { return noise(rng); });
    out[i].arg2(0, 0) += label ? 1.0 : -1.0;
    out[i].gold = label;
  }
  return out;
}

TEST(Train, DeterministicForSeed) {
  const auto train = SeparableData(40, 1);
  const auto dev = SeparableData(10, 2);
  NetworkShape shape{3, {4, 4, 4}, {4, 4, 4}, 8, 6, 0, 2, 0.1, 0.1};
  TrainOptions opt;
  opt.max_epochs = 4;
  opt.batch_size = 8;
  opt.seed = 42;
  const TrainResult a = Train(train, dev, shape, 0.1, opt);
  const TrainResult b = Train(train, dev, shape, 0.1, opt);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].train_loss, b.trace[i].train_loss);
    EXPECT_EQ(a.trace[i].dev_loss, b.trace[i].dev_loss);
  }
  EXPECT_EQ(a.network.head.w1, b.network.head.w1);
}

TEST(Train, EarlyStoppingAndBestCheckpoint) {
  const auto train = SeparableData(40, 1);
  const auto dev = SeparableData(10, 2);
  NetworkShape shape{3, {4, 4, 4}, {4, 4, 4}, 8, 6, 0, 2, 0.0, 0.0};
  TrainOptions opt;
  opt.max_epochs = 30;
  opt.patience = 2;
  opt.batch_size = 8;
  const TrainResult r = Train(train, dev, shape, 0.2, opt);
  ASSERT_FALSE(r.trace.empty());
  EXPECT_LE(r.trace.size(), 30u);
  double best = r.trace[0].dev_loss;
  for (const auto& e : r.trace) best = std::min(best, e.dev_loss);
  EXPECT_EQ(r.best_dev_loss, best);
  EXPECT_EQ(MeanCrossEntropy(r.network, dev), best);
  // Stopped because of patience or the epoch cap.
  EXPECT_TRUE(r.trace.size() == 30u ||
              static_cast<int>(r.trace.size()) - r.best_epoch == opt.patience);
}

TEST(Train, HugeLearningRateNeverSilentNan) {
  const auto train = SeparableData(40, 1);
  NetworkShape shape{3, {4, 4, 4}, {4, 4, 4}, 8, 6, 0, 2, 0.0, 0.0};
  TrainOptions opt;
  opt.max_epochs = 10;
  try {
    const TrainResult r = Train(train, {}, shape, 10.0, opt);
    for (const auto& e : r.trace) {
      EXPECT_TRUE(std::isfinite(e.train_loss));
      EXPECT_TRUE(std::isfinite(e.dev_loss));
    }
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(Train, EmptyCorpusIsError) {
  NetworkShape shape{3, {4, 4, 4}, {4, 4, 4}, 8, 6, 0, 2, 0.0, 0.0};
  EXPECT_THROW(Train({}, {}, shape, 0.1, {}), Error);
}

TEST(Hyperparams, NamedRoundTrip) {
  Hyperparams hp;
  const auto named = hp.ToNamed();
  EXPECT_EQ(named.at("lstm1"), 259);
  EXPECT_EQ(named.at("lr"), 0.1549);
  Hyperparams other;
  other.lstm = {64, 64, 64, 64, 64, 64};
  for (const auto& [k, v] : named) other.SetNamed(k, v);
  EXPECT_EQ(other.ToNamed(), named);
  EXPECT_THROW(other.SetNamed("dense1", 70.5), Error);
}

}  // namespace
}  // namespace discsense
