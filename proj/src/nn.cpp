#include "discsense/nn.hpp"

#include <algorithm>
#include <cmath>

#include "discsense/error.hpp"

namespace discsense {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void GlorotUniform(MatrixXd& m, int fan_in, int fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  // Row-major fill so results do not depend on the storage order.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
}

// Activations of one direction over a whole sequence, in processing order.
struct LstmTrace {
  MatrixXd x;     // input_dim x T
  MatrixXd gates; // 4H x T, post-nonlinearity (i, f, o, c̃)
  MatrixXd c;     // H x T
  MatrixXd tanh_c;
  MatrixXd h;
};

LstmTrace RunDirection(const MatrixXd& x, const LstmParams& p) {
  const int hidden = p.hidden_dim();
  const Eigen::Index steps = x.cols();
  LstmTrace tr;
  tr.x = x;
  tr.gates.resize(4 * hidden, steps);
  tr.c.resize(hidden, steps);
  tr.tanh_c.resize(hidden, steps);
  tr.h.resize(hidden, steps);
  const MatrixXd wx = p.w * x;
  VectorXd h = VectorXd::Zero(hidden);
  VectorXd c = VectorXd::Zero(hidden);
  for (Eigen::Index t = 0; t < steps; ++t) {
    VectorXd a = wx.col(t) + p.u * h + p.b;
    for (int j = 0; j < 3 * hidden; ++j) a(j) = Sigmoid(a(j));
    for (int j = 3 * hidden; j < 4 * hidden; ++j) a(j) = std::tanh(a(j));
    c = a.segment(hidden, hidden).cwiseProduct(c) +
        a.head(hidden).cwiseProduct(a.tail(hidden));
    const VectorXd tc = c.array().tanh();
    h = a.segment(2 * hidden, hidden).cwiseProduct(tc);
    tr.gates.col(t) = a;
    tr.c.col(t) = c;
    tr.tanh_c.col(t) = tc;
    tr.h.col(t) = h;
  }
  return tr;
}

// Backpropagation through time. `dh` holds the loss gradient w.r.t. each
// step's output (processing order). Returns the gradient w.r.t. the inputs.
MatrixXd BackwardDirection(const LstmTrace& tr, const MatrixXd& dh,
                           const LstmParams& p, LstmParams& g) {
  const int hidden = p.hidden_dim();
  const Eigen::Index steps = tr.x.cols();
  MatrixXd dx(tr.x.rows(), steps);
  VectorXd dh_next = VectorXd::Zero(hidden);
  VectorXd dc_next = VectorXd::Zero(hidden);
  VectorXd da(4 * hidden);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto i = tr.gates.col(t).segment(0, hidden).array();
    const auto f = tr.gates.col(t).segment(hidden, hidden).array();
    const auto o = tr.gates.col(t).segment(2 * hidden, hidden).array();
    const auto cand = tr.gates.col(t).segment(3 * hidden, hidden).array();
    const auto tc = tr.tanh_c.col(t).array();
    const VectorXd c_prev =
        t > 0 ? VectorXd(tr.c.col(t - 1)) : VectorXd::Zero(hidden);
    const VectorXd h_prev =
        t > 0 ? VectorXd(tr.h.col(t - 1)) : VectorXd::Zero(hidden);

    const VectorXd dht = dh.col(t) + dh_next;
    const Eigen::ArrayXd dc =
        dc_next.array() + dht.array() * o * (1.0 - tc.square());
    da.segment(0, hidden) = (dc * cand * i * (1.0 - i)).matrix();
    da.segment(hidden, hidden) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
    da.segment(2 * hidden, hidden) = (dht.array() * tc * o * (1.0 - o)).matrix();
    da.segment(3 * hidden, hidden) = (dc * i * (1.0 - cand.square())).matrix();
    dc_next = (dc * f).matrix();

    g.w.noalias() += da * tr.x.col(t).transpose();
    g.u.noalias() += da * h_prev.transpose();
    g.b += da;
    dx.col(t).noalias() = p.w.transpose() * da;
    dh_next.noalias() = p.u.transpose() * da;
  }
  return dx;
}

MatrixXd Reversed(const MatrixXd& m) { return m.rowwise().reverse(); }

struct EncoderTrace {
  std::vector<LstmTrace> forward;
  std::vector<LstmTrace> backward;
  VectorXd output;
};

EncoderTrace RunEncoder(const MatrixXd& sequence, const EncoderParams& enc) {
  if (sequence.cols() == 0) throw Error("encoder: empty sequence");
  if (sequence.rows() != enc.input_dim()) {
    throw Error("encoder: input dimension " + std::to_string(sequence.rows()) +
                " does not match " + std::to_string(enc.input_dim()));
  }
  EncoderTrace tr;
  MatrixXd input = sequence;
  for (const BiLayer& layer : enc.layers) {
    tr.forward.push_back(RunDirection(input, layer.forward));
    tr.backward.push_back(RunDirection(Reversed(input), layer.backward));
    const MatrixXd& hf = tr.forward.back().h;
    const MatrixXd hb = Reversed(tr.backward.back().h);
    MatrixXd next(hf.rows() + hb.rows(), input.cols());
    next << hf, hb;
    input = std::move(next);
  }
  const MatrixXd& top_f = tr.forward.back().h;
  const MatrixXd& top_b = tr.backward.back().h;
  tr.output.resize(top_f.rows() + top_b.rows());
  tr.output << top_f.col(top_f.cols() - 1), top_b.col(top_b.cols() - 1);
  return tr;
}

void BackwardEncoder(const EncoderTrace& tr, const VectorXd& d_out,
                     const EncoderParams& enc, EncoderParams& g) {
  const Eigen::Index steps = tr.forward.front().h.cols();
  const int top = static_cast<int>(enc.layers.size()) - 1;
  const int top_hidden = enc.layers[top].forward.hidden_dim();
  // Gradient w.r.t. the layer output sequence, position order, [fwd; bwd].
  MatrixXd d_seq = MatrixXd::Zero(2 * top_hidden, steps);
  d_seq.block(0, steps - 1, top_hidden, 1) = d_out.head(top_hidden);
  // The backward direction's final state sits at position 0.
  d_seq.block(top_hidden, 0, top_hidden, 1) = d_out.tail(top_hidden);

  for (int l = top; l >= 0; --l) {
    const int hidden = enc.layers[l].forward.hidden_dim();
    const MatrixXd dhf = d_seq.topRows(hidden);
    const MatrixXd dhb = Reversed(d_seq.bottomRows(hidden));
    const MatrixXd dxf = BackwardDirection(tr.forward[l], dhf,
                                           enc.layers[l].forward,
                                           g.layers[l].forward);
    const MatrixXd dxb = BackwardDirection(tr.backward[l], dhb,
                                           enc.layers[l].backward,
                                           g.layers[l].backward);
    if (l > 0) d_seq = dxf + Reversed(dxb);
  }
}

struct HeadTrace {
  VectorXd input_dense;  // [arg1; arg2]
  VectorXd pre1, mask1, out1;
  VectorXd pre2, mask2, out2;
  VectorXd logits;
};

VectorXd DropoutMask(Eigen::Index n, double p, bool train_mode, Rng& rng) {
  if (!train_mode || p <= 0.0) return VectorXd::Ones(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VectorXd mask(n);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < n; ++j) {
    mask(j) = unit(rng) < p ? 0.0 : keep_scale;
  }
  return mask;
}

HeadTrace RunHead(const VectorXd& arg1_vec, const VectorXd& arg2_vec,
                  const std::vector<int>& features, const HeadParams& head,
                  bool train_mode, Rng& rng) {
  HeadTrace tr;
  const Eigen::Index enc_dim = arg1_vec.size() + arg2_vec.size();
  const Eigen::Index feat_dim = head.w1.cols() - enc_dim;
  if (feat_dim < 0) throw Error("head: dense1 input dimension mismatch");
  tr.input_dense.resize(enc_dim);
  tr.input_dense << arg1_vec, arg2_vec;
  tr.pre1 = head.w1.leftCols(enc_dim) * tr.input_dense + head.b1;
  for (int idx : features) {
    if (idx < 0 || idx >= feat_dim) throw Error("head: feature index out of range");
    tr.pre1 += head.w1.col(enc_dim + idx);
  }
  tr.mask1 = DropoutMask(tr.pre1.size(), head.dropout1, train_mode, rng);
  tr.out1 = tr.pre1.cwiseMax(0.0).cwiseProduct(tr.mask1);
  tr.pre2 = head.w2 * tr.out1 + head.b2;
  tr.mask2 = DropoutMask(tr.pre2.size(), head.dropout2, train_mode, rng);
  tr.out2 = tr.pre2.cwiseMax(0.0).cwiseProduct(tr.mask2);
  tr.logits = head.wo * tr.out2 + head.bo;
  return tr;
}

double LogSumExp(const VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

LstmParams::LstmParams(int input_dim, int hidden_dim)
    : w(MatrixXd::Zero(4 * hidden_dim, input_dim)),
      u(MatrixXd::Zero(4 * hidden_dim, hidden_dim)),
      b(VectorXd::Zero(4 * hidden_dim)) {}

LstmState LstmStep(const VectorXd& x, const VectorXd& h_prev,
                   const VectorXd& c_prev, const LstmParams& p) {
  const int hidden = p.hidden_dim();
  if (x.size() != p.input_dim() || h_prev.size() != hidden ||
      c_prev.size() != hidden) {
    throw Error("lstm_step: dimension mismatch");
  }
  VectorXd a = p.w * x + p.u * h_prev + p.b;
  for (int j = 0; j < 3 * hidden; ++j) a(j) = Sigmoid(a(j));
  for (int j = 3 * hidden; j < 4 * hidden; ++j) a(j) = std::tanh(a(j));
  LstmState s;
  s.c = a.segment(hidden, hidden).cwiseProduct(c_prev) +
        a.head(hidden).cwiseProduct(a.tail(hidden));
  s.h = a.segment(2 * hidden, hidden).cwiseProduct(VectorXd(s.c.array().tanh()));
  return s;
}

int EncoderParams::output_dim() const {
  return layers.empty() ? 0 : 2 * layers.back().forward.hidden_dim();
}

int EncoderParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().forward.input_dim();
}

int Network::feature_dim() const {
  return static_cast<int>(head.w1.cols()) - arg1.output_dim() -
         arg2.output_dim();
}

std::vector<TensorView> Tensors(Network& net) {
  std::vector<TensorView> out;
  auto add = [&out](std::string name, auto& m) {
    out.push_back({std::move(name), m.data(), m.rows(), m.cols()});
  };
  auto add_encoder = [&](const std::string& prefix, EncoderParams& enc) {
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
      for (int dir = 0; dir < 2; ++dir) {
        LstmParams& p = dir == 0 ? enc.layers[l].forward : enc.layers[l].backward;
        const std::string base = prefix + ".l" + std::to_string(l) +
                                 (dir == 0 ? ".fwd" : ".bwd");
        add(base + ".W", p.w);
        add(base + ".U", p.u);
        add(base + ".b", p.b);
      }
    }
  };
  add_encoder("arg1", net.arg1);
  add_encoder("arg2", net.arg2);
  add("dense1.W", net.head.w1);
  add("dense1.b", net.head.b1);
  add("dense2.W", net.head.w2);
  add("dense2.b", net.head.b2);
  add("out.W", net.head.wo);
  add("out.b", net.head.bo);
  return out;
}

Network ZerosLike(const Network& net) {
  Network z = net;
  for (TensorView& t : Tensors(z)) std::fill(t.data, t.data + t.size(), 0.0);
  return z;
}

Network InitNetwork(const NetworkShape& shape, Rng& rng) {
  if (shape.embedding_dim <= 0 || shape.num_labels <= 0 || shape.dense1 <= 0 ||
      shape.dense2 <= 0 || shape.feature_dim < 0) {
    throw Error("network: invalid shape");
  }
  Network net;
  auto build = [&](EncoderParams& enc, const std::array<int, 3>& hidden) {
    int in = shape.embedding_dim;
    for (int h : hidden) {
      if (h <= 0) throw Error("network: LSTM size must be positive");
      BiLayer layer{LstmParams(in, h), LstmParams(in, h)};
      for (LstmParams* p : {&layer.forward, &layer.backward}) {
        GlorotUniform(p->w, in, h, rng);
        GlorotUniform(p->u, h, h, rng);
        p->b.segment(h, h).setOnes();
      }
      enc.layers.push_back(std::move(layer));
      in = 2 * h;
    }
  };
  build(net.arg1, shape.arg1_hidden);
  build(net.arg2, shape.arg2_hidden);

  const int in1 = net.arg1.output_dim() + net.arg2.output_dim() + shape.feature_dim;
  HeadParams& head = net.head;
  head.w1.resize(shape.dense1, in1);
  GlorotUniform(head.w1, in1, shape.dense1, rng);
  head.b1 = VectorXd::Zero(shape.dense1);
  head.w2.resize(shape.dense2, shape.dense1);
  GlorotUniform(head.w2, shape.dense1, shape.dense2, rng);
  head.b2 = VectorXd::Zero(shape.dense2);
  head.wo.resize(shape.num_labels, shape.dense2);
  GlorotUniform(head.wo, shape.dense2, shape.num_labels, rng);
  head.bo = VectorXd::Zero(shape.num_labels);
  head.dropout1 = shape.dropout1;
  head.dropout2 = shape.dropout2;
  return net;
}

VectorXd EncodeArgument(const MatrixXd& sequence, const EncoderParams& enc) {
  return RunEncoder(sequence, enc).output;
}

VectorXd Softmax(const VectorXd& logits) {
  const double m = logits.maxCoeff();
  VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

VectorXd HeadForward(const VectorXd& arg1_vec, const VectorXd& arg2_vec,
                     const std::vector<int>& features, const HeadParams& head,
                     bool train_mode, Rng& rng) {
  return Softmax(RunHead(arg1_vec, arg2_vec, features, head, train_mode, rng).logits);
}

VectorXd Predict(const Network& net, const Instance& x) {
  Rng unused(0);
  return HeadForward(EncodeArgument(x.arg1, net.arg1),
                     EncodeArgument(x.arg2, net.arg2), x.features, net.head,
                     /*train_mode=*/false, unused);
}

double LossAndGradients(const Network& net,
                        std::span<const Instance* const> batch, Rng& rng,
                        Network* grads, bool train_mode) {
  if (grads != nullptr) {
    for (TensorView& t : Tensors(*grads)) std::fill(t.data, t.data + t.size(), 0.0);
  }
  std::size_t n = 0;
  for (const Instance* x : batch) {
    if (x->gold >= 0) ++n;
  }
  if (n == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(n);
  const Eigen::Index enc1 = net.arg1.output_dim();
  const Eigen::Index enc_dim = enc1 + net.arg2.output_dim();

  double total = 0.0;
  for (const Instance* x : batch) {
    if (x->gold < 0) continue;
    if (x->gold >= net.num_labels()) throw Error("gold label index out of range");
    const EncoderTrace t1 = RunEncoder(x->arg1, net.arg1);
    const EncoderTrace t2 = RunEncoder(x->arg2, net.arg2);
    const HeadTrace h =
        RunHead(t1.output, t2.output, x->features, net.head, train_mode, rng);
    total += LogSumExp(h.logits) - h.logits(x->gold);
    if (grads == nullptr) continue;

    HeadParams& g = grads->head;
    VectorXd d_logits = Softmax(h.logits);
    d_logits(x->gold) -= 1.0;
    d_logits *= scale;
    g.wo.noalias() += d_logits * h.out2.transpose();
    g.bo += d_logits;
    VectorXd d2 = (net.head.wo.transpose() * d_logits).cwiseProduct(h.mask2);
    d2 = (h.pre2.array() > 0.0).select(d2, 0.0);
    g.w2.noalias() += d2 * h.out1.transpose();
    g.b2 += d2;
    VectorXd d1 = (net.head.w2.transpose() * d2).cwiseProduct(h.mask1);
    d1 = (h.pre1.array() > 0.0).select(d1, 0.0);
    g.w1.leftCols(enc_dim).noalias() += d1 * h.input_dense.transpose();
    for (int idx : x->features) g.w1.col(enc_dim + idx) += d1;
    g.b1 += d1;
    const VectorXd d_enc = net.head.w1.leftCols(enc_dim).transpose() * d1;
    BackwardEncoder(t1, d_enc.head(enc1), net.arg1, grads->arg1);
    BackwardEncoder(t2, d_enc.tail(enc_dim - enc1), net.arg2, grads->arg2);
  }
  return total * scale;
}

double MeanCrossEntropy(const Network& net, std::span<const Instance> data) {
  std::vector<const Instance*> ptrs;
  ptrs.reserve(data.size());
  for (const Instance& x : data) ptrs.push_back(&x);
  Rng unused(0);
  return LossAndGradients(net, ptrs, unused, nullptr, /*train_mode=*/false);
}

void SgdStep(Network& params, const Network& grads, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw Error("sgd: learning rate must be positive");
  }
  auto p = Tensors(params);
  auto g = Tensors(const_cast<Network&>(grads));
  if (p.size() != g.size()) throw Error("sgd: gradient shape mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].size() != g[i].size()) throw Error("sgd: gradient shape mismatch");
    for (Eigen::Index j = 0; j < g[i].size(); ++j) {
      if (!std::isfinite(g[i].data[j])) throw Error("diverged");
    }
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (Eigen::Index j = 0; j < p[i].size(); ++j) {
      p[i].data[j] -= lr * g[i].data[j];
    }
  }
}

}  // namespace discsense
