#ifndef DISCSENSE_NN_HPP_
#define DISCSENSE_NN_HPP_

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace discsense {

using Rng = std::mt19937_64;

// One LSTM direction. Gate blocks are stacked row-wise in the order
// input, forget, output, candidate: rows [0,H), [H,2H), [2H,3H), [3H,4H).
struct LstmParams {
  Eigen::MatrixXd w;  // 4H x input_dim
  Eigen::MatrixXd u;  // 4H x H
  Eigen::VectorXd b;  // 4H

  LstmParams() = default;
  LstmParams(int input_dim, int hidden_dim);

  int input_dim() const { return static_cast<int>(w.cols()); }
  int hidden_dim() const { return static_cast<int>(u.cols()); }
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

// i = σ(W_i x + U_i h + b_i), f, o likewise, c̃ = tanh(...),
// c = f ⊙ c_prev + i ⊙ c̃, h = o ⊙ tanh(c).
LstmState LstmStep(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                   const Eigen::VectorXd& c_prev, const LstmParams& p);

struct BiLayer {
  LstmParams forward;
  LstmParams backward;
};

struct EncoderParams {
  std::vector<BiLayer> layers;

  // 2 x top hidden size.
  int output_dim() const;
  int input_dim() const;
};

struct HeadParams {
  Eigen::MatrixXd w1;  // dense1 x (encoder outputs + surface features)
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // dense2 x dense1
  Eigen::VectorXd b2;
  Eigen::MatrixXd wo;  // labels x dense2
  Eigen::VectorXd bo;
  double dropout1 = 0.0;
  double dropout2 = 0.0;
};

// Every trainable tensor of the classifier. Gradients use the same type.
struct Network {
  EncoderParams arg1;
  EncoderParams arg2;
  HeadParams head;

  int num_labels() const { return static_cast<int>(head.wo.rows()); }
  int feature_dim() const;
};

struct TensorView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

// Deterministic order: arg1 layers, arg2 layers, then head.
std::vector<TensorView> Tensors(Network& net);
// A network with identical shapes and all entries zero.
Network ZerosLike(const Network& net);

struct NetworkShape {
  int embedding_dim = 0;
  std::array<int, 3> arg1_hidden{};
  std::array<int, 3> arg2_hidden{};
  int dense1 = 0;
  int dense2 = 0;
  int feature_dim = 0;
  int num_labels = 0;
  double dropout1 = 0.0;
  double dropout2 = 0.0;
};

// Glorot-uniform weights, forget-gate bias 1, other biases 0.
Network InitNetwork(const NetworkShape& shape, Rng& rng);

// One relation prepared for the network. Argument matrices hold one
// embedding per column in token order.
struct Instance {
  Eigen::MatrixXd arg1;
  Eigen::MatrixXd arg2;
  std::vector<int> features;  // active surface-feature columns
  int gold = -1;              // -1 when unknown
};

// Final forward state concatenated with final backward state of the top layer.
Eigen::VectorXd EncodeArgument(const Eigen::MatrixXd& sequence,
                               const EncoderParams& enc);

Eigen::VectorXd Softmax(const Eigen::VectorXd& logits);

// Head forward pass. In train mode inverted dropout is applied after each
// dense activation, with masks drawn from `rng`.
Eigen::VectorXd HeadForward(const Eigen::VectorXd& arg1_vec,
                            const Eigen::VectorXd& arg2_vec,
                            const std::vector<int>& features,
                            const HeadParams& head, bool train_mode, Rng& rng);

// Eval-mode class distribution.
Eigen::VectorXd Predict(const Network& net, const Instance& x);

// Mean cross-entropy over the batch; gradients (of the mean) go to `grads`,
// which must be shaped like `net` and is overwritten. Instances with an
// unknown gold label are skipped. Embeddings are inputs, not parameters.
double LossAndGradients(const Network& net, std::span<const Instance* const> batch,
                        Rng& rng, Network* grads, bool train_mode = true);

// Mean eval-mode cross-entropy over instances with a known label.
double MeanCrossEntropy(const Network& net, std::span<const Instance> data);

// w ← w − lr·g for every tensor. Throws Error("diverged") on a non-finite
// gradient, leaving `params` untouched.
void SgdStep(Network& params, const Network& grads, double lr);

}  // namespace discsense

#endif  // DISCSENSE_NN_HPP_
