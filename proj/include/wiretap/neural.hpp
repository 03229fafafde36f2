#pragma once

// Small feed-forward networks with explicit reverse-mode gradients and Adam.
// Batches are column-major: one column per sample.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "wiretap/channel.hpp"

namespace wiretap::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { linear = 0, relu = 1 };

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::linear;
};

struct ForwardCache {
  std::vector<Matrix> inputs;  // input of each layer; inputs[0] empty for one-hot batches
  std::vector<Matrix> pre;     // pre-activation of each layer
  std::vector<std::uint32_t> one_hot;
  Matrix output;

  Eigen::Index batch() const noexcept { return output.cols(); }
};

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
  Matrix input;  // d loss / d input; empty when the input was one-hot
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // Glorot-uniform weights, zero biases. dims has one more entry than acts.
  static Mlp glorot(std::span<const std::size_t> dims, std::span<const Activation> acts,
                    RngStream& rng);

  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<std::size_t> dims() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  ForwardCache forward(const Matrix& input) const;
  // First layer input is the one-hot encoding of each class index.
  ForwardCache forward_one_hot(std::span<const std::uint32_t> classes) const;
  Vector forward(const Vector& input) const;
  Matrix predict(const Matrix& input) const;

  // Gradients of a scalar loss given d loss / d output for the cached batch.
  Gradients backward(const ForwardCache& cache, const Matrix& output_grad) const;

  bool operator==(const Mlp& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

Vector relu(const Vector& x);

struct AdamState {
  std::vector<Matrix> m_weight, v_weight;
  std::vector<Vector> m_bias, v_bias;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_network(const Mlp& net, double learning_rate);
};

// Descent step: params -= lr * mhat / (sqrt(vhat) + eps).
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

struct SoftmaxXent {
  double loss = 0.0;
  Vector grad;  // p - one_hot(label)
};

Vector softmax(const Vector& logits);
SoftmaxXent softmax_xent(const Vector& logits, std::size_t label);
// Mean cross-entropy over the batch; grad (if given) is d mean / d logits.
double softmax_xent_batch(const Matrix& logits, std::span<const std::uint32_t> labels,
                          Matrix* grad);
// Index of the largest entry, smallest index on ties.
std::size_t argmax(const Eigen::Ref<const Vector>& v);

// Scales raw so that its squared norm is exactly nP.
Codeword normalize_power(std::span<const double> raw, double n_power);
Matrix normalize_power_batch(const Matrix& raw, double n_power);
// Backpropagates through the column-wise normalization.
Matrix normalize_power_backward(const Matrix& raw, const Matrix& grad_out, double n_power);

// Binary model format, little-endian:
//   "WTAPMLP\0" | u32 version=1 | u32 L | u32 dims[L+1] | u8 activation[L]
//   | per layer: f64 weight[out*in] row-major, f64 bias[out]
inline constexpr std::uint32_t kModelFormatVersion = 1;
void save(const Mlp& net, std::ostream& out);
Mlp load(std::istream& in);
void save_file(const Mlp& net, const std::filesystem::path& path);
Mlp load_file(const std::filesystem::path& path);

}  // namespace wiretap::nn
