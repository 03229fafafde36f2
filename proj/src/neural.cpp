#include "wiretap/neural.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "wiretap/error.hpp"

namespace wiretap::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'W', 'T', 'A', 'P', 'M', 'L', 'P', '\0'};

void apply_activation(Matrix& m, Activation a) {
  if (a == Activation::relu) m = m.cwiseMax(0.0);
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw Error(ErrorKind::io, "truncated model file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows())
      throw Error(ErrorKind::dimension, "bias length differs from layer width");
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())
      throw Error(ErrorKind::dimension, "consecutive layer dimensions do not match");
  }
}

Mlp Mlp::glorot(std::span<const std::size_t> dims, std::span<const Activation> acts,
                RngStream& rng) {
  if (dims.size() != acts.size() + 1 || acts.empty())
    throw Error(ErrorKind::dimension, "need one activation per layer");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l < acts.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Matrix(out, in), Vector::Zero(out), acts[l]};
    for (Eigen::Index j = 0; j < in; ++j)
      for (Eigen::Index i = 0; i < out; ++i) layer.weight(i, j) = limit * (2.0 * rng.uniform() - 1.0);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d;
  if (layers_.empty()) return d;
  d.push_back(input_dim());
  for (const auto& layer : layers_) d.push_back(static_cast<std::size_t>(layer.weight.rows()));
  return d;
}

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_)
    count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return count;
}

bool Mlp::all_finite() const {
  for (const auto& layer : layers_)
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  return true;
}

ForwardCache Mlp::forward(const Matrix& input) const {
  if (static_cast<std::size_t>(input.rows()) != input_dim())
    throw Error(ErrorKind::dimension, "input length " + std::to_string(input.rows()) +
                                          " differs from network input " +
                                          std::to_string(input_dim()));
  ForwardCache cache;
  cache.inputs.reserve(layers_.size());
  cache.pre.reserve(layers_.size());
  Matrix x = input;
  for (const auto& layer : layers_) {
    Matrix z = layer.weight * x;
    z.colwise() += layer.bias;
    cache.inputs.push_back(std::move(x));
    x = z;
    apply_activation(x, layer.activation);
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(x);
  return cache;
}

ForwardCache Mlp::forward_one_hot(std::span<const std::uint32_t> classes) const {
  if (layers_.empty()) throw Error(ErrorKind::dimension, "empty network");
  const auto& first = layers_.front();
  ForwardCache cache;
  cache.one_hot.assign(classes.begin(), classes.end());
  Matrix z(first.weight.rows(), static_cast<Eigen::Index>(classes.size()));
  for (std::size_t j = 0; j < classes.size(); ++j) {
    if (classes[j] >= first.weight.cols())
      throw Error(ErrorKind::out_of_range, "class index outside the one-hot width");
    z.col(static_cast<Eigen::Index>(j)) = first.weight.col(classes[j]) + first.bias;
  }
  cache.inputs.emplace_back();
  Matrix x = z;
  apply_activation(x, first.activation);
  cache.pre.push_back(std::move(z));
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Matrix zl = layer.weight * x;
    zl.colwise() += layer.bias;
    cache.inputs.push_back(std::move(x));
    x = zl;
    apply_activation(x, layer.activation);
    cache.pre.push_back(std::move(zl));
  }
  cache.output = std::move(x);
  return cache;
}

Vector Mlp::forward(const Vector& input) const {
  return predict(Matrix(input)).col(0);
}

Matrix Mlp::predict(const Matrix& input) const {
  if (static_cast<std::size_t>(input.rows()) != input_dim())
    throw Error(ErrorKind::dimension, "input length differs from network input");
  Matrix x = input;
  for (const auto& layer : layers_) {
    Matrix z = layer.weight * x;
    z.colwise() += layer.bias;
    apply_activation(z, layer.activation);
    x = std::move(z);
  }
  return x;
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& output_grad) const {
  if (cache.pre.size() != layers_.size() || output_grad.rows() != cache.output.rows() ||
      output_grad.cols() != cache.output.cols())
    throw Error(ErrorKind::dimension, "gradient does not match the cached forward pass");
  Gradients g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());
  Matrix delta = output_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    if (cache.pre[l].rows() != layer.weight.rows())
      throw Error(ErrorKind::dimension, "stale forward cache");
    if (layer.activation == Activation::relu)
      delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    g.bias[l] = delta.rowwise().sum();
    if (l == 0 && !cache.one_hot.empty()) {
      g.weight[0] = Matrix::Zero(layer.weight.rows(), layer.weight.cols());
      for (std::size_t j = 0; j < cache.one_hot.size(); ++j)
        g.weight[0].col(cache.one_hot[j]) += delta.col(static_cast<Eigen::Index>(j));
      break;
    }
    g.weight[l].noalias() = delta * cache.inputs[l].transpose();
    Matrix next = layer.weight.transpose() * delta;
    if (l == 0) {
      g.input = std::move(next);
    } else {
      delta = std::move(next);
    }
  }
  return g;
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
        a.weight.cols() != b.weight.cols() || a.weight != b.weight || a.bias != b.bias)
      return false;
  }
  return true;
}

Vector relu(const Vector& x) { return x.cwiseMax(0.0); }

AdamState AdamState::for_network(const Mlp& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const auto& layer : net.layers()) {
    s.m_weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
    s.v_weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
    s.m_bias.push_back(Vector::Zero(layer.bias.size()));
    s.v_bias.push_back(Vector::Zero(layer.bias.size()));
  }
  return s;
}

namespace {

template <typename P>
void adam_update(P& param, const P& grad, P& m, P& v, double b1, double b2, double lr_t,
                 double eps) {
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
  param.array() -= lr_t * m.array() / (v.array().sqrt() + eps);
}

}  // namespace

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  auto& layers = net.layers();
  if (grads.weight.size() != layers.size() || state.m_weight.size() != layers.size())
    throw Error(ErrorKind::dimension, "optimizer state does not match the network");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (grads.weight[l].rows() != layers[l].weight.rows() ||
        grads.weight[l].cols() != layers[l].weight.cols() ||
        grads.bias[l].size() != layers[l].bias.size() ||
        state.m_weight[l].rows() != layers[l].weight.rows() ||
        state.m_weight[l].cols() != layers[l].weight.cols())
      throw Error(ErrorKind::dimension, "gradient shape does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  // Bias correction folded into the step size; epsilon applies to sqrt(vhat).
  const double lr_t = state.learning_rate * std::sqrt(c2) / c1;
  const double eps_t = state.epsilon * std::sqrt(c2);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_update(layers[l].weight, grads.weight[l], state.m_weight[l], state.v_weight[l],
                state.beta1, state.beta2, lr_t, eps_t);
    adam_update(layers[l].bias, grads.bias[l], state.m_bias[l], state.v_bias[l], state.beta1,
                state.beta2, lr_t, eps_t);
  }
}

Vector softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  Vector p = (logits.array() - top).exp().matrix();
  return p / p.sum();
}

SoftmaxXent softmax_xent(const Vector& logits, std::size_t label) {
  if (label >= static_cast<std::size_t>(logits.size()))
    throw Error(ErrorKind::out_of_range, "label outside the class range");
  const double top = logits.maxCoeff();
  const double log_z = top + std::log((logits.array() - top).exp().sum());
  SoftmaxXent out;
  out.loss = log_z - logits(static_cast<Eigen::Index>(label));
  out.grad = (logits.array() - log_z).exp().matrix();
  out.grad(static_cast<Eigen::Index>(label)) -= 1.0;
  return out;
}

double softmax_xent_batch(const Matrix& logits, std::span<const std::uint32_t> labels,
                          Matrix* grad) {
  if (static_cast<std::size_t>(logits.cols()) != labels.size())
    throw Error(ErrorKind::dimension, "one label per column expected");
  const auto batch = logits.cols();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  if (grad) grad->resize(logits.rows(), batch);
  double total = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto col = logits.col(j);
    const double top = col.maxCoeff();
    const double log_z = top + std::log((col.array() - top).exp().sum());
    const auto label = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(j)]);
    if (label >= logits.rows()) throw Error(ErrorKind::out_of_range, "label outside class range");
    total += log_z - col(label);
    if (grad) {
      grad->col(j) = ((col.array() - log_z).exp() * inv_batch).matrix();
      (*grad)(label, j) -= inv_batch;
    }
  }
  return total * inv_batch;
}

std::size_t argmax(const Eigen::Ref<const Vector>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<std::size_t>(best);
}

Codeword normalize_power(std::span<const double> raw, double n_power) {
  Eigen::Map<const Vector> r(raw.data(), static_cast<Eigen::Index>(raw.size()));
  const Matrix x = normalize_power_batch(Matrix(r), n_power);
  Codeword cw;
  cw.samples.assign(x.data(), x.data() + x.size());
  cw.power_budget = n_power / static_cast<double>(raw.size());
  return cw;
}

Matrix normalize_power_batch(const Matrix& raw, double n_power) {
  Matrix x(raw.rows(), raw.cols());
  const double scale = std::sqrt(n_power);
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double norm = raw.col(j).norm();
    if (!(norm >= 1e-12)) throw Error(ErrorKind::out_of_range, "cannot normalize a zero vector");
    x.col(j) = raw.col(j) * (scale / norm);
  }
  return x;
}

Matrix normalize_power_backward(const Matrix& raw, const Matrix& grad_out, double n_power) {
  // x = c r / |r|  =>  dL/dr = (c / |r|) (g - u (u . g)),  u = r / |r|
  Matrix grad(raw.rows(), raw.cols());
  const double scale = std::sqrt(n_power);
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double norm = raw.col(j).norm();
    const Vector u = raw.col(j) / norm;
    const auto g = grad_out.col(j);
    grad.col(j) = (scale / norm) * (g - u * u.dot(g));
  }
  return grad;
}

void save(const Mlp& net, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kModelFormatVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.num_layers()));
  for (auto d : net.dims()) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (const auto& layer : net.layers())
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(layer.activation));
  for (const auto& layer : net.layers()) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) write_le<double>(out, layer.weight(i, j));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) write_le<double>(out, layer.bias(i));
  }
  if (!out) throw Error(ErrorKind::io, "failed to write model");
}

Mlp load(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw Error(ErrorKind::io, "not a model file (bad magic)");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kModelFormatVersion)
    throw Error(ErrorKind::io, "unsupported model format version " + std::to_string(version));
  const auto count = read_le<std::uint32_t>(in);
  if (count == 0 || count > 64) throw Error(ErrorKind::io, "implausible layer count");
  std::vector<std::uint32_t> dims(count + 1);
  for (auto& d : dims) d = read_le<std::uint32_t>(in);
  std::vector<DenseLayer> layers(count);
  for (auto& layer : layers) {
    const auto tag = read_le<std::uint8_t>(in);
    if (tag > 1) throw Error(ErrorKind::io, "unknown activation tag");
    layer.activation = static_cast<Activation>(tag);
  }
  for (std::uint32_t l = 0; l < count; ++l) {
    auto& layer = layers[l];
    layer.weight.resize(dims[l + 1], dims[l]);
    layer.bias.resize(dims[l + 1]);
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = read_le<double>(in);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = read_le<double>(in);
  }
  return Mlp(std::move(layers));
}

void save_file(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  save(net, out);
}

Mlp load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::missing_model, "cannot open " + path.string());
  return load(in);
}

}  // namespace wiretap::nn
