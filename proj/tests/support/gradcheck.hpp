#pragma once

// Central finite-difference check of the analytic gradients of a small
// autoencoder chain: encoder -> power normalization -> fixed noise ->
// decoder -> mean softmax cross-entropy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "wiretap/channel.hpp"
#include "wiretap/neural.hpp"

namespace gradcheck {

using wiretap::nn::Matrix;
using wiretap::nn::Mlp;

struct Chain {
  Mlp encoder, decoder;
  Matrix input;  // dense encoder input, one column per sample
  Matrix noise;
  std::vector<std::uint32_t> labels;
  double n_power = 1.0;

  double loss() const {
    const auto e = encoder.forward(input);
    const Matrix y = wiretap::nn::normalize_power_batch(e.output, n_power) + noise;
    return wiretap::nn::softmax_xent_batch(decoder.forward(y).output, labels, nullptr);
  }

  // Analytic gradients of both networks, flattened as weights then biases per layer.
  std::vector<double> analytic() const {
    const auto e = encoder.forward(input);
    const Matrix y = wiretap::nn::normalize_power_batch(e.output, n_power) + noise;
    const auto d = decoder.forward(y);
    Matrix g;
    wiretap::nn::softmax_xent_batch(d.output, labels, &g);
    const auto gd = decoder.backward(d, g);
    const Matrix gx = wiretap::nn::normalize_power_backward(e.output, gd.input, n_power);
    const auto ge = encoder.backward(e, gx);
    std::vector<double> flat;
    for (const auto* grads : {&ge, &gd})
      for (std::size_t l = 0; l < grads->weight.size(); ++l) {
        flat.insert(flat.end(), grads->weight[l].data(), grads->weight[l].data() + grads->weight[l].size());
        flat.insert(flat.end(), grads->bias[l].data(), grads->bias[l].data() + grads->bias[l].size());
      }
    return flat;
  }

  std::vector<double> numeric(double h = 1e-6) {
    std::vector<double> flat;
    for (auto* net : {&encoder, &decoder})
      for (auto& layer : net->layers())
        for (auto* block : {static_cast<double*>(layer.weight.data()), static_cast<double*>(layer.bias.data())}) {
          const auto size = block == layer.weight.data() ? layer.weight.size() : layer.bias.size();
          for (Eigen::Index i = 0; i < size; ++i) {
            const double saved = block[i];
            block[i] = saved + h;
            const double up = loss();
            block[i] = saved - h;
            const double down = loss();
            block[i] = saved;
            flat.push_back((up - down) / (2.0 * h));
          }
        }
    return flat;
  }
};

inline Chain random_chain(std::size_t n, std::size_t in_dim, std::size_t classes, std::size_t width,
                          std::size_t batch, wiretap::RngStream& rng) {
  using wiretap::nn::Activation;
  const std::vector<std::size_t> enc_dims{in_dim, width, n}, dec_dims{n, width, classes};
  const std::vector<Activation> acts{Activation::relu, Activation::linear};
  Chain c;
  c.encoder = Mlp::glorot(enc_dims, acts, rng);
  c.decoder = Mlp::glorot(dec_dims, acts, rng);
  // Nonzero biases so the check also exercises bias gradients away from zero.
  for (auto* net : {&c.encoder, &c.decoder})
    for (auto& layer : net->layers())
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.1 * rng.normal();
  c.input.resize(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(batch));
  c.noise.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(batch));
  for (Eigen::Index j = 0; j < c.input.cols(); ++j) {
    for (Eigen::Index i = 0; i < c.input.rows(); ++i) c.input(i, j) = rng.normal();
    for (Eigen::Index i = 0; i < c.noise.rows(); ++i) c.noise(i, j) = 0.3 * rng.normal();
    c.labels.push_back(rng.uniform_below(static_cast<std::uint32_t>(classes)));
  }
  c.n_power = static_cast<double>(n);
  return c;
}

// ||a - b|| / max(||a|| + ||b||, tiny).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-300);
}

}  // namespace gradcheck
