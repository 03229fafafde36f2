#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "gradcheck.hpp"
#include "wiretap/error.hpp"
#include "wiretap/neural.hpp"

using namespace wiretap;
using namespace wiretap::nn;

namespace {

Mlp small_net(RngStream& rng, std::size_t in = 3, std::size_t hidden = 5, std::size_t out = 4) {
  const std::vector<std::size_t> dims{in, hidden, out};
  const std::vector<Activation> acts{Activation::relu, Activation::linear};
  return Mlp::glorot(dims, acts, rng);
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("analytic gradients match central differences through the normalization layer") {
  RngStream rng(17, "gradcheck");
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 5;
    auto chain = gradcheck::random_chain(n, 3 + trial % 4, 4 + trial % 3, 6, 5, rng);
    const double err = gradcheck::relative_error(chain.analytic(), chain.numeric());
    CHECK(err <= 1e-5);
  }
}

TEST_CASE("input gradient matches central differences") {
  RngStream rng(3, "input-grad");
  const auto net = small_net(rng);
  Matrix x(3, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Matrix w(4, 4);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  auto loss = [&](const Matrix& in) { return net.forward(in).output.cwiseProduct(w).sum(); };
  const auto g = net.backward(net.forward(x), w);
  const double h = 1e-6;
  std::vector<double> a, f;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix up = x, down = x;
    up.data()[i] += h;
    down.data()[i] -= h;
    f.push_back((loss(up) - loss(down)) / (2 * h));
    a.push_back(g.input.data()[i]);
  }
  CHECK(gradcheck::relative_error(a, f) <= 1e-6);
}

TEST_CASE("one-hot forward and backward agree with the dense path") {
  RngStream rng(5, "onehot");
  const auto net = small_net(rng, 6, 5, 3);
  const std::vector<std::uint32_t> classes{0, 5, 2, 2};
  Matrix dense = Matrix::Zero(6, 4);
  for (std::size_t j = 0; j < classes.size(); ++j) dense(classes[j], static_cast<Eigen::Index>(j)) = 1.0;
  const auto a = net.forward_one_hot(classes);
  const auto b = net.forward(dense);
  CHECK((a.output - b.output).norm() < 1e-12);
  Matrix g = Matrix::Ones(3, 4);
  const auto ga = net.backward(a, g), gb = net.backward(b, g);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK((ga.weight[l] - gb.weight[l]).norm() < 1e-12);
    CHECK((ga.bias[l] - gb.bias[l]).norm() < 1e-12);
  }
  CHECK(ga.input.size() == 0);
  const std::vector<std::uint32_t> bad{6};
  CHECK_THROWS_AS(net.forward_one_hot(bad), Error);
}

TEST_CASE("forward rejects mismatched input and stays finite") {
  RngStream rng(1, "dims");
  const auto net = small_net(rng);
  CHECK(net.dims() == std::vector<std::size_t>{3, 5, 4});
  CHECK(net.parameter_count() == 3u * 5 + 5 + 5 * 4 + 4);
  CHECK_THROWS_AS(net.forward(Matrix(Matrix::Zero(2, 1))), Error);
  CHECK(net.forward(Matrix(Matrix::Constant(3, 2, 1e3))).output.allFinite());
  DenseLayer a{Matrix::Zero(4, 3), Vector::Zero(4), Activation::relu};
  DenseLayer b{Matrix::Zero(2, 5), Vector::Zero(2), Activation::linear};
  CHECK_THROWS_AS(Mlp({a, b}), Error);
}

TEST_CASE("adam matches a hand-computed two-step update") {
  // Single scalar parameter: w = 1, gradient 0.5 then -0.2.
  Mlp net({DenseLayer{Matrix::Constant(1, 1, 1.0), Vector::Zero(1), Activation::linear}});
  auto state = AdamState::for_network(net, 0.1);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
  double w = 1.0, m = 0.0, v = 0.0;
  int t = 0;
  for (double grad : {0.5, -0.2}) {
    Gradients g;
    g.weight = {Matrix::Constant(1, 1, grad)};
    g.bias = {Vector::Zero(1)};
    adam_step(net, g, state);
    ++t;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double mhat = m / (1 - std::pow(b1, t)), vhat = v / (1 - std::pow(b2, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(w).epsilon(1e-12));
  }
  CHECK(state.step == 2u);
  CHECK(net.layers()[0].bias(0) == 0.0);  // zero gradient, zero moment: no movement
}

TEST_CASE("softmax is a distribution and invariant to shifts") {
  Vector logits(4);
  logits << 1.0, -2.0, 0.5, 3.0;
  const auto p = softmax(logits);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK((p(i) > 0.0 && p(i) < 1.0));
  const auto shifted = softmax((logits.array() + 1000.0).matrix());
  CHECK((p - shifted).norm() < 1e-12);
  const auto x = softmax_xent(logits, 3);
  CHECK(x.loss == doctest::Approx(-std::log(p(3))));
  CHECK(x.grad(3) == doctest::Approx(p(3) - 1.0));
  CHECK_THROWS_AS(softmax_xent(logits, 4), Error);
}

TEST_CASE("batched cross-entropy is the mean of per-sample losses") {
  Matrix logits(3, 2);
  logits << 1, 0, 2, 0, 3, 5;
  const std::vector<std::uint32_t> labels{2, 1};
  Matrix grad;
  const double loss = softmax_xent_batch(logits, labels, &grad);
  const auto a = softmax_xent(logits.col(0), 2), b = softmax_xent(logits.col(1), 1);
  CHECK(loss == doctest::Approx(0.5 * (a.loss + b.loss)));
  CHECK((grad.col(0) - 0.5 * a.grad).norm() < 1e-12);
  CHECK((grad.col(1) - 0.5 * b.grad).norm() < 1e-12);
}

TEST_CASE("argmax breaks ties toward the smallest index") {
  Vector v(5);
  v << 1, 3, 3, 2, 3;
  CHECK(argmax(v) == 1u);
  CHECK(argmax(Vector::Zero(4)) == 0u);
}

TEST_CASE("normalization meets the power invariant and rejects zero vectors") {
  RngStream rng(2, "norm");
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> raw(1 + i % 16);
    for (double& x : raw) x = rng.normal() * std::pow(10.0, static_cast<double>(i % 7) - 3.0);
    const auto cw = normalize_power(raw, static_cast<double>(raw.size()));
    CHECK(std::abs(cw.energy() - static_cast<double>(raw.size())) <= 1e-9);
    CHECK(cw.satisfies_power_constraint());
  }
  const std::vector<double> zero(4, 0.0);
  CHECK_THROWS_AS(normalize_power(zero, 4.0), Error);
}

TEST_CASE("model files round-trip exactly and reject corrupt headers") {
  RngStream rng(8, "persist");
  const auto net = small_net(rng);
  std::stringstream buf;
  save(net, buf);
  const auto bytes = buf.str();
  CHECK(bytes.substr(0, 7) == "WTAPMLP");
  // header 8 + version 4 + layers 4 + dims 12 + activations 2, then doubles
  CHECK(bytes.size() == 30u + 8u * net.parameter_count());
  std::stringstream in(bytes);
  CHECK(load(in) == net);

  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream bad_in(bad);
  CHECK_THROWS_AS(load(bad_in), Error);
  std::string version = bytes;
  version[8] = 2;
  std::stringstream version_in(version);
  CHECK_THROWS_AS(load(version_in), Error);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load(truncated), Error);
  CHECK_THROWS_AS(load_file("/nonexistent/model.wnet"), Error);
}

TEST_CASE("initialization is deterministic per stream") {
  RngStream a(4, "init"), b(4, "init"), c(5, "init");
  const auto na = small_net(a), nb = small_net(b), nc = small_net(c);
  CHECK(na == nb);
  CHECK_FALSE(na == nc);
  // Glorot bound sqrt(6 / (fan_in + fan_out)).
  const double bound = std::sqrt(6.0 / (3 + 5));
  CHECK(na.layers()[0].weight.cwiseAbs().maxCoeff() <= bound);
  CHECK(na.layers()[0].bias.isZero());
}

}  // TEST_SUITE
