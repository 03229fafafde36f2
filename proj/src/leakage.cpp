#include "wiretap/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "wiretap/hashing.hpp"
#include "wiretap/secrecy.hpp"

namespace wiretap {

namespace {

constexpr double kLog2e = 1.4426950408889634;

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double log_sum_exp(const Eigen::Ref<const nn::Vector>& v) {
  const double hi = v.maxCoeff();
  return hi + std::log((v.array() - hi).exp().sum());
}

}  // namespace

MineConfig MineConfig::paper() { return MineConfig{}; }

MineConfig MineConfig::fast() {
  MineConfig c;
  c.profile = "fast";
  c.hidden_layers = 2;
  c.width = 64;
  c.epochs = 400;
  c.messages_per_epoch = 20'000;
  c.batch_size = 2'500;
  c.window = 100;
  return c;
}

MineConfig MineConfig::for_profile(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "fast") return fast();
  throw Error(ErrorKind::configuration, "unknown MINE profile '" + name + "' (fast|paper)");
}

MineConfig MineConfig::reduced() const {
  MineConfig c = *this;
  c.profile = profile + "-ranking";
  c.epochs = profile == "paper" ? 2'000 : std::max<std::size_t>(window + 1, epochs / 2);
  return c;
}

void MineConfig::validate() const {
  if (hidden_layers == 0 || width == 0)
    throw Error(ErrorKind::configuration, "MINE network needs at least one hidden layer");
  if (epochs == 0 || messages_per_epoch == 0 || batch_size == 0)
    throw Error(ErrorKind::configuration, "MINE epochs, messages and batch size must be positive");
  if (messages_per_epoch % batch_size != 0)
    throw Error(ErrorKind::configuration, "MINE batch size must divide messages per epoch");
  if (window == 0) throw Error(ErrorKind::configuration, "smoothing window must be >= 1");
  if (window > epochs)
    throw Error(ErrorKind::configuration, "smoothing window exceeds the number of epochs");
  if (!(ema_rate >= 0.0 && ema_rate < 1.0))
    throw Error(ErrorKind::configuration, "ema rate must lie in [0,1)");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw Error(ErrorKind::configuration, "tail fraction must lie in (0,1]");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::configuration, "learning rate must be > 0");
}

std::string MineConfig::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << "profile=" << profile << ";hidden_layers=" << hidden_layers << ";width=" << width
      << ";learning_rate=" << learning_rate << ";epochs=" << epochs
      << ";messages_per_epoch=" << messages_per_epoch << ";batch_size=" << batch_size
      << ";window=" << window << ";ema_rate=" << ema_rate << ";tail_fraction=" << tail_fraction
      << ";seed=" << seed;
  return out.str();
}

JointSamples sample_joint(const WiretapCode& code, AvcChannel& eve, std::size_t count,
                          RngStream& rng) {
  if (count == 0) throw Error(ErrorKind::too_few_samples, "need at least one sample");
  const unsigned k = code.k();
  const unsigned n = code.n();
  JointSamples out;
  out.messages.resize(k, static_cast<Eigen::Index>(count));
  out.observations.resize(n, static_cast<Eigen::Index>(count));
  out.message_ids.resize(count);
  std::vector<double> variances(n);
  for (std::size_t j = 0; j < count; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const std::uint32_t m = rng.uniform_bits(k);
    out.message_ids[j] = m;
    for (unsigned b = 0; b < k; ++b)
      out.messages(b, col) = static_cast<double>((m >> (k - 1 - b)) & 1u);
    const std::uint32_t v = inner_word(code, gf2q::BitString(m, k), rng);
    out.observations.col(col) = code.reliability().codebook().col(v);
    eve.add_noise(std::span<double>(out.observations.col(col).data(), n), variances, rng);
  }
  return out;
}

JointSamples sample_joint(const WiretapCode& code, const GaussianSpec& eve, std::size_t count,
                          RngStream& rng) {
  AvcChannel channel = AvcChannel::awgn(eve);
  return sample_joint(code, channel, count, rng);
}

JointSamples shuffle_marginal(const JointSamples& joint, RngStream& rng) {
  if (joint.size() < 2) throw Error(ErrorKind::too_few_samples, "need at least two pairs");
  std::vector<Eigen::Index> perm(joint.size());
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  JointSamples out;
  out.messages = joint.messages;
  out.message_ids = joint.message_ids;
  out.observations.resize(joint.observations.rows(), joint.observations.cols());
  for (std::size_t j = 0; j < perm.size(); ++j)
    out.observations.col(static_cast<Eigen::Index>(j)) = joint.observations.col(perm[j]);
  return out;
}

std::vector<double> smooth_trace(const std::vector<double>& trace, std::size_t window) {
  if (window == 0) throw Error(ErrorKind::configuration, "window must be >= 1");
  if (trace.size() < window)
    throw Error(ErrorKind::short_trace, "trace of length " + std::to_string(trace.size()) +
                                            " is shorter than the window " +
                                            std::to_string(window));
  std::vector<double> out;
  out.reserve(trace.size() - window + 1);
  // Each average is summed directly so no running-sum drift accumulates.
  for (std::size_t i = 0; i + window <= trace.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < i + window; ++j) s += trace[j];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

double reported_statistic(const std::vector<double>& smoothed_nats, double tail_fraction) {
  if (smoothed_nats.empty()) throw Error(ErrorKind::short_trace, "empty smoothed trace");
  const auto len = smoothed_nats.size();
  const auto tail = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(len))));
  const double best = *std::max_element(smoothed_nats.end() - static_cast<std::ptrdiff_t>(tail),
                                        smoothed_nats.end());
  return best * kLog2e;
}

LeakageEstimate mine_estimate(const JointSource& source, const MineConfig& config,
                              std::string label) {
  config.validate();
  RngStream root(config.seed, "mine");
  RngStream init = root.derive("init");
  RngStream data = root.derive("data");
  RngStream shuffle = root.derive("shuffle");

  nn::Mlp net;
  nn::AdamState adam;
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  const double log_batch = std::log(static_cast<double>(config.batch_size));
  const std::size_t batches = config.messages_per_epoch / config.batch_size;
  double log_ema = 0.0;
  bool ema_ready = false;

  LeakageEstimate est;
  est.label = std::move(label);
  est.config_hash = sha256_hex(config.describe());
  est.raw_nats.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    JointSamples joint = source(epoch, config.messages_per_epoch, data);
    if (joint.size() != config.messages_per_epoch)
      throw Error(ErrorKind::dimension, "sample source returned the wrong count");
    const JointSamples marginal = shuffle_marginal(joint, shuffle);
    const auto k = joint.messages.rows();
    const auto dim = k + joint.observations.rows();
    if (epoch == 0) {
      std::vector<std::size_t> dims{static_cast<std::size_t>(dim)};
      std::vector<nn::Activation> acts;
      for (std::size_t h = 0; h < config.hidden_layers; ++h) {
        dims.push_back(config.width);
        acts.push_back(nn::Activation::relu);
      }
      dims.push_back(1);
      acts.push_back(nn::Activation::linear);
      net = nn::Mlp::glorot(dims, acts, init);
      adam = nn::AdamState::for_network(net, config.learning_rate);
    }

    double epoch_sum = 0.0;
    nn::Matrix input(dim, 2 * batch);
    nn::Matrix grad(1, 2 * batch);
    for (std::size_t b = 0; b < batches; ++b) {
      const Eigen::Index start = static_cast<Eigen::Index>(b) * batch;
      input.topLeftCorner(k, batch) = joint.messages.middleCols(start, batch);
      input.bottomLeftCorner(dim - k, batch) = joint.observations.middleCols(start, batch);
      input.topRightCorner(k, batch) = marginal.messages.middleCols(start, batch);
      input.bottomRightCorner(dim - k, batch) = marginal.observations.middleCols(start, batch);

      const auto cache = net.forward(input);
      const nn::Vector t_joint = cache.output.leftCols(batch).transpose();
      const nn::Vector t_marg = cache.output.rightCols(batch).transpose();
      const double log_mean_exp = log_sum_exp(t_marg) - log_batch;
      const double dv = t_joint.mean() - log_mean_exp;
      if (!std::isfinite(dv))
        throw DivergenceError("MINE objective became non-finite at epoch " +
                                  std::to_string(epoch),
                              est.raw_nats);
      epoch_sum += dv;

      log_ema = ema_ready ? log_add_exp(std::log(config.ema_rate) + log_ema,
                                        std::log1p(-config.ema_rate) + log_mean_exp)
                          : log_mean_exp;
      ema_ready = true;
      // Loss = -(mean T_joint - mean exp(T_marg) / ema), ascent on the DV bound.
      grad.leftCols(batch).setConstant(-1.0 / static_cast<double>(batch));
      grad.rightCols(batch) =
          ((t_marg.array() - log_ema).exp() / static_cast<double>(batch)).matrix().transpose();
      const auto grads = net.backward(cache, grad);
      nn::adam_step(net, grads, adam);
    }
    est.raw_nats.push_back(epoch_sum / static_cast<double>(batches));
  }
  if (!net.all_finite())
    throw DivergenceError("MINE network weights became non-finite", est.raw_nats);
  est.smoothed_nats = smooth_trace(est.raw_nats, config.window);
  est.reported_bits = reported_statistic(est.smoothed_nats, config.tail_fraction);
  return est;
}

void write_trace_csv(const LeakageEstimate& est, std::size_t window,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.precision(10);
  out << "epoch,raw_estimate_nats,smoothed_nats\n";
  for (std::size_t e = 0; e < est.raw_nats.size(); ++e) {
    out << e << "," << est.raw_nats[e] << ",";
    if (e + 1 >= window && e + 1 - window < est.smoothed_nats.size())
      out << est.smoothed_nats[e + 1 - window];
    out << "\n";
  }
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

void write_summary_json(const LeakageEstimate& est, const MineConfig& config,
                        const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["label"] = est.label;
  j["reported_bits"] = est.reported_bits;
  j["reported_bits_clipped"] = est.clipped_bits();
  j["epochs"] = est.raw_nats.size();
  j["window"] = config.window;
  j["tail_fraction"] = config.tail_fraction;
  j["mine_profile"] = config.profile;
  j["config_hash"] = est.config_hash;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace wiretap
