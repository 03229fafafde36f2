#include "wiretap/reliability.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "wiretap/error.hpp"
#include "wiretap/hashing.hpp"
#include "wiretap/parallel.hpp"

namespace wiretap {

Profile parse_profile(const std::string& name) {
  if (name == "fast") return Profile::fast;
  if (name == "paper") return Profile::paper;
  throw Error(ErrorKind::configuration, "unknown profile '" + name + "' (fast|paper)");
}

std::string to_string(Profile p) { return p == Profile::fast ? "fast" : "paper"; }

unsigned ReliabilityConfig::default_q(unsigned n) { return n == 16 ? n - 2 : n - 1; }

ReliabilityConfig ReliabilityConfig::for_profile(unsigned n, Profile profile,
                                                 std::uint64_t seed) {
  ReliabilityConfig c;
  c.n = n;
  c.q = n >= 2 ? default_q(n) : 0;
  c.seed = seed;
  if (profile == Profile::paper) {
    c.epochs = 600;
    c.messages_per_epoch = 100'000;
  } else {
    c.epochs = 100;
    c.messages_per_epoch = 10'000;
  }
  c.batch_size = 1'000;
  c.learning_rate = 1e-3;
  return c;
}

void ReliabilityConfig::validate() const {
  if (n < 1) throw Error(ErrorKind::configuration, "blocklength n must be >= 1");
  if (q < 1 || q > 16) throw Error(ErrorKind::configuration, "q must lie in [1,16]");
  if (epochs == 0 || messages_per_epoch == 0 || batch_size == 0)
    throw Error(ErrorKind::configuration, "epochs, messages and batch size must be positive");
  if (messages_per_epoch % batch_size != 0)
    throw Error(ErrorKind::configuration, "batch size must divide messages per epoch");
  if (!(learning_rate > 0.0) || !(power > 0.0))
    throw Error(ErrorKind::configuration, "learning rate and power must be positive");
  const double q_count = static_cast<double>(num_messages());
  const double w = static_cast<double>(width());
  // Parameters, Adam moments and one gradient copy: 4 doubles per parameter.
  const double params = q_count * w + w * n + w * n + w * q_count + 2 * w + n + q_count;
  if (params * 4 * sizeof(double) > static_cast<double>(memory_budget_bytes))
    throw Error(ErrorKind::configuration, "Q = 2^" + std::to_string(q) +
                                              " exceeds the configured memory budget");
}

ReliabilityCode::ReliabilityCode(nn::Mlp encoder, nn::Mlp decoder, ReliabilityConfig config,
                                 std::vector<double> loss_trace)
    : encoder_(std::move(encoder)),
      decoder_(std::move(decoder)),
      config_(config),
      loss_trace_(std::move(loss_trace)) {
  if (encoder_.input_dim() != config_.num_messages() || encoder_.output_dim() != config_.n ||
      decoder_.input_dim() != config_.n || decoder_.output_dim() != config_.num_messages())
    throw Error(ErrorKind::dimension, "encoder/decoder shapes do not match (n, q)");
  std::vector<std::uint32_t> all(config_.num_messages());
  for (std::uint32_t v = 0; v < all.size(); ++v) all[v] = v;
  const auto cache = encoder_.forward_one_hot(all);
  codebook_ = nn::normalize_power_batch(cache.output, config_.n * config_.power);
}

double ReliabilityCode::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < codebook_.cols(); ++a)
    for (Eigen::Index b = a + 1; b < codebook_.cols(); ++b)
      best = std::min(best, (codebook_.col(a) - codebook_.col(b)).norm());
  return best;
}

std::string ReliabilityCode::content_hash() const {
  std::ostringstream bytes;
  nn::save(encoder_, bytes);
  nn::save(decoder_, bytes);
  return sha256_hex(bytes.str());
}

ReliabilityCode train(const ReliabilityConfig& config, RngStream& rng,
                      const EpochObserver& observer) {
  config.validate();
  const std::size_t n = config.n;
  const std::size_t q_count = config.num_messages();
  const std::size_t width = config.width();
  const double n_power = static_cast<double>(n) * config.power;
  const double sigma = std::sqrt(snr_to_variance(config.snr_db));

  RngStream init = rng.derive("init");
  const std::array<std::size_t, 3> enc_dims{q_count, width, n};
  const std::array<std::size_t, 3> dec_dims{n, width, q_count};
  const std::array<nn::Activation, 2> acts{nn::Activation::relu, nn::Activation::linear};
  nn::Mlp encoder = nn::Mlp::glorot(enc_dims, acts, init);
  // A one-hot class whose hidden column has no positive weight starts with
  // every ReLU off: its codeword is the output bias for all such classes and
  // no gradient reaches it. Redraw those columns from the same distribution.
  {
    auto& first = encoder.layers().front().weight;
    const double limit = std::sqrt(6.0 / static_cast<double>(q_count + width));
    for (Eigen::Index j = 0; j < first.cols(); ++j)
      while (first.col(j).maxCoeff() <= 0.0)
        for (Eigen::Index i = 0; i < first.rows(); ++i) first(i, j) = limit * (2.0 * init.uniform() - 1.0);
  }
  nn::Mlp decoder = nn::Mlp::glorot(dec_dims, acts, init);
  auto enc_state = nn::AdamState::for_network(encoder, config.learning_rate);
  auto dec_state = nn::AdamState::for_network(decoder, config.learning_rate);

  RngStream data = rng.derive("data");
  const std::size_t batches = config.messages_per_epoch / config.batch_size;
  std::vector<std::uint32_t> labels(config.batch_size);
  std::vector<double> trace;
  trace.reserve(config.epochs);
  nn::Matrix logits_grad;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      for (auto& v : labels) v = data.uniform_below(static_cast<std::uint32_t>(q_count));
      const auto enc_cache = encoder.forward_one_hot(labels);
      nn::Matrix received = nn::normalize_power_batch(enc_cache.output, n_power);
      for (Eigen::Index j = 0; j < received.cols(); ++j)
        for (Eigen::Index t = 0; t < received.rows(); ++t) received(t, j) += sigma * data.normal();

      const auto dec_cache = decoder.forward(received);
      const double loss = nn::softmax_xent_batch(dec_cache.output, labels, &logits_grad);
      if (!std::isfinite(loss))
        throw Error(ErrorKind::divergence, "training loss became non-finite at epoch " +
                                               std::to_string(epoch));
      epoch_loss += loss;

      auto dec_grads = decoder.backward(dec_cache, logits_grad);
      // Additive noise passes the gradient through unchanged.
      const nn::Matrix raw_grad =
          nn::normalize_power_backward(enc_cache.output, dec_grads.input, n_power);
      auto enc_grads = encoder.backward(enc_cache, raw_grad);
      nn::adam_step(decoder, dec_grads, dec_state);
      nn::adam_step(encoder, enc_grads, enc_state);
    }
    epoch_loss /= static_cast<double>(batches);
    trace.push_back(epoch_loss);
    if (observer) observer(epoch, epoch_loss);
  }
  if (!encoder.all_finite() || !decoder.all_finite())
    throw Error(ErrorKind::divergence, "trained weights are not finite");
  return ReliabilityCode(std::move(encoder), std::move(decoder), config, std::move(trace));
}

Codeword encode0(const ReliabilityCode& code, std::uint32_t v) {
  if (v >= code.num_messages())
    throw Error(ErrorKind::out_of_range, "inner word " + std::to_string(v) + " outside [0, 2^q)");
  const auto col = code.codebook().col(v);
  return Codeword{std::vector<double>(col.data(), col.data() + col.size()), code.config().power};
}

std::uint32_t decode0(const ReliabilityCode& code, std::span<const double> y) {
  if (y.size() != code.n())
    throw Error(ErrorKind::dimension, "received vector must have length n");
  const nn::Vector input = Eigen::Map<const nn::Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  return static_cast<std::uint32_t>(nn::argmax(code.decoder().forward(input)));
}

std::vector<std::uint32_t> decode0_batch(const ReliabilityCode& code, const nn::Matrix& y) {
  const nn::Matrix logits = code.decoder().predict(y);
  std::vector<std::uint32_t> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index j = 0; j < logits.cols(); ++j)
    out[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(nn::argmax(logits.col(j)));
  return out;
}

Proportion estimate_pe0(const ReliabilityCode& code, const AvcChannel& channel,
                        std::uint64_t trials, const RngStream& rng) {
  if (trials == 0) throw Error(ErrorKind::out_of_range, "at least one trial is required");
  const std::uint64_t shards = (trials + kShardTrials - 1) / kShardTrials;
  std::vector<std::uint64_t> errors(shards, 0);
  parallel_for(shards, [&](std::size_t s) {
    RngStream stream = rng.derive("pe0-shard-" + std::to_string(s));
    AvcChannel local = channel;
    local.advance(s * kShardTrials);
    const std::uint64_t begin = s * kShardTrials;
    const std::uint64_t count = std::min(kShardTrials, trials - begin);
    constexpr std::uint64_t kChunk = 4096;
    std::vector<std::uint32_t> sent;
    std::vector<double> variances(code.n());
    for (std::uint64_t done = 0; done < count; done += kChunk) {
      const auto len = static_cast<Eigen::Index>(std::min(kChunk, count - done));
      nn::Matrix y(code.n(), len);
      sent.resize(static_cast<std::size_t>(len));
      for (Eigen::Index j = 0; j < len; ++j) {
        const auto v = stream.uniform_below(code.num_messages());
        sent[static_cast<std::size_t>(j)] = v;
        y.col(j) = code.codebook().col(v);
        local.add_noise(std::span<double>(y.col(j).data(), code.n()), variances, stream);
      }
      const auto decoded = decode0_batch(code, y);
      for (std::size_t j = 0; j < decoded.size(); ++j)
        if (decoded[j] != sent[j]) ++errors[s];
    }
  });
  std::uint64_t total = 0;
  for (auto e : errors) total += e;
  return wilson(total, trials);
}

Proportion estimate_pe0(const ReliabilityCode& code, double snr_db, std::uint64_t trials,
                        const RngStream& rng) {
  return estimate_pe0(code, AvcChannel::awgn(GaussianSpec::from_snr_db(snr_db)), trials, rng);
}

std::string code_stem(unsigned n, unsigned q) {
  return "n" + std::to_string(n) + "_q" + std::to_string(q);
}

CodeFiles code_files(const std::filesystem::path& dir, unsigned n, unsigned q) {
  const auto stem = code_stem(n, q);
  return {dir / (stem + ".enc.wnet"), dir / (stem + ".dec.wnet"), dir / (stem + ".meta")};
}

CodeFiles save_code(const ReliabilityCode& code, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto files = code_files(dir, code.n(), code.q());
  nn::save_file(code.encoder(), files.encoder);
  nn::save_file(code.decoder(), files.decoder);
  const auto& c = code.config();
  std::ofstream meta(files.metadata);
  if (!meta) throw Error(ErrorKind::io, "cannot write " + files.metadata.string());
  meta.precision(17);
  meta << "n = " << c.n << "\n"
       << "q = " << c.q << "\n"
       << "snr_db = " << c.snr_db << "\n"
       << "learning_rate = " << c.learning_rate << "\n"
       << "epochs = " << c.epochs << "\n"
       << "messages_per_epoch = " << c.messages_per_epoch << "\n"
       << "batch_size = " << c.batch_size << "\n"
       << "hidden_width = " << c.hidden_width << "\n"
       << "power = " << c.power << "\n"
       << "seed = " << c.seed << "\n"
       << "content_hash = " << code.content_hash() << "\n";
  if (!meta) throw Error(ErrorKind::io, "failed writing " + files.metadata.string());
  return files;
}

namespace {

std::map<std::string, std::string> read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::missing_model, "missing metadata " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace

ReliabilityCode load_code(const std::filesystem::path& dir, unsigned n, unsigned q) {
  const auto files = code_files(dir, n, q);
  if (!std::filesystem::exists(files.encoder) || !std::filesystem::exists(files.decoder))
    throw Error(ErrorKind::missing_model, "no trained code for n=" + std::to_string(n) +
                                              ", q=" + std::to_string(q) + " in " + dir.string());
  auto kv = read_meta(files.metadata);
  ReliabilityConfig c;
  try {
    c.n = static_cast<unsigned>(std::stoul(kv.at("n")));
    c.q = static_cast<unsigned>(std::stoul(kv.at("q")));
    c.snr_db = std::stod(kv.at("snr_db"));
    c.learning_rate = std::stod(kv.at("learning_rate"));
    c.epochs = std::stoul(kv.at("epochs"));
    c.messages_per_epoch = std::stoul(kv.at("messages_per_epoch"));
    c.batch_size = std::stoul(kv.at("batch_size"));
    c.hidden_width = std::stoul(kv.at("hidden_width"));
    c.power = std::stod(kv.at("power"));
    c.seed = std::stoull(kv.at("seed"));
  } catch (const std::exception& e) {
    throw Error(ErrorKind::io, "malformed metadata " + files.metadata.string() + ": " + e.what());
  }
  ReliabilityCode code(nn::load_file(files.encoder), nn::load_file(files.decoder), c);
  if (kv.count("content_hash") && kv["content_hash"] != code.content_hash())
    throw Error(ErrorKind::io, "model content hash mismatch for " + files.metadata.string());
  return code;
}

}  // namespace wiretap
