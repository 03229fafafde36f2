#pragma once

// Reliability layer (e0, d0): an autoencoder over the legitimate AWGN channel
// for the inner message set {0, ..., 2^q - 1}.
//
//   encoder: one-hot(Q) -> dense(W, relu) -> dense(n) -> power normalization
//   decoder: n -> dense(W, relu) -> dense(Q) -> softmax
//
// W defaults to Q.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wiretap/channel.hpp"
#include "wiretap/neural.hpp"
#include "wiretap/stats.hpp"

namespace wiretap {

enum class Profile { fast, paper };

Profile parse_profile(const std::string& name);
std::string to_string(Profile p);

struct ReliabilityConfig {
  unsigned n = 8;
  unsigned q = 7;
  double snr_db = 9.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t messages_per_epoch = 10'000;
  std::size_t batch_size = 1'000;
  std::size_t hidden_width = 0;  // 0 selects Q
  double power = 1.0;
  std::uint64_t seed = 1;
  std::size_t memory_budget_bytes = std::size_t{1} << 30;

  // q = n - 1, except q = n - 2 at n = 16.
  static unsigned default_q(unsigned n);
  // fast: 100 epochs of 1e4 messages; paper: 600 epochs of 1e5 messages.
  static ReliabilityConfig for_profile(unsigned n, Profile profile, std::uint64_t seed = 1);

  std::uint32_t num_messages() const { return std::uint32_t{1} << q; }
  std::size_t width() const { return hidden_width == 0 ? num_messages() : hidden_width; }
  void validate() const;
};

class ReliabilityCode {
 public:
  ReliabilityCode(nn::Mlp encoder, nn::Mlp decoder, ReliabilityConfig config,
                  std::vector<double> loss_trace = {});

  const nn::Mlp& encoder() const noexcept { return encoder_; }
  const nn::Mlp& decoder() const noexcept { return decoder_; }
  const ReliabilityConfig& config() const noexcept { return config_; }
  const std::vector<double>& loss_trace() const noexcept { return loss_trace_; }

  unsigned n() const noexcept { return config_.n; }
  unsigned q() const noexcept { return config_.q; }
  std::uint32_t num_messages() const noexcept { return config_.num_messages(); }
  // Column v is e0(v); all columns have squared norm n P.
  const nn::Matrix& codebook() const noexcept { return codebook_; }
  double min_pairwise_distance() const;

  // SHA-256 over both serialized networks.
  std::string content_hash() const;

 private:
  nn::Mlp encoder_;
  nn::Mlp decoder_;
  ReliabilityConfig config_;
  std::vector<double> loss_trace_;
  nn::Matrix codebook_;
};

// Called after every epoch with (epoch index, mean training loss).
using EpochObserver = std::function<void(std::size_t, double)>;

ReliabilityCode train(const ReliabilityConfig& config, RngStream& rng,
                      const EpochObserver& observer = {});

Codeword encode0(const ReliabilityCode& code, std::uint32_t v);
std::uint32_t decode0(const ReliabilityCode& code, std::span<const double> y);
// Decodes every column of Y.
std::vector<std::uint32_t> decode0_batch(const ReliabilityCode& code, const nn::Matrix& y);

// Trials per shard. Each shard draws from its own derived stream and its own
// copy of the channel positioned at the shard's first codeword.
inline constexpr std::uint64_t kShardTrials = 50'000;

Proportion estimate_pe0(const ReliabilityCode& code, const AvcChannel& channel,
                        std::uint64_t trials, const RngStream& rng);
Proportion estimate_pe0(const ReliabilityCode& code, double snr_db, std::uint64_t trials,
                        const RngStream& rng);

// Persistence: <stem>.enc.wnet, <stem>.dec.wnet and a <stem>.meta key=value record.
struct CodeFiles {
  std::filesystem::path encoder, decoder, metadata;
};
std::string code_stem(unsigned n, unsigned q);
CodeFiles code_files(const std::filesystem::path& dir, unsigned n, unsigned q);
CodeFiles save_code(const ReliabilityCode& code, const std::filesystem::path& dir);
ReliabilityCode load_code(const std::filesystem::path& dir, unsigned n, unsigned q);

}  // namespace wiretap
