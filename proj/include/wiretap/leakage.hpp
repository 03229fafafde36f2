#pragma once

// Mutual information neural estimation (MINE) of I(M; Z^n) from samples of
// (message bits, eavesdropper observation). Internal values are in nats;
// reported values are in bits.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wiretap/channel.hpp"
#include "wiretap/error.hpp"
#include "wiretap/neural.hpp"

namespace wiretap {

class WiretapCode;

struct MineConfig {
  std::string profile = "paper";
  std::size_t hidden_layers = 4;
  std::size_t width = 400;
  double learning_rate = 1e-3;
  std::size_t epochs = 10'000;
  std::size_t messages_per_epoch = 20'000;
  std::size_t batch_size = 2'500;
  std::size_t window = 100;
  double ema_rate = 0.99;
  double tail_fraction = 0.2;  // reported value: max of the smoothed tail
  std::uint64_t seed = 1;

  // paper: 4 x 400 network, 10^4 epochs of 20,000 messages, batches of 2,500.
  // fast: a smaller network and epoch budget for desk-scale runs.
  static MineConfig paper();
  static MineConfig fast();
  static MineConfig for_profile(const std::string& name);
  // Ranking budget used by seed search: fewer epochs, same network.
  MineConfig reduced() const;

  void validate() const;
  // Stable key=value rendering used for config hashes.
  std::string describe() const;
};

// Column j of `messages` holds the k message bits (0/1), column j of
// `observations` the n received samples.
struct JointSamples {
  nn::Matrix messages;
  nn::Matrix observations;
  std::vector<std::uint32_t> message_ids;

  std::size_t size() const noexcept { return static_cast<std::size_t>(observations.cols()); }
};

// Draws `count` uniform messages, encodes each with fresh randomizer bits and
// passes the codeword through the eavesdropper channel.
JointSamples sample_joint(const WiretapCode& code, AvcChannel& eve, std::size_t count,
                          RngStream& rng);
JointSamples sample_joint(const WiretapCode& code, const GaussianSpec& eve, std::size_t count,
                          RngStream& rng);

// Pairs the messages with a uniformly permuted copy of the observations.
JointSamples shuffle_marginal(const JointSamples& joint, RngStream& rng);

// Produces the joint samples for one epoch.
using JointSource = std::function<JointSamples(std::size_t epoch, std::size_t count, RngStream&)>;

struct LeakageEstimate {
  std::vector<double> raw_nats;       // per-epoch Donsker-Varadhan estimate
  std::vector<double> smoothed_nats;  // moving average over `window` epochs
  double reported_bits = 0.0;
  std::string config_hash;
  std::string label;  // free-form code/channel description

  double clipped_bits() const noexcept { return reported_bits < 0.0 ? 0.0 : reported_bits; }
};

// Thrown when the objective becomes non-finite; carries the finite prefix.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> partial)
      : Error(ErrorKind::divergence, what), partial_trace(std::move(partial)) {}
  std::vector<double> partial_trace;
};

LeakageEstimate mine_estimate(const JointSource& source, const MineConfig& config,
                              std::string label = {});

std::vector<double> smooth_trace(const std::vector<double>& trace, std::size_t window = 100);

// Maximum of the final `tail_fraction` of the smoothed trace, in bits.
double reported_statistic(const std::vector<double>& smoothed_nats, double tail_fraction);

// CSV: epoch,raw_estimate_nats,smoothed_nats (smoothed empty for the first
// window-1 epochs).
void write_trace_csv(const LeakageEstimate& est, std::size_t window,
                     const std::filesystem::path& path);
void write_summary_json(const LeakageEstimate& est, const MineConfig& config,
                        const std::filesystem::path& path);

}  // namespace wiretap
