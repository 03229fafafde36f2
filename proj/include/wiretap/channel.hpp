#pragma once

// Gaussian wiretap channel simulation: fixed-variance AWGN, compound
// uncertainty sets and arbitrarily varying (AVC) per-symbol schedules.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wiretap {

// Deterministic random stream identified by (seed, label). Two streams with
// the same pair produce the same sequence; differing labels give unrelated
// sequences. Engine: mt19937_64 seeded through seed_seq; normals from
// std::normal_distribution.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string label);

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& label() const noexcept { return label_; }

  // Child stream with label "<label>/<suffix>".
  RngStream derive(const std::string& suffix) const;

  double normal();  // N(0,1)
  double uniform();  // [0,1)
  std::uint32_t uniform_below(std::uint32_t bound);  // [0, bound)
  std::uint32_t uniform_bits(unsigned count);  // count <= 32
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

double snr_to_variance(double snr_db);
double variance_to_snr(double variance);

struct Codeword {
  std::vector<double> samples;
  double power_budget = 1.0;

  std::size_t n() const noexcept { return samples.size(); }
  double energy() const noexcept;
  // Sum of squares <= n P + 1e-9.
  bool satisfies_power_constraint() const noexcept;
};

struct GaussianSpec {
  double snr_db = 0.0;
  double variance = 1.0;

  static GaussianSpec from_snr_db(double snr_db);
};

enum class ReceiverRole { legitimate, eavesdropper };

struct UncertaintySet {
  std::vector<double> snr_values_db;
  ReceiverRole role = ReceiverRole::legitimate;

  // Inclusive grid lo, lo+step, ..., hi (rounded to the step).
  static UncertaintySet grid(double lo_db, double hi_db, double step_db, ReceiverRole role);

  std::size_t size() const noexcept { return snr_values_db.size(); }
  double variance(std::size_t i) const;
  // Legitimate: the noisiest member (i*). Eavesdropper: the least noisy (j*).
  std::size_t design_index() const;
  GaussianSpec design_channel() const;
};

// How the per-symbol noise variance is assigned.
struct AvcSchedule {
  enum class Kind {
    fixed,               // set[fixed_index] for every symbol (compound)
    per_block,           // one uniform draw from the set per block of codewords
    per_symbol_uniform,  // independent uniform draw per symbol
    alternating,         // cycle through the set in order, one member per block
  };
  Kind kind = Kind::fixed;
  std::size_t fixed_index = 0;
  std::uint64_t block_codewords = 50'000;

  static AvcSchedule fixed(std::size_t index) { return {Kind::fixed, index, 0}; }
  static AvcSchedule per_block(std::uint64_t block) { return {Kind::per_block, 0, block}; }
  static AvcSchedule per_symbol() { return {Kind::per_symbol_uniform, 0, 0}; }
  static AvcSchedule alternating(std::uint64_t block) { return {Kind::alternating, 0, block}; }
};

// Defaults used by the experiment pipelines.
inline constexpr std::uint64_t kAvcErrorBlockCodewords = 50'000;
inline constexpr std::uint64_t kAvcLeakageEpochCodewords = 20'000;

struct AvcOutput {
  std::vector<double> received;
  std::vector<double> variances;  // drawn variance per symbol, for audit
};

std::vector<double> transmit_awgn(const Codeword& x, const GaussianSpec& g, RngStream& rng);

// In-place noise addition, the hot path for batched simulation.
void add_awgn(std::span<double> samples, double variance, RngStream& rng);

// Stateful AVC channel: block schedules count codewords across calls.
class AvcChannel {
 public:
  AvcChannel(UncertaintySet set, AvcSchedule schedule);
  // Fixed-variance channel (a singleton set); uses g.variance exactly.
  static AvcChannel awgn(const GaussianSpec& g);

  AvcOutput transmit(const Codeword& x, RngStream& rng);
  // Adds noise to one codeword in place, writing the per-symbol variances.
  void add_noise(std::span<double> samples, std::span<double> variances, RngStream& rng);

  const UncertaintySet& set() const noexcept { return set_; }
  const AvcSchedule& schedule() const noexcept { return schedule_; }
  std::uint64_t codewords_sent() const noexcept { return sent_; }
  // Positions the block schedules as if `codewords` had already been sent.
  void advance(std::uint64_t codewords) noexcept { sent_ += codewords; block_drawn_ = false; }

 private:
  UncertaintySet set_;
  AvcSchedule schedule_;
  std::vector<double> variances_;
  std::uint64_t sent_ = 0;
  double block_variance_ = 0.0;
  bool block_drawn_ = false;
};

AvcOutput transmit_avc(const Codeword& x, const UncertaintySet& set, const AvcSchedule& sched,
                       RngStream& rng);

}  // namespace wiretap
