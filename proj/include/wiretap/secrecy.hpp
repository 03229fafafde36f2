#pragma once

// Full wiretap code (e, d) = (e0 o phi_s, f_s o d0): the learned reliability
// layer composed with the seeded finite-field secrecy layer.

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "wiretap/gf2q.hpp"
#include "wiretap/leakage.hpp"
#include "wiretap/reliability.hpp"
#include "wiretap/stats.hpp"

namespace wiretap {

class WiretapCode {
 public:
  WiretapCode(std::shared_ptr<const ReliabilityCode> reliability, gf2q::Seed seed, unsigned k);

  const ReliabilityCode& reliability() const noexcept { return *reliability_; }
  std::shared_ptr<const ReliabilityCode> reliability_ptr() const noexcept { return reliability_; }
  const gf2q::Seed& seed() const noexcept { return seed_; }
  const gf2q::FieldSpec& field() const noexcept { return field_; }
  unsigned k() const noexcept { return k_; }
  unsigned q() const noexcept { return field_.q(); }
  unsigned n() const noexcept { return reliability_->n(); }
  // Randomizer length q - k.
  unsigned randomizer_bits() const noexcept { return q() - k_; }

 private:
  std::shared_ptr<const ReliabilityCode> reliability_;
  gf2q::FieldSpec field_;
  gf2q::Seed seed_;
  unsigned k_;
};

// Inner word for message m with randomizer bits drawn from rng.
std::uint32_t inner_word(const WiretapCode& code, const gf2q::BitString& m, RngStream& rng);
Codeword encode(const WiretapCode& code, const gf2q::BitString& m, RngStream& rng);
gf2q::BitString decode(const WiretapCode& code, std::span<const double> y);
gf2q::BitString decode_inner(const WiretapCode& code, std::uint32_t v_hat);

// Both error rates over the same trials: the message error of (e, d) and
// the inner-word error of (e0, d0).
struct PeReport {
  Proportion message;
  Proportion inner;
};

PeReport estimate_pe_report(const WiretapCode& code, const AvcChannel& channel,
                            std::uint64_t trials, const RngStream& rng);
Proportion estimate_pe(const WiretapCode& code, double snr_db, std::uint64_t trials,
                       const RngStream& rng);
Proportion estimate_pe(const WiretapCode& code, const AvcChannel& channel, std::uint64_t trials,
                       const RngStream& rng);

// Seeds chosen for each blocklength (q = n - 1, q = 14 at n = 16); empty
// when none is listed.
std::optional<gf2q::Seed> table_seed(unsigned n, unsigned k, const gf2q::FieldSpec& field);

// Table seed (when listed and valid for the field) plus `extra` distinct random
// nonzero seeds, sorted by value. Returns every nonzero seed when the field is
// too small to supply that many.
std::vector<gf2q::Seed> default_candidates(unsigned n, unsigned k, const gf2q::FieldSpec& field,
                                           RngStream& rng, std::size_t extra = 8);

struct SeedScore {
  gf2q::Seed seed;
  double leakage_bits;
};

struct SeedSearchResult {
  gf2q::Seed best;
  std::vector<SeedScore> table;  // ranking-budget estimates, in candidate order
  LeakageEstimate final_estimate;  // best seed at the full budget
};

// Ranks candidates by leakage under `ranking`, then re-estimates the winner
// under `full`. Every candidate sees the same sample stream. Ties go to the
// smallest seed value.
SeedSearchResult seed_search(std::shared_ptr<const ReliabilityCode> code, unsigned k,
                             double eve_snr_db, std::span<const gf2q::Seed> candidates,
                             const MineConfig& ranking, const MineConfig& full,
                             std::uint64_t rng_seed);

// Leakage of a fixed code over a stationary Gaussian eavesdropper channel.
LeakageEstimate estimate_leakage(const WiretapCode& code, double eve_snr_db,
                                 const MineConfig& config, std::uint64_t rng_seed);
// Leakage when the eavesdropper channel follows an AVC schedule; the channel
// state carries over between epochs.
LeakageEstimate estimate_leakage(const WiretapCode& code, const AvcChannel& eve,
                                 const MineConfig& config, std::uint64_t rng_seed);

// Seed table rows: n,q,k,seed_binary_string,leakage_bits,mine_profile
struct SeedRecord {
  unsigned n = 0, q = 0, k = 0;
  std::string seed_binary;
  double leakage_bits = 0.0;
  std::string mine_profile;
};
void write_seed_table(const std::vector<SeedRecord>& rows, const std::filesystem::path& path);
std::vector<SeedRecord> read_seed_table(const std::filesystem::path& path);

}  // namespace wiretap
