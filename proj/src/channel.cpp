#include "wiretap/channel.hpp"

#include <algorithm>
#include <cmath>

#include "wiretap/error.hpp"

namespace wiretap {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::mt19937_64 make_engine(std::uint64_t seed, const std::string& label) {
  const std::uint64_t h = fnv1a(label);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)), engine_(make_engine(seed_, label_)) {}

RngStream RngStream::derive(const std::string& suffix) const {
  return RngStream(seed_, label_ + "/" + suffix);
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() { return std::generate_canonical<double, 53>(engine_); }

std::uint32_t RngStream::uniform_below(std::uint32_t bound) {
  return std::uniform_int_distribution<std::uint32_t>(0, bound - 1)(engine_);
}

std::uint32_t RngStream::uniform_bits(unsigned count) {
  if (count == 0) return 0;
  const auto word = engine_();
  return static_cast<std::uint32_t>(word >> (64 - count));
}

double snr_to_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

double variance_to_snr(double variance) { return -10.0 * std::log10(variance); }

double Codeword::energy() const noexcept {
  double e = 0.0;
  for (double x : samples) e += x * x;
  return e;
}

bool Codeword::satisfies_power_constraint() const noexcept {
  return energy() <= static_cast<double>(n()) * power_budget + 1e-9;
}

GaussianSpec GaussianSpec::from_snr_db(double snr_db) {
  return GaussianSpec{snr_db, snr_to_variance(snr_db)};
}

UncertaintySet UncertaintySet::grid(double lo_db, double hi_db, double step_db,
                                    ReceiverRole role) {
  if (!(step_db > 0.0) || hi_db < lo_db)
    throw Error(ErrorKind::configuration, "uncertainty grid needs lo <= hi and step > 0");
  UncertaintySet set;
  set.role = role;
  const auto count = static_cast<std::size_t>(std::llround((hi_db - lo_db) / step_db)) + 1;
  set.snr_values_db.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    set.snr_values_db.push_back(lo_db + static_cast<double>(i) * step_db);
  return set;
}

double UncertaintySet::variance(std::size_t i) const {
  return snr_to_variance(snr_values_db.at(i));
}

std::size_t UncertaintySet::design_index() const {
  if (snr_values_db.empty()) throw Error(ErrorKind::empty_set, "uncertainty set is empty");
  const auto lowest = std::min_element(snr_values_db.begin(), snr_values_db.end());
  const auto highest = std::max_element(snr_values_db.begin(), snr_values_db.end());
  const auto it = role == ReceiverRole::legitimate ? lowest : highest;
  return static_cast<std::size_t>(it - snr_values_db.begin());
}

GaussianSpec UncertaintySet::design_channel() const {
  return GaussianSpec::from_snr_db(snr_values_db[design_index()]);
}

void add_awgn(std::span<double> samples, double variance, RngStream& rng) {
  const double sigma = std::sqrt(variance);
  for (double& x : samples) x += sigma * rng.normal();
}

std::vector<double> transmit_awgn(const Codeword& x, const GaussianSpec& g, RngStream& rng) {
  std::vector<double> y = x.samples;
  add_awgn(y, g.variance, rng);
  return y;
}

AvcChannel::AvcChannel(UncertaintySet set, AvcSchedule schedule)
    : set_(std::move(set)), schedule_(schedule) {
  if (set_.snr_values_db.empty()) throw Error(ErrorKind::empty_set, "uncertainty set is empty");
  if (schedule_.kind == AvcSchedule::Kind::fixed && schedule_.fixed_index >= set_.size())
    throw Error(ErrorKind::configuration, "fixed schedule index outside the uncertainty set");
  if ((schedule_.kind == AvcSchedule::Kind::per_block ||
       schedule_.kind == AvcSchedule::Kind::alternating) &&
      schedule_.block_codewords == 0)
    throw Error(ErrorKind::configuration, "block schedule needs a positive block size");
  variances_.reserve(set_.size());
  for (std::size_t i = 0; i < set_.size(); ++i) variances_.push_back(set_.variance(i));
}

AvcChannel AvcChannel::awgn(const GaussianSpec& g) {
  AvcChannel channel(UncertaintySet{{g.snr_db}, ReceiverRole::legitimate}, AvcSchedule::fixed(0));
  channel.variances_[0] = g.variance;
  return channel;
}

void AvcChannel::add_noise(std::span<double> samples, std::span<double> variances,
                           RngStream& rng) {
  using Kind = AvcSchedule::Kind;
  // A singleton set draws nothing, so it consumes the stream exactly like AWGN.
  const Kind kind = variances_.size() == 1 ? Kind::fixed : schedule_.kind;
  switch (kind) {
    case Kind::fixed:
      std::fill(variances.begin(), variances.end(),
                variances_[variances_.size() == 1 ? 0 : schedule_.fixed_index]);
      break;
    case Kind::per_block:
      if (!block_drawn_ || sent_ % schedule_.block_codewords == 0) {
        block_variance_ = variances_[rng.uniform_below(static_cast<std::uint32_t>(set_.size()))];
        block_drawn_ = true;
      }
      std::fill(variances.begin(), variances.end(), block_variance_);
      break;
    case Kind::alternating: {
      const auto block = sent_ / schedule_.block_codewords;
      std::fill(variances.begin(), variances.end(), variances_[block % variances_.size()]);
      break;
    }
    case Kind::per_symbol_uniform:
      for (double& v : variances)
        v = variances_[rng.uniform_below(static_cast<std::uint32_t>(set_.size()))];
      break;
  }
  for (std::size_t t = 0; t < samples.size(); ++t)
    samples[t] += std::sqrt(variances[t]) * rng.normal();
  ++sent_;
}

AvcOutput AvcChannel::transmit(const Codeword& x, RngStream& rng) {
  AvcOutput out{x.samples, std::vector<double>(x.n())};
  add_noise(out.received, out.variances, rng);
  return out;
}

AvcOutput transmit_avc(const Codeword& x, const UncertaintySet& set, const AvcSchedule& sched,
                       RngStream& rng) {
  AvcChannel channel(set, sched);
  return channel.transmit(x, rng);
}

}  // namespace wiretap
