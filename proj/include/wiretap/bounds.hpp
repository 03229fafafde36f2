#pragma once

// Monte Carlo evaluation of finite-blocklength secrecy bounds for the
// degraded Gaussian wiretap channel: an achievability lower bound on the
// secrecy rate, log2(M / L) / n, and a converse upper bound on the message
// size k via a hypothesis-testing quantity beta.
//
// Information densities are in bits. L(n, delta) is evaluated in nats
// internally (B * ln 2 against ln gamma) so that both exponentials use the
// same base.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wiretap/channel.hpp"

namespace wiretap::bounds {

// What Z_t denotes inside the B_n correction term.
enum class EveNoiseReading {
  standard_normal,   // Z_t ~ N(0, 1): B_n is the exact AWGN information density
  channel_variance,  // Z_t ~ N(0, sigma_Z^2), the literal noise variance
};

// Which expression is sampled for D-bar (only used by the direct estimator).
enum class ConverseForm {
  derived,  // log-likelihood ratio of the code distribution against Q_{Y|Z}
  printed,  // the expression as typeset, kept for comparison
};

enum class BetaEstimator {
  importance,  // beta = E_P[2^-Bbar 1{Bbar >= gamma}] from the Bbar samples
  direct,      // beta = fraction of D-bar samples (drawn under Q) >= gamma
};

struct BoundConfig {
  unsigned n = 8;
  double epsilon = 1e-3;
  double delta = 1e-3;
  double snr_b_db = 9.0;
  double snr_e_db = -5.0;
  double power = 1.0;
  std::size_t mc_samples = 1'000'000;
  std::size_t gamma_grid_points = 200;
  std::size_t golden_iterations = 60;
  std::size_t tau_points = 50;
  std::size_t shards = 10;  // batch-means standard errors
  std::uint64_t seed = 1;
  EveNoiseReading eve_reading = EveNoiseReading::standard_normal;
  ConverseForm converse_form = ConverseForm::derived;
  BetaEstimator beta_estimator = BetaEstimator::importance;
  std::optional<double> injected_log2_m;  // replaces the normal approximation

  double variance_b() const { return snr_to_variance(snr_b_db); }
  double variance_e() const { return snr_to_variance(snr_e_db); }
  void validate() const;
};

// (1/2)log2(1+P/sY^2) - (1/2)log2(1+P/sZ^2); requires sZ^2 > sY^2.
double secrecy_capacity(double snr_b_db, double snr_e_db, double power = 1.0);

// AWGN capacity and dispersion (bits, bits^2) at SNR P/sigma^2.
double awgn_capacity(double snr_linear);
double awgn_dispersion(double snr_linear);
// Normal approximation: nC - sqrt(nV) Qinv(eps) + (1/2) log2 n.
double channel_log2_m(unsigned n, double epsilon, double snr_db, double power = 1.0);
// Returns the injected value when present.
double channel_log2_m(const BoundConfig& config);

std::vector<double> sample_Bn(unsigned n, double snr_e_db, double power, std::size_t count,
                              RngStream& rng,
                              EveNoiseReading reading = EveNoiseReading::standard_normal);

struct LResult {
  double log2_l = 0.0;     // log2 L(n, delta), clamped at 0 (L >= 1)
  double log2_l_raw = 0.0;  // before clamping
  double ln_gamma = 0.0;   // minimizer, natural log of gamma
  bool clamped = false;
};

// Objective sqrt(L) at ln gamma = c, evaluated exactly on the sample set (in
// log2), or nullopt where the denominator is not positive.
class LObjective {
 public:
  LObjective(std::span<const double> b_bits, double delta);
  std::optional<double> log2_sqrt_l(double ln_gamma) const;
  double min_ln_gamma() const noexcept { return nats_.front(); }
  double max_ln_gamma() const noexcept { return nats_.back(); }

 private:
  std::vector<double> nats_;        // sorted B * ln 2
  std::vector<double> prefix_pos_;  // log sum_{i<j} exp(b_i)
  std::vector<double> suffix_neg_;  // log sum_{i>=j} exp(-b_i)
  double delta_;
};

// Minimizes over `grid_points` values of ln gamma uniformly spanning the
// sample range, then refines around the grid argmin by golden-section search.
// Throws infeasible when no grid point has a positive denominator.
LResult compute_L(std::span<const double> b_bits, double delta, std::size_t grid_points = 200,
                  std::size_t golden_iterations = 60);
// Minimizes over an explicit list of ln gamma values only.
LResult compute_L_on_grid(std::span<const double> b_bits, double delta,
                          std::span<const double> ln_gammas);
LResult compute_L(const BoundConfig& config);

struct Achievability {
  double rate = 0.0;  // bits per channel use, clamped at 0
  double stderr_rate = 0.0;
  double log2_m = 0.0;
  LResult l;
};

struct Converse {
  double log2_k_bound = 0.0;  // log2 of the infimum over tau
  double rate = 0.0;          // log2_k_bound / n
  double stderr_rate = 0.0;
  double tau = 0.0;
  double gamma_bar = 0.0;
  double log2_beta = 0.0;
};

// Bbar samples under the code distribution, D-bar samples under Q.
std::vector<double> sample_Bbar(const BoundConfig& config, std::size_t count, RngStream& rng);
std::vector<double> sample_Dbar(const BoundConfig& config, std::size_t count, RngStream& rng);

// Nearest-rank threshold with P[B >= gamma] = p on an ascending sample set.
double upper_quantile(std::span<const double> sorted_ascending, double p);

Achievability secrecy_achievability(const BoundConfig& config);
Converse secrecy_converse(const BoundConfig& config);

struct BoundResult {
  Achievability achievability;
  Converse converse;
  double secrecy_capacity = 0.0;
};
BoundResult evaluate(const BoundConfig& config);

}  // namespace wiretap::bounds
