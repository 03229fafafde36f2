#include "wiretap/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "wiretap/error.hpp"
#include "wiretap/parallel.hpp"
#include "wiretap/stats.hpp"

namespace wiretap::bounds {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLog2e = 1.4426950408889634;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// Draws `count` samples split into shards, each from its own derived stream.
template <typename Sampler>
std::vector<std::vector<double>> sample_shards(const BoundConfig& config, const std::string& label,
                                               Sampler sampler) {
  const std::size_t k = config.shards;
  std::vector<std::vector<double>> shards(k);
  const RngStream root(config.seed, label);
  parallel_for(k, [&](std::size_t s) {
    const std::size_t base = config.mc_samples / k;
    const std::size_t count = s + 1 == k ? config.mc_samples - base * (k - 1) : base;
    RngStream rng = root.derive("shard-" + std::to_string(s));
    shards[s] = sampler(count, rng);
  });
  return shards;
}

std::vector<double> pooled_sorted(const std::vector<std::vector<double>>& shards) {
  std::vector<double> all;
  for (const auto& s : shards) all.insert(all.end(), s.begin(), s.end());
  std::sort(all.begin(), all.end());
  return all;
}

double batch_stderr(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  return stddev(values) / std::sqrt(static_cast<double>(values.size()));
}

}  // namespace

void BoundConfig::validate() const {
  if (n < 1) throw Error(ErrorKind::configuration, "blocklength must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0))
    throw Error(ErrorKind::out_of_range, "epsilon and delta must lie in (0,1)");
  if (!(epsilon + delta < 1.0)) throw Error(ErrorKind::out_of_range, "need epsilon + delta < 1");
  if (!(power > 0.0)) throw Error(ErrorKind::configuration, "power must be positive");
  if (!(variance_e() > variance_b()))
    throw Error(ErrorKind::non_degraded, "eavesdropper must be noisier than the legitimate receiver");
  if (shards == 0 || mc_samples < 2 * shards)
    throw Error(ErrorKind::too_few_samples, "need at least two samples per shard");
  if (gamma_grid_points == 0 || tau_points == 0)
    throw Error(ErrorKind::configuration, "grids must have at least one point");
}

double secrecy_capacity(double snr_b_db, double snr_e_db, double power) {
  const double vy = snr_to_variance(snr_b_db);
  const double vz = snr_to_variance(snr_e_db);
  if (!(vz >= vy))
    throw Error(ErrorKind::non_degraded, "secrecy capacity needs sigma_Z^2 >= sigma_Y^2");
  return 0.5 * std::log2(1.0 + power / vy) - 0.5 * std::log2(1.0 + power / vz);
}

double awgn_capacity(double snr_linear) { return 0.5 * std::log2(1.0 + snr_linear); }

double awgn_dispersion(double snr_linear) {
  const double s = snr_linear;
  return kLog2e * kLog2e * s * (s + 2.0) / (2.0 * (s + 1.0) * (s + 1.0));
}

double channel_log2_m(unsigned n, double epsilon, double snr_db, double power) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw Error(ErrorKind::out_of_range, "epsilon must lie in (0,1)");
  if (n < 1) throw Error(ErrorKind::configuration, "blocklength must be >= 1");
  const double s = power / snr_to_variance(snr_db);
  const boost::math::normal_distribution<double> unit;
  const double q_inv = boost::math::quantile(boost::math::complement(unit, epsilon));
  const double nn = static_cast<double>(n);
  return nn * awgn_capacity(s) - std::sqrt(nn * awgn_dispersion(s)) * q_inv + 0.5 * std::log2(nn);
}

double channel_log2_m(const BoundConfig& config) {
  if (config.injected_log2_m) return *config.injected_log2_m;
  return channel_log2_m(config.n, config.epsilon, config.snr_b_db, config.power);
}

std::vector<double> sample_Bn(unsigned n, double snr_e_db, double power, std::size_t count,
                              RngStream& rng, EveNoiseReading reading) {
  if (count == 0) throw Error(ErrorKind::too_few_samples, "count must be >= 1");
  const double vz = snr_to_variance(snr_e_db);
  const double sz = std::sqrt(vz);
  const double sp = std::sqrt(power);
  const double scale = reading == EveNoiseReading::standard_normal ? 1.0 : sz;
  const double lead = 0.5 * static_cast<double>(n) * std::log2(1.0 + power / vz);
  std::vector<double> out(count);
  for (auto& b : out) {
    double acc = 0.0;
    for (unsigned t = 0; t < n; ++t) {
      const double z = scale * rng.normal();
      const double d = sp * z - sz;
      acc += 1.0 - d * d / (power + vz);
    }
    b = lead + 0.5 * kLog2e * acc;
  }
  return out;
}

LObjective::LObjective(std::span<const double> b_bits, double delta) : delta_(delta) {
  if (b_bits.empty()) throw Error(ErrorKind::too_few_samples, "no B_n samples");
  nats_.assign(b_bits.begin(), b_bits.end());
  for (auto& b : nats_) b *= kLn2;
  std::sort(nats_.begin(), nats_.end());
  const std::size_t n = nats_.size();
  prefix_pos_.assign(n + 1, -kInf);
  suffix_neg_.assign(n + 1, -kInf);
  for (std::size_t j = 0; j < n; ++j) prefix_pos_[j + 1] = log_add_exp(prefix_pos_[j], nats_[j]);
  for (std::size_t j = n; j-- > 0;) suffix_neg_[j] = log_add_exp(suffix_neg_[j + 1], -nats_[j]);
}

std::optional<double> LObjective::log2_sqrt_l(double c) const {
  const std::size_t n = nats_.size();
  const auto i = static_cast<std::size_t>(std::upper_bound(nats_.begin(), nats_.end(), c) -
                                          nats_.begin());
  // Samples at or below c contribute exp(b - c) and 1; those above exp(c - b).
  const double below = i > 0 ? std::exp(prefix_pos_[i] - c) : 0.0;
  const double above = i < n ? std::exp(c + suffix_neg_[i]) : 0.0;
  const double nn = static_cast<double>(n);
  const double e_abs = (below + above) / nn;
  const double e_plus = (static_cast<double>(i) + above) / nn;
  const double den = 2.0 * (delta_ + e_plus) - 1.0;
  if (!(den > 0.0) || !(e_abs > 0.0)) return std::nullopt;
  return (0.5 * (c + std::log(e_abs)) - std::log(den)) * kLog2e;
}

namespace {

LResult finish(double log2_sqrt, double ln_gamma) {
  LResult r;
  r.log2_l_raw = 2.0 * log2_sqrt;
  r.clamped = r.log2_l_raw < 0.0;
  r.log2_l = std::max(0.0, r.log2_l_raw);
  r.ln_gamma = ln_gamma;
  return r;
}

}  // namespace

LResult compute_L_on_grid(std::span<const double> b_bits, double delta,
                          std::span<const double> ln_gammas) {
  const LObjective obj(b_bits, delta);
  double best = kInf, arg = 0.0;
  for (double c : ln_gammas) {
    const auto v = obj.log2_sqrt_l(c);
    if (v && *v < best) {
      best = *v;
      arg = c;
    }
  }
  if (best == kInf) throw Error(ErrorKind::infeasible, "no gamma with a positive denominator");
  return finish(best, arg);
}

LResult compute_L(std::span<const double> b_bits, double delta, std::size_t grid_points,
                  std::size_t golden_iterations) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::out_of_range, "delta must lie in (0,1)");
  if (grid_points == 0) throw Error(ErrorKind::configuration, "empty gamma grid");
  const LObjective obj(b_bits, delta);
  const double lo = obj.min_ln_gamma();
  const double hi = obj.max_ln_gamma();
  std::vector<double> grid(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g)
    grid[g] = grid_points == 1 ? lo
                               : lo + (hi - lo) * static_cast<double>(g) /
                                          static_cast<double>(grid_points - 1);
  double best = kInf, arg = 0.0;
  std::size_t best_index = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto v = obj.log2_sqrt_l(grid[g]);
    if (v && *v < best) {
      best = *v;
      arg = grid[g];
      best_index = g;
    }
  }
  if (best == kInf) throw Error(ErrorKind::infeasible, "no gamma with a positive denominator");

  auto f = [&](double c) { return obj.log2_sqrt_l(c).value_or(kInf); };
  double a = grid[best_index > 0 ? best_index - 1 : 0];
  double b = grid[std::min(best_index + 1, grid.size() - 1)];
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (std::size_t it = 0; it < golden_iterations && b - a > 0.0; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
    for (auto [x, fx] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
      if (fx < best) {
        best = fx;
        arg = x;
      }
    }
  }
  return finish(best, arg);
}

LResult compute_L(const BoundConfig& config) {
  config.validate();
  const auto shards = sample_shards(config, "bn", [&](std::size_t count, RngStream& rng) {
    return sample_Bn(config.n, config.snr_e_db, config.power, count, rng, config.eve_reading);
  });
  return compute_L(pooled_sorted(shards), config.delta, config.gamma_grid_points,
                   config.golden_iterations);
}

Achievability secrecy_achievability(const BoundConfig& config) {
  config.validate();
  const auto shards = sample_shards(config, "bn", [&](std::size_t count, RngStream& rng) {
    return sample_Bn(config.n, config.snr_e_db, config.power, count, rng, config.eve_reading);
  });
  Achievability out;
  out.log2_m = channel_log2_m(config);
  const double nn = static_cast<double>(config.n);
  auto rate_of = [&](const LResult& l) { return std::max(0.0, (out.log2_m - l.log2_l) / nn); };
  out.l = compute_L(pooled_sorted(shards), config.delta, config.gamma_grid_points,
                    config.golden_iterations);
  out.rate = rate_of(out.l);
  if (shards.size() > 1) {
    std::vector<double> rates;
    for (const auto& s : shards)
      rates.push_back(
          rate_of(compute_L(s, config.delta, config.gamma_grid_points, config.golden_iterations)));
    out.stderr_rate = batch_stderr(rates);
  }
  return out;
}

std::vector<double> sample_Bbar(const BoundConfig& config, std::size_t count, RngStream& rng) {
  const double vy = config.variance_b(), vz = config.variance_e(), p = config.power;
  const double sp = std::sqrt(p), sy = std::sqrt(vy), sbar = std::sqrt(vz - vy);
  const double lead = static_cast<double>(config.n) * secrecy_capacity(config.snr_b_db, config.snr_e_db, p);
  std::vector<double> out(count);
  for (auto& b : out) {
    double acc = 0.0;
    for (unsigned t = 0; t < config.n; ++t) {
      const double ny = sy * rng.normal();
      const double nbar = sbar * rng.normal();
      const double z_noise = ny + nbar;
      const double y = sp + ny;
      const double z = sp + z_noise;
      acc += z_noise * z_noise / vz - ny * ny / vy + y * y / (p + vy) - z * z / (p + vz);
    }
    b = lead + 0.5 * kLog2e * acc;
  }
  return out;
}

std::vector<double> sample_Dbar(const BoundConfig& config, std::size_t count, RngStream& rng) {
  const double vy = config.variance_b(), vz = config.variance_e(), p = config.power;
  const double sp = std::sqrt(p), sz = std::sqrt(vz), sbar = std::sqrt(p + vy);
  const double c0 = std::sqrt((vz - vy) / (p + vz));
  const double c1 = std::sqrt((p + vy) / (p + vz));
  const double lead = static_cast<double>(config.n) * secrecy_capacity(config.snr_b_db, config.snr_e_db, p);
  std::vector<double> out(count);
  for (auto& d : out) {
    double acc = 0.0;
    for (unsigned t = 0; t < config.n; ++t) {
      const double nz = sz * rng.normal();
      const double nbar = sbar * rng.normal();
      if (config.converse_form == ConverseForm::derived) {
        // Under Q: z = sqrt(P) + N_Z, y = c1^2 z + c0 Nbar_Z.
        const double z = sp + nz;
        const double y = c1 * c1 * z + c0 * nbar;
        const double y_noise = c1 * c1 * nz + c0 * nbar - c0 * c0 * sp;
        acc += nz * nz / vz - y_noise * y_noise / vy + y * y / (p + vy) - z * z / (p + vz);
      } else {
        const double a = nbar - c0 * (nz + sp);
        const double b = c1 * nz + c0 * nbar - c0 * c0 * sp;
        acc += nz * nz / vz - a * a / (p + vz) + nbar * nbar / (p + vy) + b * b / vy;
      }
    }
    d = lead + 0.5 * kLog2e * acc;
  }
  return out;
}

double upper_quantile(std::span<const double> sorted_ascending, double p) {
  const std::size_t n = sorted_ascending.size();
  if (n == 0) throw Error(ErrorKind::too_few_samples, "empty sample set");
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::out_of_range, "quantile level must lie in (0,1]");
  const auto rank = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(p * static_cast<double>(n))), 1, n);
  return sorted_ascending[n - rank];
}

namespace {

Converse converse_from(const BoundConfig& config, const std::vector<double>& bbar,
                       const std::vector<double>& dbar) {
  const std::size_t n = bbar.size();
  const double budget = 1.0 - config.epsilon - config.delta;
  // Suffix log-sum-exp of -Bbar ln 2 for the importance-sampled beta.
  std::vector<double> suffix;
  if (config.beta_estimator == BetaEstimator::importance) {
    suffix.assign(n + 1, -kInf);
    for (std::size_t j = n; j-- > 0;) suffix[j] = log_add_exp(suffix[j + 1], -bbar[j] * kLn2);
  }
  Converse best;
  best.log2_k_bound = kInf;
  for (std::size_t i = 1; i <= config.tau_points; ++i) {
    const double tau = budget * static_cast<double>(i) / static_cast<double>(config.tau_points + 1);
    const double level = budget - tau;
    const double gamma = upper_quantile(bbar, level);
    double log2_beta;
    if (config.beta_estimator == BetaEstimator::importance) {
      const auto j = static_cast<std::size_t>(std::lower_bound(bbar.begin(), bbar.end(), gamma) -
                                              bbar.begin());
      log2_beta = std::min(0.0, (suffix[j] - std::log(static_cast<double>(n))) * kLog2e);
    } else {
      const auto above = static_cast<std::size_t>(
          dbar.end() - std::lower_bound(dbar.begin(), dbar.end(), gamma));
      if (above == 0) continue;
      log2_beta = std::log2(static_cast<double>(above) / static_cast<double>(dbar.size()));
    }
    const double value = std::log2(tau + config.delta) - std::log2(tau) - log2_beta;
    if (value < best.log2_k_bound) {
      best.log2_k_bound = value;
      best.tau = tau;
      best.gamma_bar = gamma;
      best.log2_beta = log2_beta;
    }
  }
  if (best.log2_k_bound == kInf)
    throw Error(ErrorKind::infeasible, "beta estimate is zero at every tau (increase mc_samples)");
  best.rate = best.log2_k_bound / static_cast<double>(config.n);
  return best;
}

}  // namespace

Converse secrecy_converse(const BoundConfig& config) {
  config.validate();
  BoundConfig c = config;
  // The printed expression is not a likelihood ratio, so only direct sampling applies.
  if (c.converse_form == ConverseForm::printed) c.beta_estimator = BetaEstimator::direct;
  const auto bshards = sample_shards(c, "bbar", [&](std::size_t count, RngStream& rng) {
    return sample_Bbar(c, count, rng);
  });
  std::vector<std::vector<double>> dshards(bshards.size());
  if (c.beta_estimator == BetaEstimator::direct)
    dshards = sample_shards(c, "dbar", [&](std::size_t count, RngStream& rng) {
      return sample_Dbar(c, count, rng);
    });
  Converse out = converse_from(c, pooled_sorted(bshards), pooled_sorted(dshards));
  if (bshards.size() > 1) {
    std::vector<double> rates;
    for (std::size_t s = 0; s < bshards.size(); ++s) {
      auto b = bshards[s];
      auto d = dshards[s];
      std::sort(b.begin(), b.end());
      std::sort(d.begin(), d.end());
      rates.push_back(converse_from(c, b, d).rate);
    }
    out.stderr_rate = batch_stderr(rates);
  }
  return out;
}

BoundResult evaluate(const BoundConfig& config) {
  BoundResult r;
  r.achievability = secrecy_achievability(config);
  r.converse = secrecy_converse(config);
  r.secrecy_capacity = secrecy_capacity(config.snr_b_db, config.snr_e_db, config.power);
  return r;
}

}  // namespace wiretap::bounds
