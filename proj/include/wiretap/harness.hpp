#pragma once

// Experiment runner: configuration, pipelines for each CLI subcommand,
// persistence of CSV artifacts and the run manifest.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wiretap/bounds.hpp"
#include "wiretap/leakage.hpp"
#include "wiretap/reliability.hpp"

namespace wiretap::harness {

inline constexpr const char* kVersion = "1.0.0";

// Flat key=value configuration. '#' starts a comment; later values win.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  // Parses "key=value".
  void set_assignment(const std::string& assignment);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  // Sorted key=value lines; the hash is SHA-256 over this text.
  std::string canonical() const;
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

// Every key accepted in a configuration file, with its default.
const std::map<std::string, std::string>& documented_keys();

struct ExperimentConfig {
  std::string experiment = "custom";
  std::vector<unsigned> n_list{4, 6, 8};
  std::vector<unsigned> k_list{1, 2};
  Profile profile = Profile::fast;
  std::string mine_profile = "fast";
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  double snr_b_db = 9.0;
  double snr_e_db = -5.0;
  std::vector<std::string> eval_channels{"awgn", "compound"};
  std::vector<double> compound_snr_b{9.0, 10.0};
  std::uint64_t eval_trials = 100'000;
  std::vector<std::string> leakage_channels{"awgn"};
  std::vector<double> compound_snr_e{-8.0, -6.5, -5.0};

  double avc_b_lo = 9.0, avc_b_hi = 12.0, avc_b_step = 0.1;
  double avc_e_lo = -8.0, avc_e_hi = -5.0, avc_e_step = 0.01;
  std::vector<double> alternating_snr_e{-8.0, -5.0};
  std::uint64_t avc_block_codewords = kAvcErrorBlockCodewords;
  std::uint64_t avc_trials = 200'000;
  std::size_t switch_epochs = 0;  // 0: half of the MINE epochs

  std::optional<std::size_t> rel_epochs, rel_messages, rel_batch, rel_width;
  std::optional<double> rel_learning_rate;
  std::optional<unsigned> rel_q;
  std::size_t rel_memory_mb = 1024;

  std::optional<std::size_t> mine_epochs, mine_width, mine_layers, mine_messages, mine_batch,
      mine_window;
  std::size_t seed_extra = 8;
  std::optional<std::size_t> ranking_epochs;

  std::vector<unsigned> bounds_n_list{4, 8, 12, 16};
  double bounds_epsilon = 1e-3;
  double bounds_delta = 1e-3;
  std::size_t bounds_samples = 1'000'000;
  bounds::EveNoiseReading eve_reading = bounds::EveNoiseReading::standard_normal;
  bounds::ConverseForm converse_form = bounds::ConverseForm::derived;
  bounds::BetaEstimator beta_estimator = bounds::BetaEstimator::importance;

  Config source;  // the merged key=value view, hashed into the manifest

  static ExperimentConfig from(const Config& config);

  ReliabilityConfig reliability_for(unsigned n) const;
  MineConfig mine() const;
  MineConfig ranking_mine() const;
  bounds::BoundConfig bounds_for(unsigned n) const;
};

// Deterministic per-stage seed derived from the global seed and a label.
std::uint64_t stage_seed(std::uint64_t global, const std::string& label);

class Manifest {
 public:
  Manifest(std::filesystem::path root, std::string config_hash, std::string config_text);

  void add_artifact(const std::filesystem::path& path);
  void add_stage(const std::string& name, double wall_seconds);
  // Writes <root>/manifest.json and returns its path.
  std::filesystem::path write() const;

 private:
  std::filesystem::path root_;
  std::string config_hash_;
  std::string config_text_;
  std::vector<std::pair<std::string, double>> stages_;
  std::map<std::string, std::string> artifacts_;  // relative path -> sha256
};

// Problems found when re-hashing the listed artifacts; empty when consistent.
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path);

// Pipeline stages. Each appends its artifacts and wall-clock to the manifest.
void cmd_train(const ExperimentConfig& cfg, Manifest& manifest);
void cmd_eval(const ExperimentConfig& cfg, Manifest& manifest);
void cmd_seed_search(const ExperimentConfig& cfg, Manifest& manifest);
void cmd_leakage(const ExperimentConfig& cfg, Manifest& manifest);
void cmd_bounds(const ExperimentConfig& cfg, Manifest& manifest);
// Chains the stages a figure needs. Build cfg with figure_defaults(tag)
// underneath the user's settings.
void cmd_reproduce(const std::string& tag, const ExperimentConfig& cfg, Manifest& manifest);

// Figure tags accepted by cmd_reproduce.
const std::vector<std::string>& figure_tags();
// Config keys set by a figure tag before user overrides are applied.
Config figure_defaults(const std::string& tag, Profile scale);
// Layers: documented defaults < figure defaults (when tag is set) < user.
ExperimentConfig compose(const std::optional<std::string>& tag, const Config& user);

// CSV headers of the pipeline outputs.
inline constexpr const char* kPeHeader =
    "n,q,k,seed,channel,snr_b_db,trials,pe_message,pe_message_lower,pe_message_upper,"
    "pe_inner,pe_inner_lower,pe_inner_upper,ordering_ok,monotone_ok";
inline constexpr const char* kLeakageHeader =
    "n,q,k,seed,channel,snr_e_db,leakage_bits,leakage_bits_clipped,tail_stderr_bits,"
    "mine_profile,trace_file,nesting_ok";
inline constexpr const char* kBoundsHeader =
    "n,epsilon,delta,snrB,snrE,bound_type,value_bits_per_use,stderr";
inline constexpr const char* kMeasuredHeader =
    "n,q,k,rate_bits_per_use,epsilon,epsilon_upper,delta_bits,mine_profile";
inline constexpr const char* kRankingHeader = "n,q,k,seed_binary_string,leakage_bits,stage";

}  // namespace wiretap::harness
