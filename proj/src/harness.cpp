#include "wiretap/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wiretap/error.hpp"
#include "wiretap/hashing.hpp"
#include "wiretap/secrecy.hpp"
#include "wiretap/stats.hpp"

namespace wiretap::harness {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(s);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string num(double v) {
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

std::string tag_of(double snr) {
  std::ostringstream out;
  out.precision(6);
  out << snr;
  auto s = out.str();
  std::replace(s.begin(), s.end(), '-', 'm');
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

constexpr double kLog2e = 1.4426950408889634;

void log_line(const std::string& msg) { std::clog << "[wiretap] " << msg << std::endl; }

class StageTimer {
 public:
  StageTimer(Manifest& m, std::string name)
      : manifest_(m), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {
    log_line("stage " + name_);
  }
  ~StageTimer() {
    const auto dt = std::chrono::steady_clock::now() - start_;
    manifest_.add_stage(name_, std::chrono::duration<double>(dt).count());
  }

 private:
  Manifest& manifest_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& header) : path_(path), out_(path) {
    if (!out_) throw Error(ErrorKind::io, "cannot write " + path.string());
    out_ << header << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }
  void close(Manifest& manifest) {
    out_.close();
    if (!out_) throw Error(ErrorKind::io, "failed writing " + path_.string());
    manifest.add_artifact(path_);
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

using CsvRow = std::map<std::string, std::string>;

std::vector<CsvRow> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split(line, ',');
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw Error(ErrorKind::io, "row width differs from header in " + path.string());
    CsvRow row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_floating_point_v<T>) {
      value = static_cast<T>(std::stod(text, &used));
    } else {
      if (!text.empty() && text.front() == '-') throw std::invalid_argument("negative");
      value = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorKind::configuration, "invalid value '" + text + "' for " + key);
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& cell : split(text, ',')) out.push_back(parse_number<T>(key, cell));
  if (out.empty()) throw Error(ErrorKind::configuration, key + " must not be empty");
  return out;
}

std::vector<std::string> parse_words(const std::string& key, const std::string& text,
                                     const std::set<std::string>& allowed) {
  std::vector<std::string> out;
  for (const auto& cell : split(text, ',')) {
    if (!allowed.count(cell))
      throw Error(ErrorKind::configuration, "unknown value '" + cell + "' for " + key);
    out.push_back(cell);
  }
  if (out.empty()) throw Error(ErrorKind::configuration, key + " must not be empty");
  return out;
}

}  // namespace

// ---------------------------------------------------------------- config

Config Config::parse(const std::string& text) {
  Config c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    if (line.find('=') == std::string::npos)
      throw Error(ErrorKind::configuration, "line " + std::to_string(lineno) + ": expected key = value");
    c.set_assignment(line);
  }
  return c;
}

Config Config::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::configuration, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::set(const std::string& key, const std::string& value) { values_[trim(key)] = trim(value); }

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
    throw Error(ErrorKind::configuration, "expected key=value, got '" + assignment + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::optional<std::string> Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string Config::hash() const { return sha256_hex(canonical()); }

const std::map<std::string, std::string>& documented_keys() {
  static const std::map<std::string, std::string> keys = {
      {"experiment", "custom"},
      {"n_list", "4,6,8"},
      {"k_list", "1,2"},
      {"profile", "fast"},
      {"seed", "1"},
      {"out", "out"},
      {"snr_b_db", "9"},
      {"snr_e_db", "-5"},
      {"eval.channels", "awgn,compound"},
      {"eval.compound_snr_b_db", "9,10"},
      {"eval.trials", "100000"},
      {"eval.avc_trials", "200000"},
      {"leakage.channels", "awgn"},
      {"leakage.compound_snr_e_db", "-8,-6.5,-5"},
      {"leakage.alternating_snr_e_db", "-8,-5"},
      {"leakage.switch_epochs", "0"},
      {"avc.snr_b_lo", "9"},
      {"avc.snr_b_hi", "12"},
      {"avc.snr_b_step", "0.1"},
      {"avc.snr_e_lo", "-8"},
      {"avc.snr_e_hi", "-5"},
      {"avc.snr_e_step", "0.01"},
      {"avc.block_codewords", "50000"},
      {"reliability.epochs", ""},
      {"reliability.messages_per_epoch", ""},
      {"reliability.batch_size", ""},
      {"reliability.learning_rate", ""},
      {"reliability.q", ""},
      {"reliability.width", ""},
      {"reliability.memory_budget_mb", "1024"},
      {"mine.profile", ""},
      {"mine.epochs", ""},
      {"mine.width", ""},
      {"mine.hidden_layers", ""},
      {"mine.messages_per_epoch", ""},
      {"mine.batch_size", ""},
      {"mine.window", ""},
      {"seed_search.extra", "8"},
      {"seed_search.ranking_epochs", ""},
      {"bounds.n_list", "4,8,12,16"},
      {"bounds.epsilon", "0.001"},
      {"bounds.delta", "0.001"},
      {"bounds.mc_samples", "1000000"},
      {"bounds.eve_reading", "standard_normal"},
      {"bounds.converse_form", "derived"},
      {"bounds.beta_estimator", "importance"},
  };
  return keys;
}

ExperimentConfig ExperimentConfig::from(const Config& user) {
  Config merged;
  for (const auto& [k, v] : documented_keys()) merged.set(k, v);
  for (const auto& [k, v] : user.values()) {
    if (!documented_keys().count(k)) throw Error(ErrorKind::configuration, "unknown key '" + k + "'");
    merged.set(k, v);
  }
  const auto& m = merged.values();
  auto str = [&](const char* key) { return m.at(key); };
  auto opt_size = [&](const char* key) -> std::optional<std::size_t> {
    if (str(key).empty()) return std::nullopt;
    return parse_number<std::size_t>(key, str(key));
  };

  ExperimentConfig c;
  c.source = merged;
  c.experiment = str("experiment");
  c.n_list = parse_list<unsigned>("n_list", str("n_list"));
  c.k_list = parse_list<unsigned>("k_list", str("k_list"));
  c.profile = parse_profile(str("profile"));
  c.mine_profile = str("mine.profile").empty() ? to_string(c.profile) : str("mine.profile");
  MineConfig::for_profile(c.mine_profile);
  c.seed = parse_number<std::uint64_t>("seed", str("seed"));
  c.out = str("out");
  c.snr_b_db = parse_number<double>("snr_b_db", str("snr_b_db"));
  c.snr_e_db = parse_number<double>("snr_e_db", str("snr_e_db"));
  c.eval_channels = parse_words("eval.channels", str("eval.channels"), {"awgn", "compound", "avc"});
  c.compound_snr_b = parse_list<double>("eval.compound_snr_b_db", str("eval.compound_snr_b_db"));
  c.eval_trials = parse_number<std::uint64_t>("eval.trials", str("eval.trials"));
  c.avc_trials = parse_number<std::uint64_t>("eval.avc_trials", str("eval.avc_trials"));
  c.leakage_channels = parse_words("leakage.channels", str("leakage.channels"),
                                   {"awgn", "compound", "avc_symbol", "avc_alternating"});
  c.compound_snr_e = parse_list<double>("leakage.compound_snr_e_db", str("leakage.compound_snr_e_db"));
  c.alternating_snr_e =
      parse_list<double>("leakage.alternating_snr_e_db", str("leakage.alternating_snr_e_db"));
  c.switch_epochs = parse_number<std::size_t>("leakage.switch_epochs", str("leakage.switch_epochs"));
  c.avc_b_lo = parse_number<double>("avc.snr_b_lo", str("avc.snr_b_lo"));
  c.avc_b_hi = parse_number<double>("avc.snr_b_hi", str("avc.snr_b_hi"));
  c.avc_b_step = parse_number<double>("avc.snr_b_step", str("avc.snr_b_step"));
  c.avc_e_lo = parse_number<double>("avc.snr_e_lo", str("avc.snr_e_lo"));
  c.avc_e_hi = parse_number<double>("avc.snr_e_hi", str("avc.snr_e_hi"));
  c.avc_e_step = parse_number<double>("avc.snr_e_step", str("avc.snr_e_step"));
  c.avc_block_codewords = parse_number<std::uint64_t>("avc.block_codewords", str("avc.block_codewords"));

  c.rel_epochs = opt_size("reliability.epochs");
  c.rel_messages = opt_size("reliability.messages_per_epoch");
  c.rel_batch = opt_size("reliability.batch_size");
  c.rel_width = opt_size("reliability.width");
  if (!str("reliability.learning_rate").empty())
    c.rel_learning_rate = parse_number<double>("reliability.learning_rate", str("reliability.learning_rate"));
  if (auto q = opt_size("reliability.q")) c.rel_q = static_cast<unsigned>(*q);
  c.rel_memory_mb = parse_number<std::size_t>("reliability.memory_budget_mb", str("reliability.memory_budget_mb"));

  c.mine_epochs = opt_size("mine.epochs");
  c.mine_width = opt_size("mine.width");
  c.mine_layers = opt_size("mine.hidden_layers");
  c.mine_messages = opt_size("mine.messages_per_epoch");
  c.mine_batch = opt_size("mine.batch_size");
  c.mine_window = opt_size("mine.window");
  c.seed_extra = parse_number<std::size_t>("seed_search.extra", str("seed_search.extra"));
  c.ranking_epochs = opt_size("seed_search.ranking_epochs");

  c.bounds_n_list = parse_list<unsigned>("bounds.n_list", str("bounds.n_list"));
  c.bounds_epsilon = parse_number<double>("bounds.epsilon", str("bounds.epsilon"));
  c.bounds_delta = parse_number<double>("bounds.delta", str("bounds.delta"));
  c.bounds_samples = parse_number<std::size_t>("bounds.mc_samples", str("bounds.mc_samples"));
  const auto reading = str("bounds.eve_reading");
  if (reading == "standard_normal") c.eve_reading = bounds::EveNoiseReading::standard_normal;
  else if (reading == "channel_variance") c.eve_reading = bounds::EveNoiseReading::channel_variance;
  else throw Error(ErrorKind::configuration, "bounds.eve_reading: standard_normal|channel_variance");
  const auto form = str("bounds.converse_form");
  if (form == "derived") c.converse_form = bounds::ConverseForm::derived;
  else if (form == "printed") c.converse_form = bounds::ConverseForm::printed;
  else throw Error(ErrorKind::configuration, "bounds.converse_form: derived|printed");
  const auto beta = str("bounds.beta_estimator");
  if (beta == "importance") c.beta_estimator = bounds::BetaEstimator::importance;
  else if (beta == "direct") c.beta_estimator = bounds::BetaEstimator::direct;
  else throw Error(ErrorKind::configuration, "bounds.beta_estimator: importance|direct");

  for (unsigned n : c.n_list) c.reliability_for(n).validate();
  c.mine().validate();
  for (unsigned n : c.bounds_n_list) c.bounds_for(n).validate();
  return c;
}

ReliabilityConfig ExperimentConfig::reliability_for(unsigned n) const {
  if (n < 2 && !rel_q)
    throw Error(ErrorKind::configuration, "blocklength n=" + std::to_string(n) + " leaves q=0");
  auto r = ReliabilityConfig::for_profile(n, profile, stage_seed(seed, "train/n" + std::to_string(n)));
  r.snr_db = snr_b_db;
  if (rel_q) r.q = *rel_q;
  if (rel_epochs) r.epochs = *rel_epochs;
  if (rel_messages) r.messages_per_epoch = *rel_messages;
  if (rel_batch) r.batch_size = *rel_batch;
  if (rel_width) r.hidden_width = *rel_width;
  if (rel_learning_rate) r.learning_rate = *rel_learning_rate;
  r.memory_budget_bytes = rel_memory_mb << 20;
  return r;
}

MineConfig ExperimentConfig::mine() const {
  auto m = MineConfig::for_profile(mine_profile);
  if (mine_epochs) m.epochs = *mine_epochs;
  if (mine_width) m.width = *mine_width;
  if (mine_layers) m.hidden_layers = *mine_layers;
  if (mine_messages) m.messages_per_epoch = *mine_messages;
  if (mine_batch) m.batch_size = *mine_batch;
  if (mine_window) m.window = *mine_window;
  return m;
}

MineConfig ExperimentConfig::ranking_mine() const {
  auto m = mine().reduced();
  if (ranking_epochs) m.epochs = *ranking_epochs;
  return m;
}

bounds::BoundConfig ExperimentConfig::bounds_for(unsigned n) const {
  bounds::BoundConfig b;
  b.n = n;
  b.epsilon = bounds_epsilon;
  b.delta = bounds_delta;
  b.snr_b_db = snr_b_db;
  b.snr_e_db = snr_e_db;
  b.mc_samples = bounds_samples;
  b.seed = stage_seed(seed, "bounds/n" + std::to_string(n));
  b.eve_reading = eve_reading;
  b.converse_form = converse_form;
  b.beta_estimator = beta_estimator;
  return b;
}

std::uint64_t stage_seed(std::uint64_t global, const std::string& label) {
  // FNV-1a of the label mixed with the global seed through splitmix64.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::uint64_t z = global ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------- manifest

Manifest::Manifest(fs::path root, std::string config_hash, std::string config_text)
    : root_(std::move(root)), config_hash_(std::move(config_hash)), config_text_(std::move(config_text)) {}

void Manifest::add_artifact(const fs::path& path) {
  const auto rel = fs::relative(path, root_).generic_string();
  artifacts_[rel] = sha256_file(path);
}

void Manifest::add_stage(const std::string& name, double wall_seconds) {
  stages_.emplace_back(name, wall_seconds);
}

fs::path Manifest::write() const {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["config_hash"] = config_hash_;
  j["config"] = config_text_;
  auto& stages = j["stages"] = nlohmann::ordered_json::array();
  for (const auto& [name, secs] : stages_) stages.push_back({{"name", name}, {"wall_seconds", secs}});
  auto& arts = j["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& [path, sha] : artifacts_) arts.push_back({{"path", path}, {"sha256", sha}});
  fs::create_directories(root_);
  const auto path = root_ / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  return path;
}

std::vector<std::string> verify_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::io, std::string("malformed manifest: ") + e.what());
  }
  std::vector<std::string> problems;
  const auto root = manifest_path.parent_path();
  for (const auto& a : j.at("artifacts")) {
    const auto rel = a.at("path").get<std::string>();
    const auto path = root / rel;
    if (!fs::exists(path)) {
      problems.push_back("missing: " + rel);
    } else if (sha256_file(path) != a.at("sha256").get<std::string>()) {
      problems.push_back("hash mismatch: " + rel);
    }
  }
  return problems;
}

// ---------------------------------------------------------------- stages

namespace {

fs::path models_dir(const ExperimentConfig& cfg) { return cfg.out / "models"; }

bool same_training(const ReliabilityConfig& a, const ReliabilityConfig& b) {
  return a.n == b.n && a.q == b.q && a.snr_db == b.snr_db && a.learning_rate == b.learning_rate &&
         a.epochs == b.epochs && a.messages_per_epoch == b.messages_per_epoch &&
         a.batch_size == b.batch_size && a.hidden_width == b.hidden_width && a.power == b.power &&
         a.seed == b.seed;
}

std::shared_ptr<const ReliabilityCode> load_for(const ExperimentConfig& cfg, unsigned n) {
  const auto rc = cfg.reliability_for(n);
  return std::make_shared<const ReliabilityCode>(load_code(models_dir(cfg), n, rc.q));
}

fs::path seeds_path(const ExperimentConfig& cfg) { return cfg.out / "seeds.csv"; }

std::optional<SeedRecord> find_seed(const ExperimentConfig& cfg, unsigned n, unsigned q, unsigned k) {
  if (!fs::exists(seeds_path(cfg))) return std::nullopt;
  for (const auto& r : read_seed_table(seeds_path(cfg)))
    if (r.n == n && r.q == q && r.k == k) return r;
  return std::nullopt;
}

// Seed from the seed table, else the listed default, else the unit element.
gf2q::Seed resolve_seed(const ExperimentConfig& cfg, unsigned n, unsigned q, unsigned k) {
  const auto field = gf2q::FieldSpec::standard(q);
  if (auto r = find_seed(cfg, n, q, k)) return gf2q::Seed::parse(r->seed_binary, field);
  if (auto s = table_seed(n, k, field)) return *s;
  return gf2q::Seed(gf2q::kOne, field);
}

void upsert_seeds(const ExperimentConfig& cfg, const std::vector<SeedRecord>& fresh, Manifest& manifest) {
  std::vector<SeedRecord> rows;
  if (fs::exists(seeds_path(cfg))) rows = read_seed_table(seeds_path(cfg));
  for (const auto& f : fresh) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const SeedRecord& r) { return r.n == f.n && r.q == f.q && r.k == f.k; });
    if (it != rows.end()) *it = f;
    else rows.push_back(f);
  }
  std::sort(rows.begin(), rows.end(), [](const SeedRecord& a, const SeedRecord& b) {
    return std::tie(a.n, a.q, a.k) < std::tie(b.n, b.q, b.k);
  });
  write_seed_table(rows, seeds_path(cfg));
  manifest.add_artifact(seeds_path(cfg));
}

std::vector<SeedRecord> search_seeds(const ExperimentConfig& cfg, unsigned n, unsigned k,
                                     std::vector<std::vector<std::string>>& ranking_rows) {
  const auto code = load_for(cfg, n);
  const auto field = gf2q::FieldSpec::standard(code->q());
  const std::string cell = "n" + std::to_string(n) + "/k" + std::to_string(k);
  RngStream pick(stage_seed(cfg.seed, "candidates/" + cell), "candidates");
  const auto candidates = default_candidates(n, k, field, pick, cfg.seed_extra);
  log_line("seed search " + cell + " over " + std::to_string(candidates.size()) + " candidates");
  const auto ranking = cfg.ranking_mine();
  const auto full = cfg.mine();
  const auto result = seed_search(code, k, cfg.snr_e_db, candidates, ranking, full,
                                  stage_seed(cfg.seed, "seed-search/" + cell));
  for (const auto& s : result.table)
    ranking_rows.push_back({std::to_string(n), std::to_string(code->q()), std::to_string(k),
                            s.seed.str(field), num(s.leakage_bits), ranking.profile});
  ranking_rows.push_back({std::to_string(n), std::to_string(code->q()), std::to_string(k),
                          result.best.str(field), num(result.final_estimate.reported_bits),
                          full.profile});
  return {{n, code->q(), k, result.best.str(field), result.final_estimate.reported_bits, full.profile}};
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg, Manifest& manifest) {
  StageTimer timer(manifest, "train");
  for (unsigned n : cfg.n_list) {
    const auto rc = cfg.reliability_for(n);
    const auto files = code_files(models_dir(cfg), n, rc.q);
    bool reuse = false;
    if (fs::exists(files.metadata)) {
      try {
        reuse = same_training(load_code(models_dir(cfg), n, rc.q).config(), rc);
      } catch (const Error&) {
        reuse = false;
      }
    }
    if (reuse) {
      log_line("reusing trained code n=" + std::to_string(n));
    } else {
      log_line("training n=" + std::to_string(n) + " q=" + std::to_string(rc.q) + " (" +
               std::to_string(rc.epochs) + " epochs)");
      RngStream rng(rc.seed, "train");
      const auto code = train(rc, rng);
      save_code(code, models_dir(cfg));
      CsvFile loss(models_dir(cfg) / (code_stem(n, rc.q) + ".loss.csv"), "epoch,loss");
      for (std::size_t e = 0; e < code.loss_trace().size(); ++e)
        loss.row({std::to_string(e), num(code.loss_trace()[e])});
      loss.close(manifest);
    }
    manifest.add_artifact(files.encoder);
    manifest.add_artifact(files.decoder);
    manifest.add_artifact(files.metadata);
  }
}

void cmd_eval(const ExperimentConfig& cfg, Manifest& manifest) {
  StageTimer timer(manifest, "eval");
  fs::create_directories(cfg.out);
  CsvFile csv(cfg.out / "pe.csv", kPeHeader);
  for (unsigned n : cfg.n_list) {
    const auto code = load_for(cfg, n);
    for (unsigned k : cfg.k_list) {
      if (k > code->q()) continue;
      const WiretapCode wc(code, resolve_seed(cfg, n, code->q(), k), k);
      const std::string cell = "n" + std::to_string(n) + "/k" + std::to_string(k);
      auto emit = [&](const std::string& channel, const std::string& snr, std::uint64_t trials,
                      const PeReport& r, const std::string& monotone) {
        csv.row({std::to_string(n), std::to_string(code->q()), std::to_string(k),
                 wc.seed().str(wc.field()), channel, snr, std::to_string(trials),
                 num(r.message.estimate), num(r.message.lower), num(r.message.upper),
                 num(r.inner.estimate), num(r.inner.lower), num(r.inner.upper),
                 leq_within_ci(r.message, r.inner) ? "1" : "0", monotone});
      };
      for (const auto& channel : cfg.eval_channels) {
        if (channel == "awgn") {
          const RngStream rng(stage_seed(cfg.seed, "eval/" + cell + "/awgn"), "pe");
          const auto r = estimate_pe_report(
              wc, AvcChannel::awgn(GaussianSpec::from_snr_db(cfg.snr_b_db)), cfg.eval_trials, rng);
          emit("awgn", num(cfg.snr_b_db), cfg.eval_trials, r, "na");
        } else if (channel == "compound") {
          // Trained for the noisiest member; every member is checked against it.
          UncertaintySet set{cfg.compound_snr_b, ReceiverRole::legitimate};
          const std::size_t design = set.design_index();
          std::vector<PeReport> reports;
          for (std::size_t i = 0; i < set.size(); ++i) {
            const RngStream rng(stage_seed(cfg.seed, "eval/" + cell + "/compound/" + std::to_string(i)), "pe");
            reports.push_back(estimate_pe_report(wc, AvcChannel(set, AvcSchedule::fixed(i)),
                                                 cfg.eval_trials, rng));
          }
          for (std::size_t i = 0; i < set.size(); ++i)
            emit("compound", num(set.snr_values_db[i]), cfg.eval_trials, reports[i],
                 leq_within_ci(reports[i].message, reports[design].message) ? "1" : "0");
        } else {
          const auto set = UncertaintySet::grid(cfg.avc_b_lo, cfg.avc_b_hi, cfg.avc_b_step,
                                                ReceiverRole::legitimate);
          const RngStream rng(stage_seed(cfg.seed, "eval/" + cell + "/avc"), "pe");
          const auto r = estimate_pe_report(
              wc, AvcChannel(set, AvcSchedule::per_block(cfg.avc_block_codewords)), cfg.avc_trials, rng);
          emit("avc", num(cfg.avc_b_lo) + ":" + num(cfg.avc_b_step) + ":" + num(cfg.avc_b_hi),
               cfg.avc_trials, r, "na");
        }
      }
    }
  }
  csv.close(manifest);
}

void cmd_seed_search(const ExperimentConfig& cfg, Manifest& manifest) {
  StageTimer timer(manifest, "seed-search");
  fs::create_directories(cfg.out);
  std::vector<SeedRecord> fresh;
  std::vector<std::vector<std::string>> ranking_rows;
  for (unsigned n : cfg.n_list) {
    const auto q = cfg.reliability_for(n).q;
    for (unsigned k : cfg.k_list) {
      if (k > q) continue;
      const auto rows = search_seeds(cfg, n, k, ranking_rows);
      fresh.insert(fresh.end(), rows.begin(), rows.end());
    }
  }
  upsert_seeds(cfg, fresh, manifest);
  CsvFile ranking(cfg.out / "seed_ranking.csv", kRankingHeader);
  for (const auto& r : ranking_rows) ranking.row(r);
  ranking.close(manifest);
}

void cmd_leakage(const ExperimentConfig& cfg, Manifest& manifest) {
  StageTimer timer(manifest, "leakage");
  const auto traces = cfg.out / "traces";
  fs::create_directories(traces);
  const auto mine = cfg.mine();

  // Seeds missing from the table are searched first.
  std::vector<SeedRecord> searched;
  std::vector<std::vector<std::string>> ranking_rows;
  for (unsigned n : cfg.n_list) {
    const auto q = cfg.reliability_for(n).q;
    for (unsigned k : cfg.k_list)
      if (k <= q && !find_seed(cfg, n, q, k)) {
        const auto rows = search_seeds(cfg, n, k, ranking_rows);
        searched.insert(searched.end(), rows.begin(), rows.end());
      }
  }
  if (!searched.empty()) {
    upsert_seeds(cfg, searched, manifest);
    CsvFile ranking(cfg.out / "seed_ranking.csv", kRankingHeader);
    for (const auto& r : ranking_rows) ranking.row(r);
    ranking.close(manifest);
  }

  struct Row {
    unsigned n, q, k;
    std::string seed, channel, snr;
    LeakageEstimate est;
    double tail_stderr;
    std::string trace;
  };
  std::vector<Row> rows;
  for (unsigned n : cfg.n_list) {
    const auto code = load_for(cfg, n);
    for (unsigned k : cfg.k_list) {
      if (k > code->q()) continue;
      const WiretapCode wc(code, resolve_seed(cfg, n, code->q(), k), k);
      std::vector<std::tuple<std::string, std::string, AvcChannel>> runs;
      for (const auto& channel : cfg.leakage_channels) {
        if (channel == "awgn") {
          runs.emplace_back("awgn", num(cfg.snr_e_db),
                            AvcChannel::awgn(GaussianSpec::from_snr_db(cfg.snr_e_db)));
        } else if (channel == "compound") {
          for (double s : cfg.compound_snr_e)
            runs.emplace_back("compound", num(s), AvcChannel::awgn(GaussianSpec::from_snr_db(s)));
        } else if (channel == "avc_symbol") {
          runs.emplace_back(
              "avc_symbol", num(cfg.avc_e_lo) + ":" + num(cfg.avc_e_step) + ":" + num(cfg.avc_e_hi),
              AvcChannel(UncertaintySet::grid(cfg.avc_e_lo, cfg.avc_e_hi, cfg.avc_e_step,
                                              ReceiverRole::eavesdropper),
                         AvcSchedule::per_symbol()));
        } else {
          const std::size_t every = cfg.switch_epochs ? cfg.switch_epochs : std::max<std::size_t>(1, mine.epochs / 2);
          std::string label;
          for (double s : cfg.alternating_snr_e) label += (label.empty() ? "" : "|") + num(s);
          runs.emplace_back("avc_alternating", label,
                            AvcChannel(UncertaintySet{cfg.alternating_snr_e, ReceiverRole::eavesdropper},
                                       AvcSchedule::alternating(every * mine.messages_per_epoch)));
        }
      }
      for (auto& [channel, snr, eve] : runs) {
        const std::string stem = "leak_n" + std::to_string(n) + "_k" + std::to_string(k) + "_" + channel +
                                 (channel == "awgn" || channel == "compound" ? "_" + tag_of(std::stod(snr)) : "");
        log_line("leakage " + stem);
        auto est = estimate_leakage(wc, eve, mine, stage_seed(cfg.seed, "leakage/" + stem));
        const auto tail = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(mine.tail_fraction * static_cast<double>(est.raw_nats.size()))));
        const std::vector<double> tail_vals(est.raw_nats.end() - static_cast<std::ptrdiff_t>(tail), est.raw_nats.end());
        const double tail_se =
            tail > 1 ? kLog2e * stddev(tail_vals) / std::sqrt(static_cast<double>(tail)) : 0.0;
        const auto trace = traces / (stem + ".csv");
        write_trace_csv(est, mine.window, trace);
        write_summary_json(est, mine, traces / (stem + ".json"));
        manifest.add_artifact(trace);
        manifest.add_artifact(traces / (stem + ".json"));
        rows.push_back({n, code->q(), k, wc.seed().str(wc.field()), channel, snr, std::move(est), tail_se,
                        fs::relative(trace, cfg.out).generic_string()});
      }
    }
  }

  constexpr double kNestingTolerance = 0.02;
  CsvFile csv(cfg.out / "leakage.csv", kLeakageHeader);
  for (const auto& r : rows) {
    std::string nesting = "na";
    if (r.k == 2) {
      for (const auto& o : rows)
        if (o.n == r.n && o.k == 1 && o.channel == r.channel && o.snr == r.snr)
          nesting = r.est.reported_bits >= o.est.reported_bits - kNestingTolerance ? "1" : "0";
    }
    csv.row({std::to_string(r.n), std::to_string(r.q), std::to_string(r.k), r.seed, r.channel, r.snr,
             num(r.est.reported_bits), num(r.est.clipped_bits()), num(r.tail_stderr), mine.profile,
             r.trace, nesting});
  }
  csv.close(manifest);
}

namespace {

void write_measured_points(const ExperimentConfig& cfg, Manifest& manifest) {
  const auto pe_path = cfg.out / "pe.csv";
  const auto leak_path = cfg.out / "leakage.csv";
  if (!fs::exists(pe_path) || !fs::exists(leak_path)) return;
  const auto pe = read_csv(pe_path);
  const auto leak = read_csv(leak_path);
  CsvFile csv(cfg.out / "measured_points.csv", kMeasuredHeader);
  for (const auto& p : pe) {
    if (p.at("channel") != "awgn") continue;
    for (const auto& l : leak) {
      if (l.at("channel") != "awgn" || l.at("n") != p.at("n") || l.at("k") != p.at("k")) continue;
      const double rate = std::stod(p.at("k")) / std::stod(p.at("n"));
      csv.row({p.at("n"), p.at("q"), p.at("k"), num(rate), p.at("pe_message"), p.at("pe_message_upper"),
               l.at("leakage_bits_clipped"), l.at("mine_profile")});
    }
  }
  csv.close(manifest);
}

}  // namespace

void cmd_bounds(const ExperimentConfig& cfg, Manifest& manifest) {
  StageTimer timer(manifest, "bounds");
  fs::create_directories(cfg.out);
  CsvFile csv(cfg.out / "bounds.csv", kBoundsHeader);
  for (unsigned n : cfg.bounds_n_list) {
    const auto bc = cfg.bounds_for(n);
    log_line("bounds n=" + std::to_string(n));
    const auto r = bounds::evaluate(bc);
    auto row = [&](const std::string& type, double value, const std::string& se) {
      csv.row({std::to_string(n), num(bc.epsilon), num(bc.delta), num(bc.snr_b_db), num(bc.snr_e_db),
               type, num(value), se});
    };
    row("achievability", r.achievability.rate, num(r.achievability.stderr_rate));
    row("converse", r.converse.rate, num(r.converse.stderr_rate));
    row("secrecy_capacity", r.secrecy_capacity, "exact");
  }
  csv.close(manifest);
  write_measured_points(cfg, manifest);
}

const std::vector<std::string>& figure_tags() {
  static const std::vector<std::string> tags = {"fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"};
  return tags;
}

Config figure_defaults(const std::string& tag, Profile scale) {
  if (std::find(figure_tags().begin(), figure_tags().end(), tag) == figure_tags().end())
    throw Error(ErrorKind::unknown_tag, "unknown figure tag '" + tag + "'");
  const bool paper = scale == Profile::paper;
  // Widths equal to 2^q exceed the default memory budget beyond n = 12.
  const std::string sweep = paper ? "2,3,4,5,6,7,8,9,10,11,12" : "4,6,8";
  const std::string single = paper ? "10" : "8";
  Config c;
  c.set("experiment", tag);
  c.set("profile", to_string(scale));
  if (tag == "fig3") {
    c.set("n_list", sweep);
    c.set("k_list", "1");
    c.set("eval.channels", "awgn");
  } else if (tag == "fig4") {
    c.set("n_list", sweep);
    c.set("k_list", "1,2");
    c.set("leakage.channels", "awgn");
  } else if (tag == "fig5") {
    c.set("n_list", sweep);
    c.set("k_list", "1");
    c.set("eval.channels", "awgn");
    c.set("leakage.channels", "awgn");
  } else if (tag == "fig6") {
    c.set("n_list", sweep);
    c.set("k_list", "1,2");
    c.set("eval.channels", "awgn,compound");
  } else if (tag == "fig7") {
    c.set("n_list", single);
    c.set("k_list", "1");
    c.set("leakage.channels", "compound,avc_symbol");
  } else if (tag == "fig8") {
    c.set("n_list", sweep);
    c.set("k_list", "1");
    c.set("eval.channels", "awgn");
    c.set("leakage.channels", "awgn");
    c.set("bounds.n_list", paper ? "2,4,6,8,10,12,14,16" : "4,8,12,16");
  } else {
    c.set("n_list", single);
    c.set("k_list", "1");
    c.set("eval.channels", "avc");
    c.set("leakage.channels", "avc_alternating");
    if (paper) c.set("leakage.switch_epochs", "5000");
  }
  return c;
}

ExperimentConfig compose(const std::optional<std::string>& tag, const Config& user) {
  Config merged;
  if (tag) {
    Profile scale = Profile::fast;
    if (auto p = user.get("profile")) scale = parse_profile(*p);
    merged = figure_defaults(*tag, scale);
  }
  for (const auto& [k, v] : user.values()) merged.set(k, v);
  return ExperimentConfig::from(merged);
}

void cmd_reproduce(const std::string& tag, const ExperimentConfig& cfg, Manifest& manifest) {
  if (std::find(figure_tags().begin(), figure_tags().end(), tag) == figure_tags().end())
    throw Error(ErrorKind::unknown_tag, "unknown figure tag '" + tag + "'");
  const bool needs_leakage = tag == "fig4" || tag == "fig5" || tag == "fig7" || tag == "fig8" || tag == "fig9";
  const bool needs_eval = tag == "fig3" || tag == "fig5" || tag == "fig6" || tag == "fig8" || tag == "fig9";
  cmd_train(cfg, manifest);
  if (needs_leakage) cmd_seed_search(cfg, manifest);
  if (needs_eval) cmd_eval(cfg, manifest);
  if (needs_leakage) cmd_leakage(cfg, manifest);
  if (tag == "fig8") cmd_bounds(cfg, manifest);

  if (tag == "fig3") {
    // Rate q/n of the inner code next to the normal approximation at its measured error.
    StageTimer timer(manifest, "fig3-table");
    CsvFile csv(cfg.out / "fig3.csv",
                "n,q,rate_bits_per_use,pe_inner,pe_inner_lower,pe_inner_upper,normal_approx_rate");
    std::set<std::string> seen;
    for (const auto& r : read_csv(cfg.out / "pe.csv")) {
      if (r.at("channel") != "awgn" || !seen.insert(r.at("n")).second) continue;
      const unsigned n = static_cast<unsigned>(std::stoul(r.at("n")));
      const double q = std::stod(r.at("q"));
      double eps = std::stod(r.at("pe_inner"));
      if (!(eps > 0.0)) eps = std::stod(r.at("pe_inner_upper"));
      eps = std::clamp(eps, 1e-12, 0.5);
      csv.row({r.at("n"), r.at("q"), num(q / n), r.at("pe_inner"), r.at("pe_inner_lower"),
               r.at("pe_inner_upper"), num(bounds::channel_log2_m(n, eps, cfg.snr_b_db) / n)});
    }
    csv.close(manifest);
  } else if (tag == "fig5") {
    // Secrecy bounds evaluated at each code's measured (epsilon, delta).
    StageTimer timer(manifest, "fig5-table");
    CsvFile csv(cfg.out / "fig5.csv",
                "n,k,rate_bits_per_use,epsilon,delta_bits,achievability,achievability_stderr,"
                "converse,converse_stderr");
    const auto pe = read_csv(cfg.out / "pe.csv");
    const auto leak = read_csv(cfg.out / "leakage.csv");
    for (const auto& p : pe) {
      if (p.at("channel") != "awgn") continue;
      for (const auto& l : leak) {
        if (l.at("channel") != "awgn" || l.at("n") != p.at("n") || l.at("k") != p.at("k")) continue;
        const unsigned n = static_cast<unsigned>(std::stoul(p.at("n")));
        auto bc = cfg.bounds_for(n);
        double eps = std::stod(p.at("pe_message"));
        if (!(eps > 0.0)) eps = std::stod(p.at("pe_message_upper"));
        bc.epsilon = std::clamp(eps, 1e-9, 0.45);
        bc.delta = std::clamp(std::stod(l.at("leakage_bits_clipped")), 1e-9, 0.45);
        const auto r = bounds::evaluate(bc);
        csv.row({p.at("n"), p.at("k"), num(std::stod(p.at("k")) / n), num(bc.epsilon), num(bc.delta),
                 num(r.achievability.rate), num(r.achievability.stderr_rate), num(r.converse.rate),
                 num(r.converse.stderr_rate)});
      }
    }
    csv.close(manifest);
  }
}

}  // namespace wiretap::harness
