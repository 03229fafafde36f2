#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "wiretap/error.hpp"
#include "wiretap/harness.hpp"
#include "wiretap/hashing.hpp"

using namespace wiretap;
using namespace wiretap::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

Config tiny_pipeline(const fs::path& out) {
  return Config::parse(
      "n_list = 3\n"
      "k_list = 1,2\n"
      "seed = 42\n"
      "out = " + out.string() + "\n"
      "reliability.epochs = 4\n"
      "reliability.messages_per_epoch = 2000\n"
      "reliability.batch_size = 500\n"
      "eval.channels = awgn,compound,avc\n"
      "eval.trials = 3000\n"
      "eval.avc_trials = 3000\n"
      "avc.block_codewords = 1000\n"
      "leakage.channels = awgn,compound,avc_symbol,avc_alternating\n"
      "mine.epochs = 6\n"
      "mine.window = 2\n"
      "mine.width = 8\n"
      "mine.hidden_layers = 1\n"
      "mine.messages_per_epoch = 1000\n"
      "mine.batch_size = 250\n"
      "seed_search.extra = 2\n"
      "seed_search.ranking_epochs = 3\n"
      "bounds.n_list = 4\n"
      "bounds.mc_samples = 2000\n");
}

void run_all(const ExperimentConfig& cfg) {
  Manifest m(cfg.out, cfg.source.hash(), cfg.source.canonical());
  cmd_train(cfg, m);
  cmd_seed_search(cfg, m);
  cmd_eval(cfg, m);
  cmd_leakage(cfg, m);
  cmd_bounds(cfg, m);
  m.write();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config parsing handles comments, whitespace and later values") {
  const auto c = Config::parse("# header\n n_list = 4, 6 # inline\n\nseed=3\nseed = 5\n");
  CHECK(c.get("n_list") == "4, 6");
  CHECK(c.get("seed") == "5");
  CHECK_FALSE(c.has("profile"));
  CHECK(c.canonical() == "n_list=4, 6\nseed=5\n");
  CHECK(c.hash() == sha256_hex(c.canonical()));
  CHECK_THROWS_AS(Config::parse("no equals sign\n"), Error);
  Config d;
  CHECK_THROWS_AS(d.set_assignment("=3"), Error);
  d.set_assignment("seed=9");
  CHECK(d.get("seed") == "9");
}

TEST_CASE("unknown keys and bad values are configuration errors") {
  auto expect_config_error = [](const std::string& text) {
    try {
      ExperimentConfig::from(Config::parse(text));
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::configuration);
    }
  };
  expect_config_error("colour = blue\n");
  expect_config_error("n_list = 1\n");
  expect_config_error("seed = x\n");
  expect_config_error("eval.channels = fading\n");
  expect_config_error("bounds.eve_reading = other\n");
  expect_config_error("reliability.batch_size = 333\n");
  expect_config_error("mine.profile = huge\n");
}

TEST_CASE("documented defaults build a valid configuration") {
  const auto c = ExperimentConfig::from(Config{});
  CHECK(c.n_list == std::vector<unsigned>{4, 6, 8});
  CHECK(c.profile == Profile::fast);
  CHECK(c.mine().profile == "fast");
  CHECK(c.bounds_samples == 1000000u);
  CHECK(c.reliability_for(8).q == 7u);
  CHECK(documented_keys().count("bounds.beta_estimator") == 1u);
}

TEST_CASE("paper profile echoes the documented training budget") {
  Config u;
  u.set("profile", "paper");
  const auto c = ExperimentConfig::from(u);
  const auto r = c.reliability_for(10);
  CHECK(r.epochs == 600u);
  CHECK(r.learning_rate == 1e-3);
  CHECK(r.batch_size == 1000u);
  CHECK(r.messages_per_epoch == 100000u);
  CHECK(c.mine().epochs == 10000u);
  CHECK(c.ranking_mine().epochs == 2000u);
}

TEST_CASE("compose layers defaults, figure settings and user overrides") {
  Config u;
  u.set("k_list", "2");
  const auto c = compose(std::string("fig7"), u);
  CHECK(c.experiment == "fig7");
  CHECK(c.n_list == std::vector<unsigned>{8});
  CHECK(c.k_list == std::vector<unsigned>{2});
  CHECK(c.leakage_channels == std::vector<std::string>{"compound", "avc_symbol"});
  u.set("profile", "paper");
  CHECK(compose(std::string("fig4"), u).n_list.back() == 12u);
  CHECK(compose(std::nullopt, Config{}).experiment == "custom");
  try {
    compose(std::string("fig99"), Config{});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unknown_tag);
  }
  for (const auto& tag : figure_tags()) CHECK_NOTHROW(compose(tag, Config{}));
}

TEST_CASE("stage seeds depend on both the global seed and the label") {
  CHECK(stage_seed(1, "train/n4") == stage_seed(1, "train/n4"));
  CHECK(stage_seed(1, "train/n4") != stage_seed(2, "train/n4"));
  CHECK(stage_seed(1, "train/n4") != stage_seed(1, "train/n6"));
}

TEST_CASE("manifest verification detects missing and modified artifacts") {
  const auto root = fs::temp_directory_path() / "wiretap_unit_manifest";
  fs::remove_all(root);
  fs::create_directories(root / "sub");
  std::ofstream(root / "sub" / "a.csv") << "x\n1\n";
  Manifest m(root, "h", "text");
  m.add_artifact(root / "sub" / "a.csv");
  m.add_stage("s", 0.5);
  const auto path = m.write();
  CHECK(verify_manifest(path).empty());
  std::ofstream(root / "sub" / "a.csv") << "x\n2\n";
  CHECK(verify_manifest(path) == std::vector<std::string>{"hash mismatch: sub/a.csv"});
  fs::remove(root / "sub" / "a.csv");
  CHECK(verify_manifest(path) == std::vector<std::string>{"missing: sub/a.csv"});
  fs::remove_all(root);
}

TEST_CASE("stages that need a trained code fail cleanly without one") {
  const auto root = fs::temp_directory_path() / "wiretap_unit_empty";
  fs::remove_all(root);
  const auto cfg = ExperimentConfig::from(tiny_pipeline(root));
  Manifest m(cfg.out, cfg.source.hash(), cfg.source.canonical());
  try {
    cmd_eval(cfg, m);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::missing_model);
  }
  fs::remove_all(root);
}

TEST_CASE("a tiny pipeline is deterministic and writes the documented headers") {
  const auto a = fs::temp_directory_path() / "wiretap_unit_run_a";
  const auto b = fs::temp_directory_path() / "wiretap_unit_run_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_all(ExperimentConfig::from(tiny_pipeline(a)));
  run_all(ExperimentConfig::from(tiny_pipeline(b)));

  CHECK(first_line(a / "pe.csv") == kPeHeader);
  CHECK(first_line(a / "leakage.csv") == kLeakageHeader);
  CHECK(first_line(a / "bounds.csv") == kBoundsHeader);
  CHECK(first_line(a / "measured_points.csv") == kMeasuredHeader);
  CHECK(first_line(a / "seed_ranking.csv") == kRankingHeader);
  CHECK(first_line(a / "seeds.csv") == "n,q,k,seed_binary_string,leakage_bits,mine_profile");

  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    const auto rel = fs::relative(entry.path(), a);
    REQUIRE(fs::exists(b / rel));
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b / rel), rel.string());
    ++compared;
  }
  CHECK(compared >= 10u);
  CHECK(verify_manifest(a / "manifest.json").empty());

  // Every numeric row carries an uncertainty or the tag "exact".
  std::ifstream bounds(a / "bounds.csv");
  std::string line;
  std::getline(bounds, line);
  while (std::getline(bounds, line)) {
    const auto last = line.substr(line.rfind(',') + 1);
    CHECK(!last.empty());
    if (line.find("secrecy_capacity") != std::string::npos) CHECK(last == "exact");
  }

  // A second train call reuses the stored model unchanged.
  const auto before = slurp(a / "models" / "n3_q2.enc.wnet");
  const auto cfg = ExperimentConfig::from(tiny_pipeline(a));
  Manifest m(cfg.out, cfg.source.hash(), cfg.source.canonical());
  cmd_train(cfg, m);
  CHECK(slurp(a / "models" / "n3_q2.enc.wnet") == before);
  fs::remove_all(a);
  fs::remove_all(b);
}

}  // TEST_SUITE
