// Command-line front end for the wiretap code experiments.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wiretap/error.hpp"
#include "wiretap/harness.hpp"
#include "wiretap/runtime.hpp"

namespace h = wiretap::harness;

int main(int argc, char** argv) {
  wiretap::configure_allocator();
  CLI::App app{"Neural wiretap codes: training, evaluation, leakage estimation and bounds"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::optional<std::string> out;
  std::vector<std::string> assignments;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global random seed");
  app.add_option("--profile", profile, "training budget: fast|paper")
      ->check(CLI::IsMember({"fast", "paper"}));
  app.add_option("--out", out, "output directory");
  app.add_option("--set", assignments, "override a configuration key (key=value), repeatable");

  auto* train = app.add_subcommand("train", "train reliability codes for each n");
  auto* eval = app.add_subcommand("eval", "estimate error probabilities of trained codes");
  auto* seeds = app.add_subcommand("seed-search", "choose seeds minimizing estimated leakage");
  auto* leakage = app.add_subcommand("leakage", "estimate leakage with MINE");
  auto* bounds = app.add_subcommand("bounds", "evaluate finite-blocklength secrecy bounds");
  auto* reproduce = app.add_subcommand("reproduce", "run the pipeline behind one figure");
  std::string tag;
  reproduce->add_option("tag", tag, "figure tag")->required()->check(CLI::IsMember(h::figure_tags()));
  auto* verify = app.add_subcommand("verify", "re-hash the artifacts listed in a manifest");
  std::string manifest_path;
  verify->add_option("manifest", manifest_path, "path to manifest.json")->required();
  auto* keys = app.add_subcommand("keys", "list configuration keys and defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (keys->parsed()) {
      for (const auto& [k, v] : h::documented_keys()) std::cout << k << " = " << v << "\n";
      return 0;
    }
    if (verify->parsed()) {
      const auto problems = h::verify_manifest(manifest_path);
      for (const auto& p : problems) std::cout << p << "\n";
      std::cout << (problems.empty() ? "manifest ok" : "manifest FAILED") << "\n";
      return problems.empty() ? 0 : 1;
    }

    h::Config user;
    if (!config_path.empty()) user = h::Config::load(config_path);
    if (profile) user.set("profile", *profile);
    if (seed) user.set("seed", std::to_string(*seed));
    if (out) user.set("out", *out);
    for (const auto& a : assignments) user.set_assignment(a);

    const auto cfg = h::compose(reproduce->parsed() ? std::optional<std::string>(tag) : std::nullopt, user);
    h::Manifest manifest(cfg.out, cfg.source.hash(), cfg.source.canonical());
    if (train->parsed()) h::cmd_train(cfg, manifest);
    if (eval->parsed()) h::cmd_eval(cfg, manifest);
    if (seeds->parsed()) h::cmd_seed_search(cfg, manifest);
    if (leakage->parsed()) h::cmd_leakage(cfg, manifest);
    if (bounds->parsed()) h::cmd_bounds(cfg, manifest);
    if (reproduce->parsed()) h::cmd_reproduce(tag, cfg, manifest);
    std::cout << "wrote " << manifest.write().string() << "\n";
  } catch (const wiretap::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
