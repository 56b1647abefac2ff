// sfr: sound field reconstruction experiments from the command line.
//
//   sfr simulate --preset meshrir-like --out runs/sim
//   sfr train-pinn --config configs/train_pinn.json --set dataset=runs/sim/field.sfrd
//   sfr run --config configs/evaluate.json

#include <CLI11.hpp>

#include <iostream>

#include "sfr/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sound field reconstruction toolkit"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> sets;
  std::string out, preset;
  std::uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "Override a configuration key, e.g. --set train.iterations=500");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Master random seed");
    sub->add_option("--threads", threads, "Worker threads (1 gives bit-reproducible results)")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", quiet, "Suppress progress output");
  };

  std::vector<CLI::App*> subs;
  auto* run = app.add_subcommand("run", "Run the mode named in the configuration");
  add_common(run);
  subs.push_back(run);
  for (const auto& mode : sfr::app::mode_names()) {
    auto* sub = app.add_subcommand(mode, "Run the " + mode + " stage");
    add_common(sub);
    if (mode == "simulate") sub->add_option("--preset", preset, "free-field or meshrir-like");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  sfr::app::Overrides ov;
  CLI::App* chosen = app.get_subcommands().front();
  if (chosen != run) ov.mode = chosen->get_name();
  ov.sets = sets;
  if (chosen->count("--out")) ov.out = out;
  if (chosen->count("--seed")) ov.seed = seed;
  if (chosen->count("--threads")) ov.threads = threads;
  if (!preset.empty()) ov.preset = preset;
  std::optional<std::filesystem::path> config_path;
  if (!config.empty()) config_path = config;

  try {
    std::ostringstream sink;
    std::ostream& log = quiet ? static_cast<std::ostream&>(sink) : std::clog;
    const auto result = sfr::app::run(config_path, ov, log);
    std::cout << result.manifest.string() << '\n';
    if (!result.summary.empty()) std::cout << result.summary.dump(2) << '\n';
    return 0;
  } catch (const sfr::ConfigError& e) {
    std::cerr << "sfr: invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const sfr::Error& e) {
    std::cerr << "sfr: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sfr: unexpected failure: " << e.what() << '\n';
    return 1;
  }
}
