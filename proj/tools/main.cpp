#include <CLI11.hpp>

#include <clocale>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "eegroar/config.hpp"
#include "eegroar/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CliState {
  std::string config_path;
  std::string out_dir = "run_out";
  std::string dataset;
  std::string base;
  std::string in_dir;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;  // <0: not given on the command line
  int jobs = 0;            // 0: not given
};

eegroar::RunConfig resolve_config(const CliState& cli) {
  eegroar::RunConfig cfg;
  if (!cli.config_path.empty())
    eegroar::apply_config(cfg, eegroar::read_config_file(cli.config_path));
  for (const std::string& assignment : cli.overrides)
    eegroar::apply_override(cfg, assignment);
  if (cli.seed >= 0) cfg.seed = static_cast<std::uint64_t>(cli.seed);
  if (cli.jobs > 0) cfg.jobs = cli.jobs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  CLI::App app{
      "eegroar: CNN training, attribution maps, and remove-and-retrain "
      "evaluation over EEG-like trial images"};
  app.require_subcommand(1);
  app.fallthrough();

  CliState cli;
  app.add_option("--config", cli.config_path,
                 "key = value configuration file");
  app.add_option("--seed", cli.seed, "master seed (overrides the config)");
  app.add_option("--jobs", cli.jobs, "worker threads for fold-level work");
  app.add_option("--out", cli.out_dir, "output directory");
  app.add_option("--set", cli.overrides,
                 "override one config entry, e.g. --set train.lr=0.002");

  CLI::App* synth =
      app.add_subcommand("synth", "generate a synthetic trial dataset");
  CLI::App* train = app.add_subcommand(
      "train", "leave-one-trial-out training and macro metrics");
  train->add_option("--dataset", cli.dataset, "dataset directory")
      ->required();
  CLI::App* attribute = app.add_subcommand(
      "attribute", "per-method relevance maps and window aggregates");
  attribute->add_option("--dataset", cli.dataset, "dataset directory")
      ->required();
  attribute->add_option("--base", cli.base,
                        "reuse a train run's saved fold models");
  CLI::App* roar = app.add_subcommand(
      "roar", "remove-and-retrain sweep with baselines and report");
  roar->add_option("--dataset", cli.dataset, "dataset directory")->required();
  roar->add_option("--base", cli.base,
                   "reuse a train run's saved fold models");
  CLI::App* report = app.add_subcommand(
      "report", "rebuild the statistical report from a roar run");
  report->add_option("--in", cli.in_dir, "roar output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const eegroar::RunConfig cfg = resolve_config(cli);
    if (synth->parsed()) {
      eegroar::cmd_synth(cfg, cli.out_dir);
    } else if (train->parsed()) {
      eegroar::cmd_train(cfg, cli.dataset, cli.out_dir);
    } else if (attribute->parsed()) {
      eegroar::cmd_attribute(cfg, cli.dataset, cli.base, cli.out_dir);
    } else if (roar->parsed()) {
      eegroar::cmd_roar(cfg, cli.dataset, cli.base, cli.out_dir);
    } else if (report->parsed()) {
      eegroar::cmd_report(cfg, cli.in_dir, cli.out_dir);
    }
    std::cout << "wrote " << cli.out_dir << "\n";
    return kExitOk;
  } catch (const eegroar::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
