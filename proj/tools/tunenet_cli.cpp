// Command line driver. Every subcommand takes a config file and an optional
// --seed, writes under the run directory, and exits with 0 on success, 1 on
// validation failure and 2 when a required artifact is missing.

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tunenet/errors.hpp"
#include "tunenet/experiment.hpp"

namespace {

using Driver = std::function<tunenet::eval::Outputs(const tunenet::eval::ExperimentConfig&)>;

struct Command {
  const char* name;
  const char* help;
  Driver run;
};

}  // namespace

int main(int argc, char** argv) {
  namespace ev = tunenet::eval;
  const Command commands[] = {
      {"gen-data", "Generate paired datasets", ev::run_gen_data},
      {"train", "Train TuneNet and the direct-prediction baseline", ev::run_train},
      {"tune", "Tune every test episode and write the per-iteration trace", ev::run_tune},
      {"baseline", "Run the comparison methods on a test set", ev::run_baseline},
      {"table1", "Payload-mass identification table", ev::run_table1},
      {"table2", "COR error vs rollouts table and curves", ev::run_table2},
      {"table3", "Object motion prediction error table", ev::run_table3},
      {"task", "Sim-to-sim bounce-shot task", ev::run_task},
  };

  CLI::App app{"Iterative residual tuning of simulator parameters"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string run_dir;
  std::map<const CLI::App*, const Command*> lookup;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "Base seed; overrides the config");
    sub->add_option("--run-dir", run_dir, "Output directory; overrides the config");
    lookup[sub] = &c;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const Command* cmd = nullptr;
  for (const auto& [sub, c] : lookup)
    if (sub->parsed()) cmd = c;

  try {
    auto cfg = ev::load_config(config_path, seed);
    if (!run_dir.empty()) cfg.run_dir = run_dir;
    const auto outputs = cmd->run(cfg);
    std::cout << cmd->name << ": wrote " << outputs.size() << " files to " << cfg.run_dir << '\n';
    for (const auto& o : outputs) std::cout << "  " << o << '\n';
    return 0;
  } catch (const tunenet::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
