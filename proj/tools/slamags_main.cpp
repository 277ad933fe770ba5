// Command-line surface for the witness-rate benchmark: dataset generation,
// single-cell pretraining and MIL training, the full sweep, and reporting.
// Exit codes: 0 success, 1 runtime or partial sweep failure, 2 config error.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slamags/config.hpp"
#include "slamags/report.hpp"
#include "slamags/sweep.hpp"

namespace {

using namespace slamags;
namespace fs = std::filesystem;

struct CliState {
  std::string config_path;
  bool print_config = false;
  std::vector<std::string> methods;
  std::vector<double> witness_rates;
  std::vector<uint64_t> seeds;
  std::string out_dir;
  int jobs = 0;
  std::string encoder_path;
  std::string results_path;
};

void add_grid_flags(CLI::App* cmd, CliState* state) {
  cmd->add_option("--out", state->out_dir, "Output directory (default from config)");
  cmd->add_option("--methods", state->methods,
                  "Methods to run (comma separated)")
      ->delimiter(',');
  cmd->add_option("--witness-rates", state->witness_rates,
                  "Witness rates to run (comma separated)")
      ->delimiter(',');
  cmd->add_option("--seeds", state->seeds, "Seeds to run (comma separated)")
      ->delimiter(',');
  cmd->add_option("--jobs", state->jobs, "Worker threads for the sweep");
}

ExperimentConfig effective_config(const CliState& state) {
  ExperimentConfig config = state.config_path.empty()
                                ? default_experiment_config()
                                : load_experiment_config(state.config_path);
  if (!state.methods.empty()) config.methods = state.methods;
  if (!state.witness_rates.empty()) config.witness_rates = state.witness_rates;
  if (!state.seeds.empty()) config.seeds = state.seeds;
  if (!state.out_dir.empty()) config.out_dir = state.out_dir;
  if (state.jobs > 0) config.jobs = state.jobs;
  config.validate();
  return config;
}

// The first (method, witness_rate, seed) of the configured lists: the cell
// the single-stage subcommands operate on.
CellKey first_cell(const ExperimentConfig& config) {
  return {config.methods.front(), config.witness_rates.front(),
          config.seeds.front()};
}

int cmd_generate(const ExperimentConfig& config) {
  const std::string dir = (fs::path(config.out_dir) / "datasets").string();
  const std::vector<std::string> files =
      write_datasets(config, config.seeds.front(), dir);
  for (const std::string& f : files) std::cout << "wrote " << f << "\n";
  std::cout << "wrote " << dir << "/datasets_manifest.json\n";
  return 0;
}

int cmd_pretrain(const ExperimentConfig& config) {
  const CellKey key = first_cell(config);
  const Dataset data =
      generate_dataset(cell_dataset_config(config, key.witness_rate, key.seed));
  PretrainResult result = pretrain(method_from_string(key.method), data.train_bags,
                                   config.pretrain, key.seed);
  const fs::path cells = fs::path(config.out_dir) / "cells";
  fs::create_directories(cells);
  const std::string stem = (cells / cell_id(key)).string();
  save_encoder(stem + "_encoder.slag", result.params);
  result.log.checkpoint_path = stem + "_encoder.slag";
  save_run_log_csv(stem + "_runlog.csv", result.log);
  std::cout << "pretrained " << cell_id(key) << ": " << result.log.steps.size()
            << " steps, final loss "
            << (result.log.steps.empty() ? 0.0 : result.log.steps.back().loss_total)
            << "\nwrote " << stem + "_encoder.slag" << "\nwrote "
            << stem + "_runlog.csv" << "\n";
  return 0;
}

int cmd_train_mil(const ExperimentConfig& config, const std::string& encoder_path) {
  const CellKey key = first_cell(config);
  const fs::path cells = fs::path(config.out_dir) / "cells";
  const std::string stem = (cells / cell_id(key)).string();
  const std::string enc_path =
      encoder_path.empty() ? stem + "_encoder.slag" : encoder_path;
  const EncoderParams encoder = load_encoder(enc_path);
  const Dataset data =
      generate_dataset(cell_dataset_config(config, key.witness_rate, key.seed));
  const AggregatorParams aggregator =
      train_mil(data.train_bags, encoder, effective_mil_config(config), key.seed);
  fs::create_directories(cells);
  save_aggregator(stem + "_aggregator.slag", aggregator);
  const CellEval eval = evaluate_cell(encoder, aggregator, data.test_bags);
  std::cout << "trained " << cell_id(key) << " on " << enc_path << "\nwrote "
            << stem + "_aggregator.slag" << "\nf1=" << eval.f1 << " recall@"
            << eval.k << "=" << eval.recall << "\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& config) {
  const SweepOutcome outcome =
      run_sweep(config, [](const std::string& line) { std::cout << line << "\n"; });
  std::cout << "sweep: " << outcome.cells_run << " run, " << outcome.cells_skipped
            << " skipped, " << outcome.failures.size() << " failed; results in "
            << config.out_dir << "/results.csv\n";
  if (!outcome.failures.empty()) {
    for (const CellFailure& f : outcome.failures)
      std::cerr << "failed " << cell_id(f.key) << ": " << f.error << "\n";
    return 1;
  }
  return 0;
}

int cmd_report(const ExperimentConfig& config, const std::string& results_path) {
  const std::string results = results_path.empty()
                                  ? (fs::path(config.out_dir) / "results.csv").string()
                                  : results_path;
  const ReportPaths paths = write_report(results, config.out_dir);
  std::cout << "wrote " << paths.aggregate_csv << "\nwrote " << paths.f1_svg
            << "\nwrote " << paths.recall_svg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slide-label-aware multitask pretraining benchmark"};
  app.require_subcommand(0, 1);
  CliState state;
  app.add_option("--config", state.config_path, "Experiment config (JSON)");
  app.add_flag("--print-config", state.print_config,
               "Print the effective config and exit");

  CLI::App* generate = app.add_subcommand("generate", "Write per-witness-rate dataset CSVs");
  CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "Pretrain the first configured cell");
  CLI::App* train_mil = app.add_subcommand("train-mil", "Train the aggregator for the first configured cell");
  CLI::App* sweep = app.add_subcommand("sweep", "Run the full method x witness-rate x seed grid");
  CLI::App* report = app.add_subcommand("report", "Aggregate results and draw the charts");
  for (CLI::App* cmd : {generate, pretrain_cmd, train_mil, sweep, report}) {
    add_grid_flags(cmd, &state);
    cmd->fallthrough();
  }
  train_mil->add_option("--encoder", state.encoder_path,
                        "Encoder checkpoint (default: the one `pretrain` writes)");
  report->add_option("--results", state.results_path,
                     "Results CSV (default: <out>/results.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const ExperimentConfig config = effective_config(state);
    if (state.print_config) {
      std::cout << dump_experiment_config(config);
      return 0;
    }
    if (generate->parsed()) return cmd_generate(config);
    if (pretrain_cmd->parsed()) return cmd_pretrain(config);
    if (train_mil->parsed()) return cmd_train_mil(config, state.encoder_path);
    if (sweep->parsed()) return cmd_sweep(config);
    if (report->parsed()) return cmd_report(config, state.results_path);
    std::cerr << app.help();
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
