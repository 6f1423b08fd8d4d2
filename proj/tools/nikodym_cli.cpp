// Command-line runner for the tube-averaging experiment presets.
//
//   nikodym run --preset theorem1-scaling --curve circle2d --deltas 2^-3..2^-7
//   nikodym run --config sweep.conf --seed 7
//   nikodym list-presets [--filter sharpness]

#include "nikodym/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Nikodym maximal-function experiments over curve-directed tubes"};
  app.require_subcommand(1);

  auto* list_cmd = app.add_subcommand("list-presets", "List experiment presets");
  std::string filter;
  list_cmd->add_option("--filter", filter, "substring filter");

  auto* run_cmd = app.add_subcommand("run", "Run one experiment preset");
  std::string preset, config_path, curve, deltas, out_dir;
  int d = 0, order = 0, workers = -1, samples = 0, fields = 0, trials = 0;
  double lambda = 0.0, p = 0.0, q = 0.0, slack = -1.0;
  long long seed = -1, mc_samples = 0;
  run_cmd->add_option("--preset", preset, "experiment name");
  run_cmd->add_option("--config", config_path, "key = value config file");
  run_cmd->add_option("--curve", curve, "curve registry key");
  run_cmd->add_option("--d", d, "ambient curve dimension");
  run_cmd->add_option("--delta,--deltas", deltas, "delta grid, e.g. 2^-3..2^-7");
  run_cmd->add_option("--lambda", lambda, "dyadic frequency scale");
  run_cmd->add_option("--N", order, "induction order (default d)");
  run_cmd->add_option("--p", p, "input exponent");
  run_cmd->add_option("--q", q, "output exponent");
  run_cmd->add_option("--seed", seed, "RNG seed");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--workers", workers, "worker pool size (0 = cores)");
  run_cmd->add_option("--slack", slack, "fitted-exponent slack");
  run_cmd->add_option("--samples", samples, "audit sample budget");
  run_cmd->add_option("--fields", fields, "random fields per delta");
  run_cmd->add_option("--trials", trials, "witness trials");
  run_cmd->add_option("--mc-samples", mc_samples, "Monte-Carlo samples per pair");

  CLI11_PARSE(app, argc, argv);

  if (list_cmd->parsed()) {
    const auto presets = nikodym::list_presets(filter);
    std::printf("%-22s %-34s %s\n", "preset", "parameters", "runtime");
    for (const auto& info : presets)
      std::printf("%-22s %-34s %s\n", info.name.c_str(),
                  info.parameters.c_str(), info.runtime_class.c_str());
    return 0;
  }

  try {
    nikodym::RunConfig config;
    if (!config_path.empty()) config = nikodym::parse_config_file(config_path);
    // flags override config keys
    if (!preset.empty()) config.experiment = preset;
    if (!curve.empty()) config.curve = curve;
    if (d > 0) config.d = d;
    if (!deltas.empty()) config.deltas = nikodym::parse_delta_spec(deltas);
    if (lambda > 0) config.lambda = lambda;
    if (order > 0) config.order = order;
    if (p > 0) config.p = p;
    if (q > 0) config.q = q;
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (workers >= 0) config.workers = workers;
    if (slack >= 0) config.slack = slack;
    if (samples > 0) config.samples = samples;
    if (fields > 0) config.fields = fields;
    if (trials > 0) config.trials = trials;
    if (mc_samples > 0) config.mc_samples = mc_samples;

    if (config.experiment.empty()) {
      std::cerr << "error: no experiment selected (use --preset or --config)\n";
      return 2;
    }
    const auto result = nikodym::run(config);
    if (result.exit_code != 0)
      std::cerr << "stage failed: " << result.failed_stage << "\n";
    std::cout << "artifacts: " << result.output_dir << "\n";
    return result.exit_code;
  } catch (const nikodym::ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
