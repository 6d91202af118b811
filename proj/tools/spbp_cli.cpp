// spbp: run backpressure routing experiments from a JSON config or preset.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spbp/spbp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

spbp::ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw spbp::ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw spbp::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return spbp::parse_config(j);
}

spbp::ExperimentConfig resolve(const std::string& config_path, const std::string& preset) {
  if (!preset.empty()) {
    auto c = spbp::find_preset(preset);
    if (!c) throw spbp::ConfigError("unknown preset '" + preset + "'");
    // A config file given alongside a preset overrides it wholesale.
    if (config_path.empty()) return *c;
  }
  if (config_path.empty()) throw spbp::ConfigError("either --config or --preset is required");
  return load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shortest-path-biased backpressure routing simulator"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir;
  bool trace = false, debug_queues = false;
  int jobs = -1;
  auto* simulate = app.add_subcommand("simulate", "Run an experiment sweep");
  simulate->add_option("--config", config_path, "Experiment config (JSON)");
  simulate->add_option("--preset", preset, "Named preset (see `presets`)");
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_flag("--trace", trace, "Write per-slot traces as NDJSON");
  simulate->add_flag("--debug-queues", debug_queues, "Write sparse per-slot queue lengths as CSV");
  simulate->add_option("--jobs", jobs, "Parallel runs (0 = all cores)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config file");
  validate->add_option("--config", validate_path, "Experiment config (JSON)")->required();

  auto* list = app.add_subcommand("presets", "List presets, or print one as a config");
  std::string show;
  list->add_option("name", show, "Preset to print");

  int net_nodes = 20;
  std::uint64_t net_seed = 1;
  double net_degree = 6.0;
  std::string net_out, bias_csv, bias_scheme = "sp_rbar_rmax_over_r";
  auto* network = app.add_subcommand("network", "Generate one network instance as JSON");
  network->add_option("--nodes", net_nodes, "Node count");
  network->add_option("--seed", net_seed, "Instance seed");
  network->add_option("--mean-degree", net_degree, "Target mean degree");
  network->add_option("--out", net_out, "Instance JSON path")->required();
  network->add_option("--bias-csv", bias_csv, "Also write the bias matrix as CSV");
  network->add_option("--bias", bias_scheme, "Bias scheme for --bias-csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      auto cfg = resolve(config_path, preset);
      spbp::ExperimentOptions opt;
      opt.out_dir = out_dir;
      opt.trace = trace;
      opt.debug_queues = debug_queues;
      opt.jobs = jobs;
      auto out = spbp::run_experiment(cfg, opt);
      std::cout << cfg.name << ": " << out.runs.size() << " runs written to " << out_dir << '\n';
    } else if (*validate) {
      auto cfg = load_config(validate_path);
      std::cout << "ok: " << cfg.name << " (" << spbp::enumerate_runs(cfg).size() << " runs)\n";
    } else if (*list) {
      if (show.empty()) {
        for (const auto& [name, cfg] : spbp::presets())
          std::cout << name << '\t' << spbp::enumerate_runs(cfg).size() << " runs\n";
      } else {
        auto cfg = spbp::find_preset(show);
        if (!cfg) throw spbp::ConfigError("unknown preset '" + show + "'");
        std::cout << spbp::config_to_json(*cfg).dump(2) << '\n';
      }
    } else if (*network) {
      spbp::NetGenParams p;
      p.connect_radius = spbp::radius_for_mean_degree(net_nodes, net_degree);
      auto net = spbp::generate_network(net_nodes, p, net_seed);
      std::ofstream(net_out) << spbp::network_to_json(net).dump(2) << '\n';
      if (!bias_csv.empty()) {
        std::ofstream os(bias_csv);
        spbp::compute_bias(net, spbp::parse_bias_kind(bias_scheme)).write_csv(os);
      }
    }
  } catch (const spbp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const spbp::InvariantViolation& e) {
    std::cerr << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
