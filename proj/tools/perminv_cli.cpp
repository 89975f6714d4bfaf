#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "perminv/combinatorics.hpp"
#include "perminv/experiment.hpp"
#include "perminv/plot.hpp"

namespace {

using nlohmann::json;

// One JSON object on stderr per failure so callers can parse it.
int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

json estimate_json(const perminv::ReturnEstimate& e) {
  return {{"mean", e.mean}, {"std", e.std}, {"episodes", e.episodes}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation-invariant state encoder experiments"};
  app.require_subcommand(1);

  std::string train_config;
  auto* train = app.add_subcommand("train", "Train every seed of one config and write the report");
  train->add_option("config", train_config, "Experiment config (JSON)")->required();

  std::vector<std::string> compare_configs;
  auto* cmp = app.add_subcommand("compare", "Run several configs and merge their reports");
  cmp->add_option("configs", compare_configs, "Experiment configs (JSON)")->required()->expected(2, -1);

  unsigned comb_n = 0, comb_m = 0;
  auto* comb = app.add_subcommand("combinatorics", "Ordered vs order-invariant state counts");
  comb->add_option("--n", comb_n, "Number of distinguishable values")->required();
  comb->add_option("--m", comb_m, "Number of objects")->required();

  std::string greedy_task;
  std::size_t greedy_m = 2;
  int greedy_episodes = 1000;
  std::uint64_t greedy_seed = 0;
  auto* greedy = app.add_subcommand("greedy", "Monte-Carlo return of the greedy heuristic");
  greedy->add_option("--task", greedy_task, "scavenger1 | scavenger2 | convoy")->required();
  greedy->add_option("--m", greedy_m, "Object count (ignored for convoy)");
  greedy->add_option("--episodes", greedy_episodes, "Episodes to average")->check(CLI::PositiveNumber);
  greedy->add_option("--seed", greedy_seed, "Episode stream seed");

  std::vector<std::string> plot_inputs;
  std::string plot_out;
  std::optional<double> plot_reference;
  int plot_window = 50;
  auto* plot = app.add_subcommand("plot", "Render curve CSVs as an SVG");
  plot->add_option("csv", plot_inputs, "Curve CSV files")->required();
  plot->add_option("--out", plot_out, "Output SVG path")->required();
  plot->add_option("--reference", plot_reference, "Greedy reference return");
  plot->add_option("--window", plot_window, "Moving-average window")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*train) {
      const auto result = perminv::run_experiment(std::filesystem::path(train_config));
      result.report.write_summary(std::cout);
      std::cout << "plot: " << result.plot_file.string() << '\n';
    } else if (*cmp) {
      std::vector<perminv::ExperimentConfig> configs;
      for (const auto& path : compare_configs) {
        configs.push_back(perminv::load_experiment_config(path));
      }
      perminv::compare(configs).write_summary(std::cout);
    } else if (*comb) {
      const auto s = perminv::state_space_sizes(comb_n, comb_m);
      std::cout << json{{"n", comb_n},
                        {"m", comb_m},
                        {"ordered", s.ordered.str()},
                        {"unordered", s.unordered.str()},
                        {"ratio", s.ratio_numerator.str() + "/" + s.ratio_denominator.str()}}
                       .dump()
                << '\n';
    } else if (*greedy) {
      const auto task = perminv::task_from_string(greedy_task);
      const auto est = perminv::estimate_greedy_return(task, greedy_m, greedy_episodes, greedy_seed);
      json out = estimate_json(est);
      out["task"] = greedy_task;
      out["m"] = greedy_m;
      std::cout << out.dump() << '\n';
    } else if (*plot) {
      std::vector<std::filesystem::path> files(plot_inputs.begin(), plot_inputs.end());
      perminv::emit_plot(files, plot_out, plot_reference, plot_window);
    }
  } catch (const perminv::ConfigError& e) {
    return fail("config", e.what(), 1);
  } catch (const std::invalid_argument& e) {
    return fail("invalid-argument", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return 0;
}
