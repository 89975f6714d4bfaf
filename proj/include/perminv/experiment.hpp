#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "perminv/environment.hpp"
#include "perminv/trainer.hpp"

namespace perminv {

/// Per-class encoder overrides; unset fields fall back to task defaults.
struct ClassOverride {
  std::optional<std::size_t> abstract_dim;
  std::vector<std::size_t> filter_hidden{64};
  std::vector<std::size_t> abstraction_hidden{64};
};

struct ExperimentConfig {
  TaskId task = TaskId::scavenger1;
  std::size_t objects = 2;
  Representation representation = Representation::encoder;
  std::vector<ClassOverride> encoder_classes;  // empty: all defaults
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path output_dir = "runs";
  double threshold = 0.8;
  int moving_average = 50;
  int greedy_episodes = 1000;
  int workers = 1;
  bool stop_on_threshold = false;

  /// Throws ConfigError naming the field path.
  void validate() const;
  /// Encoder spec for this task with overrides applied.
  EncoderSpec encoder_spec() const;
  std::string label() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses the nested config document. `task` is required; unknown keys are
/// rejected. When PERMINV_OUTPUT_DIR is set it replaces output_dir.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

struct ReturnEstimate {
  double mean = 0.0;
  double std = 0.0;  // sample std; 0 for a single episode
  int episodes = 0;
};

/// Undiscounted return of the environment's greedy heuristic, averaged over
/// `episodes` draws of the same episode stream training uses for `seed`.
ReturnEstimate estimate_greedy_return(TaskId task, std::size_t objects, int episodes,
                                      std::uint64_t seed);
ReturnEstimate run_greedy(Environment& env, int episodes);

/// Trailing moving average; entry e covers epochs e-window+1..e and is NaN
/// until the window is full.
std::vector<double> moving_average(const TrainingCurve& curve, int window);

/// First epoch whose full-window moving average reaches threshold * reference.
std::optional<int> epochs_to_threshold(const TrainingCurve& curve, double reference,
                                       double threshold, int window);

struct ReportRow {
  std::string task;
  std::size_t objects = 0;
  std::string representation;
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double final_mean_return = 0.0;  // moving average at the last epoch
  std::optional<int> epochs_to_threshold;
  double threshold = 0.8;
  double greedy_mean = 0.0;
  double greedy_std = 0.0;
  std::optional<int> diverged_at;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;

  void write_csv(std::ostream& out) const;
  void write_summary(std::ostream& out) const;
  /// Rows matching `representation` that reached the threshold.
  int reached(const std::string& representation) const;
};

struct ExperimentResult {
  std::vector<TrainingCurve> curves;  // parallel to config.seeds
  std::vector<std::filesystem::path> curve_files;
  std::filesystem::path plot_file;
  ReturnEstimate greedy;
  ComparisonReport report;
};

ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const std::filesystem::path& config_path);

/// Runs every config and merges their rows; writes comparison.csv and
/// comparison.txt into the first config's output directory.
ComparisonReport compare(const std::vector<ExperimentConfig>& configs);

}  // namespace perminv
