#include "perminv/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include "perminv/plot.hpp"

namespace perminv {

using nlohmann::json;

namespace {

// Greedy references use one fixed episode stream so every config of the same
// task and object count shares the same reference value.
constexpr std::uint64_t kReferenceSeed = 0;

void require_keys(const json& obj, const std::string& path, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown key");
    }
  }
}

template <typename T>
void read(const json& obj, const std::string& key, const std::string& path, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string where = path.empty() ? key : path + "." + key;
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer() || it->template get<long long>() < 0) {
        throw ConfigError(where + ": expected a non-negative integer");
      }
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer()) throw ConfigError(where + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(where + ": expected a number");
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <typename Parse>
void read_enum(const json& obj, const std::string& key, const std::string& where, Parse parse) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_string()) throw ConfigError(where + ": expected a string");
  try {
    parse(it->get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

TrainConfig parse_train(const json& t) {
  require_keys(t, "train",
               {"epochs", "steps_per_epoch", "minibatch", "update_passes", "clip", "gamma",
                "lambda", "entropy_coef", "value_coef", "learning_rate", "adam_beta1",
                "adam_beta2", "adam_epsilon", "hidden", "leak_slope", "log_std_init",
                "log_std_min", "log_std_max", "normalize_advantages", "scale_actions", "checkpoint_every",
                "checkpoint_dir"});
  TrainConfig c;
  read(t, "epochs", "train", c.epochs);
  read(t, "steps_per_epoch", "train", c.steps_per_epoch);
  read(t, "minibatch", "train", c.minibatch);
  read(t, "update_passes", "train", c.update_passes);
  read(t, "clip", "train", c.clip);
  read(t, "gamma", "train", c.gamma);
  read(t, "lambda", "train", c.lambda);
  read(t, "entropy_coef", "train", c.entropy_coef);
  read(t, "value_coef", "train", c.value_coef);
  read(t, "learning_rate", "train", c.learning_rate);
  read(t, "adam_beta1", "train", c.adam_beta1);
  read(t, "adam_beta2", "train", c.adam_beta2);
  read(t, "adam_epsilon", "train", c.adam_epsilon);
  read(t, "hidden", "train", c.hidden);
  read(t, "leak_slope", "train", c.leak_slope);
  read(t, "log_std_init", "train", c.log_std_init);
  read(t, "log_std_min", "train", c.log_std_min);
  read(t, "log_std_max", "train", c.log_std_max);
  read(t, "normalize_advantages", "train", c.normalize_advantages);
  read(t, "scale_actions", "train", c.scale_actions);
  read(t, "checkpoint_every", "train", c.checkpoint_every);
  if (auto it = t.find("checkpoint_dir"); it != t.end()) {
    if (!it->is_string()) throw ConfigError("train.checkpoint_dir: expected a string");
    c.checkpoint_dir = it->get<std::string>();
  }
  return c;
}

std::vector<ClassOverride> parse_encoder(const json& e) {
  require_keys(e, "encoder", {"classes"});
  std::vector<ClassOverride> out;
  const auto it = e.find("classes");
  if (it == e.end()) return out;
  if (!it->is_array()) throw ConfigError("encoder.classes: expected an array");
  for (std::size_t j = 0; j < it->size(); ++j) {
    const std::string path = fmt::format("encoder.classes[{}]", j);
    const json& c = (*it)[j];
    require_keys(c, path, {"abstract_dim", "filter_hidden", "abstraction_hidden"});
    ClassOverride o;
    if (c.contains("abstract_dim")) {
      std::size_t k = 0;
      read(c, "abstract_dim", path, k);
      o.abstract_dim = k;
    }
    read(c, "filter_hidden", path, o.filter_hidden);
    read(c, "abstraction_hidden", path, o.abstraction_hidden);
    out.push_back(std::move(o));
  }
  return out;
}

double finite_mean_of_tail(const TrainingCurve& curve, std::size_t end, std::size_t count) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = end - count; i < end; ++i) {
    const double v = curve.epochs[i].mean_return;
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  return n == 0 ? std::nan("") : sum / static_cast<double>(n);
}

std::string optional_int(const std::optional<int>& v, const char* missing) {
  return v ? std::to_string(*v) : std::string(missing);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (task != TaskId::convoy && objects < 1) throw ConfigError("objects: must be >= 1");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ConfigError("report.threshold: must lie in (0, 1]");
  }
  if (moving_average < 1) throw ConfigError("report.moving_average: must be >= 1");
  if (greedy_episodes < 1) throw ConfigError("report.greedy_episodes: must be >= 1");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (representation == Representation::encoder) {
    try {
      encoder_spec().validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("encoder: ") + e.what());
    }
  }
}

EncoderSpec ExperimentConfig::encoder_spec() const {
  const EnvDescriptor desc = make_environment(task, std::max<std::size_t>(objects, 1), 0)->describe();
  EncoderSpec spec = default_encoder_spec(desc);
  if (encoder_classes.empty()) return spec;
  if (encoder_classes.size() != spec.classes.size()) {
    throw ConfigError(fmt::format("encoder.classes: task {} has {} object classes, got {}",
                                  to_string(task), spec.classes.size(), encoder_classes.size()));
  }
  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    const auto& o = encoder_classes[j];
    if (o.abstract_dim) spec.classes[j].abstract_dim = *o.abstract_dim;
    spec.classes[j].filter_hidden = o.filter_hidden;
    spec.classes[j].abstraction_hidden = o.abstraction_hidden;
  }
  return spec;
}

std::string ExperimentConfig::label() const {
  return fmt::format("{}_m{}_{}", to_string(task), objects, to_string(representation));
}

ExperimentConfig parse_experiment_config(const json& doc) {
  require_keys(doc, "",
               {"task", "objects", "representation", "encoder", "train", "seeds", "output_dir",
                "report", "workers"});
  ExperimentConfig c;
  if (!doc.contains("task")) throw ConfigError("task: required");
  read_enum(doc, "task", "task", [&](const std::string& s) { c.task = task_from_string(s); });
  read(doc, "objects", "", c.objects);
  read_enum(doc, "representation", "representation",
            [&](const std::string& s) { c.representation = representation_from_string(s); });
  if (auto it = doc.find("encoder"); it != doc.end()) c.encoder_classes = parse_encoder(*it);
  if (auto it = doc.find("train"); it != doc.end()) c.train = parse_train(*it);
  read(doc, "seeds", "", c.seeds);
  if (auto it = doc.find("output_dir"); it != doc.end()) {
    if (!it->is_string()) throw ConfigError("output_dir: expected a string");
    c.output_dir = it->get<std::string>();
  }
  if (auto it = doc.find("report"); it != doc.end()) {
    require_keys(*it, "report",
                 {"threshold", "moving_average", "greedy_episodes", "stop_on_threshold"});
    read(*it, "threshold", "report", c.threshold);
    read(*it, "moving_average", "report", c.moving_average);
    read(*it, "greedy_episodes", "report", c.greedy_episodes);
    read(*it, "stop_on_threshold", "report", c.stop_on_threshold);
  }
  read(doc, "workers", "", c.workers);
  if (const char* dir = std::getenv("PERMINV_OUTPUT_DIR"); dir && *dir) c.output_dir = dir;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(doc);
}

json to_json(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  json train = {{"epochs", t.epochs},
                {"steps_per_epoch", t.steps_per_epoch},
                {"minibatch", t.minibatch},
                {"update_passes", t.update_passes},
                {"clip", t.clip},
                {"gamma", t.gamma},
                {"lambda", t.lambda},
                {"entropy_coef", t.entropy_coef},
                {"value_coef", t.value_coef},
                {"learning_rate", t.learning_rate},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_epsilon", t.adam_epsilon},
                {"hidden", t.hidden},
                {"leak_slope", t.leak_slope},
                {"log_std_init", t.log_std_init},
                {"log_std_min", t.log_std_min},
                {"log_std_max", t.log_std_max},
                {"normalize_advantages", t.normalize_advantages},
                {"scale_actions", t.scale_actions},
                {"checkpoint_every", t.checkpoint_every},
                {"checkpoint_dir", t.checkpoint_dir.string()}};
  json classes = json::array();
  for (const auto& o : c.encoder_classes) {
    json k = {{"filter_hidden", o.filter_hidden}, {"abstraction_hidden", o.abstraction_hidden}};
    if (o.abstract_dim) k["abstract_dim"] = *o.abstract_dim;
    classes.push_back(std::move(k));
  }
  return {{"task", to_string(c.task)},
          {"objects", c.objects},
          {"representation", to_string(c.representation)},
          {"encoder", {{"classes", classes}}},
          {"train", train},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir.string()},
          {"report",
           {{"threshold", c.threshold},
            {"moving_average", c.moving_average},
            {"greedy_episodes", c.greedy_episodes},
            {"stop_on_threshold", c.stop_on_threshold}}},
          {"workers", c.workers}};
}

ReturnEstimate run_greedy(Environment& env, int episodes) {
  if (episodes < 1) throw std::invalid_argument("greedy: episodes must be >= 1");
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    env.reset();
    double total = 0.0;
    for (;;) {
      const auto action = env.greedy_action();
      const Transition tr = env.step(action);
      total += tr.reward;
      if (tr.done) break;
    }
    returns.push_back(total);
  }
  ReturnEstimate est;
  est.episodes = episodes;
  est.mean = std::accumulate(returns.begin(), returns.end(), 0.0) / episodes;
  if (episodes > 1) {
    double ss = 0.0;
    for (double r : returns) ss += (r - est.mean) * (r - est.mean);
    est.std = std::sqrt(ss / (episodes - 1));
  }
  return est;
}

ReturnEstimate estimate_greedy_return(TaskId task, std::size_t objects, int episodes,
                                      std::uint64_t seed) {
  auto env = make_environment(task, objects, derive_seed(seed, "env"));
  return run_greedy(*env, episodes);
}

std::vector<double> moving_average(const TrainingCurve& curve, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  const auto w = static_cast<std::size_t>(window);
  std::vector<double> out(curve.epochs.size(), std::nan(""));
  for (std::size_t e = 0; e < curve.epochs.size(); ++e) {
    if (e + 1 >= w) out[e] = finite_mean_of_tail(curve, e + 1, w);
  }
  return out;
}

std::optional<int> epochs_to_threshold(const TrainingCurve& curve, double reference,
                                       double threshold, int window) {
  const auto avg = moving_average(curve, window);
  const double target = threshold * reference;
  for (std::size_t e = 0; e < avg.size(); ++e) {
    if (std::isfinite(avg[e]) && avg[e] >= target) return curve.epochs[e].epoch;
  }
  return std::nullopt;
}

void ComparisonReport::write_csv(std::ostream& out) const {
  out << "task,objects,representation,seed,epochs_run,final_mean_return,epochs_to_threshold,"
         "threshold,greedy_mean,greedy_std,diverged_at\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{:.17g},{},{:.17g},{:.17g},{:.17g},{}\n", r.task, r.objects,
                       r.representation, r.seed, r.epochs_run, r.final_mean_return,
                       optional_int(r.epochs_to_threshold, "not reached"), r.threshold,
                       r.greedy_mean, r.greedy_std, optional_int(r.diverged_at, ""));
  }
}

void ComparisonReport::write_summary(std::ostream& out) const {
  std::vector<std::string> groups;
  for (const auto& r : rows) {
    const std::string key = fmt::format("{} m={} {}", r.task, r.objects, r.representation);
    if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
  }
  for (const auto& key : groups) {
    std::vector<const ReportRow*> members;
    for (const auto& r : rows) {
      if (fmt::format("{} m={} {}", r.task, r.objects, r.representation) == key) {
        members.push_back(&r);
      }
    }
    const ReportRow& first = *members.front();
    int reached = 0;
    double final_sum = 0.0;
    for (const auto* r : members) {
      if (r->epochs_to_threshold) ++reached;
      final_sum += r->final_mean_return;
    }
    out << fmt::format("{}: greedy reference {:.4f} +/- {:.4f}, threshold {:.2f} x greedy\n", key,
                       first.greedy_mean, first.greedy_std, first.threshold);
    out << fmt::format("  reached threshold: {}/{} seeds, mean final return {:.4f}\n", reached,
                       members.size(), final_sum / static_cast<double>(members.size()));
    for (const auto* r : members) {
      out << fmt::format("  seed {}: final {:.4f}, epochs to threshold {}{}\n", r->seed,
                         r->final_mean_return, optional_int(r->epochs_to_threshold, "not reached"),
                         r->diverged_at ? fmt::format(", diverged at epoch {}", *r->diverged_at)
                                        : std::string());
    }
  }
}

int ComparisonReport::reached(const std::string& representation) const {
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [&](const ReportRow& r) {
    return r.representation == representation && r.epochs_to_threshold.has_value();
  }));
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  const std::string label = config.label();

  ExperimentResult result;
  result.greedy =
      estimate_greedy_return(config.task, config.objects, config.greedy_episodes, kReferenceSeed);
  const double reference = result.greedy.mean;

  const EncoderSpec spec =
      config.representation == Representation::encoder ? config.encoder_spec() : EncoderSpec{};
  const EnvFactory factory = [&config](std::uint64_t seed) {
    return make_environment(config.task, config.objects, seed);
  };

  const std::size_t runs = config.seeds.size();
  result.curves.resize(runs);
  std::vector<std::exception_ptr> errors(runs);
  auto run_one = [&](std::size_t i) {
    try {
      TrainConfig tc = config.train;
      tc.seed = config.seeds[i];
      if (!tc.checkpoint_dir.empty()) {
        tc.checkpoint_dir /= fmt::format("{}_seed{}", label, tc.seed);
      }
      TrainHooks hooks;
      if (config.stop_on_threshold) {
        hooks.stop = [&](const TrainingCurve& curve) {
          return epochs_to_threshold(curve, reference, config.threshold, config.moving_average)
              .has_value();
        };
      }
      result.curves[i] = train(factory, config.representation, tc, spec, hooks);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), runs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < runs; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < runs; i = next++) run_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t i = 0; i < runs; ++i) {
    const TrainingCurve& curve = result.curves[i];
    const auto path = config.output_dir / fmt::format("{}_seed{}.csv", label, config.seeds[i]);
    curve.write_csv(path);
    result.curve_files.push_back(path);

    ReportRow row;
    row.task = to_string(config.task);
    row.objects = config.objects;
    row.representation = to_string(config.representation);
    row.seed = config.seeds[i];
    row.epochs_run = static_cast<int>(curve.epochs.size());
    const std::size_t n = curve.epochs.size();
    row.final_mean_return =
        n == 0 ? std::nan("")
               : finite_mean_of_tail(curve, n,
                                     std::min(n, static_cast<std::size_t>(config.moving_average)));
    row.epochs_to_threshold =
        epochs_to_threshold(curve, reference, config.threshold, config.moving_average);
    row.threshold = config.threshold;
    row.greedy_mean = result.greedy.mean;
    row.greedy_std = result.greedy.std;
    row.diverged_at = curve.diverged_at;
    result.report.rows.push_back(row);
  }

  std::vector<PlotSeries> series;
  for (std::size_t i = 0; i < runs; ++i) {
    series.push_back({fmt::format("seed {}", config.seeds[i]), result.curves[i]});
  }
  result.plot_file = config.output_dir / (label + ".svg");
  {
    std::ofstream svg(result.plot_file, std::ios::binary);
    svg << render_plot(series, reference, config.moving_average);
  }
  {
    std::ofstream csv(config.output_dir / (label + "_report.csv"), std::ios::binary);
    result.report.write_csv(csv);
    std::ofstream txt(config.output_dir / (label + "_summary.txt"), std::ios::binary);
    result.report.write_summary(txt);
  }
  return result;
}

ExperimentResult run_experiment(const std::filesystem::path& config_path) {
  return run_experiment(load_experiment_config(config_path));
}

ComparisonReport compare(const std::vector<ExperimentConfig>& configs) {
  if (configs.empty()) throw ConfigError("compare: at least one config is required");
  ComparisonReport merged;
  for (const auto& c : configs) {
    const auto r = run_experiment(c);
    merged.rows.insert(merged.rows.end(), r.report.rows.begin(), r.report.rows.end());
  }
  const auto& dir = configs.front().output_dir;
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "comparison.csv", std::ios::binary);
  merged.write_csv(csv);
  std::ofstream txt(dir / "comparison.txt", std::ios::binary);
  merged.write_summary(txt);
  return merged;
}

}  // namespace perminv
