#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perminv/adam.hpp"
#include "perminv/environment.hpp"
#include "perminv/param_io.hpp"
#include "perminv/policy.hpp"
#include "perminv/set_encoder.hpp"
#include "perminv/tape.hpp"

namespace perminv {

enum class Representation { baseline, encoder };

Representation representation_from_string(const std::string& name);
std::string to_string(Representation rep);

struct TrainConfig {
  int epochs = 1000;
  int steps_per_epoch = 1000;
  int minibatch = 256;
  int update_passes = 4;
  double clip = 0.1;
  double gamma = 0.99;
  double lambda = 0.9;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double learning_rate = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::vector<std::size_t> hidden{64, 64, 64, 64};
  double leak_slope = 0.01;
  double log_std_init = -0.5;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  bool normalize_advantages = true;
  /// When set, policy samples are multiplied by the environment's
  /// action_scale; otherwise they reach the environment as drawn and are
  /// clipped there.
  bool scale_actions = false;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// What the representation step consumes for one state.
struct Observation {
  ObjectSet objects;         // encoder representation
  std::vector<double> flat;  // baseline representation
};

Observation observe(const Environment& env, Representation rep);

/// Encoder default for a task: one class spec per object class with
/// k = ceil(average count * input dim).
EncoderSpec default_encoder_spec(const EnvDescriptor& env);

/// Policy, critic and (for the encoder representation) the set encoder that
/// feeds both of them.
class Agent {
 public:
  Agent(Representation rep, const EnvDescriptor& env, const EncoderSpec& encoder_spec,
        const TrainConfig& config);

  Representation representation() const { return rep_; }
  std::size_t representation_dim() const { return policy_.spec().input_dim; }
  GaussianPolicy& policy() { return policy_; }
  const GaussianPolicy& policy() const { return policy_; }
  SetEncoder& encoder() { return encoder_; }
  const SetEncoder& encoder() const { return encoder_; }

  std::vector<double> represent(const Observation& obs) const;
  Var represent_batch(Tape& tape, std::span<const Observation* const> batch) const;

  /// Clipped-surrogate plus value loss over a minibatch, recorded on `tape`.
  Var loss(Tape& tape, std::span<const Observation* const> batch, PpoBatch constants,
           PpoTerms* terms = nullptr) const;

  std::vector<Mat*> parameters();
  ParamBundle to_bundle() const;

 private:
  Representation rep_;
  SetEncoder encoder_;
  GaussianPolicy policy_;
};

/// Transitions of one epoch.
struct Rollout {
  std::vector<Observation> observations;
  Mat actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;  // timeouts carry gamma * V(next) folded in
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  double bootstrap = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double mean_return = 0.0;
  double mean_episode_len = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingCurve {
  std::vector<EpochRecord> epochs;
  std::optional<int> diverged_at;
  std::string divergence;

  /// Header row, then epoch,mean_return,mean_episode_len,policy_loss,value_loss,seed.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  /// Throws std::runtime_error naming the line of the first malformed row.
  static TrainingCurve read_csv(std::istream& in);
  static TrainingCurve read_csv(const std::filesystem::path& path);
};

using EnvFactory = std::function<std::unique_ptr<Environment>(std::uint64_t seed)>;

struct TrainHooks {
  /// Called after each epoch; returning true ends training early.
  std::function<bool(const TrainingCurve&)> stop;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called once with the final agent unless training diverged.
  std::function<void(const Agent&)> finished;
};

/// PPO with GAE-lambda. The environment stream is seeded from the "env" role
/// of `config.seed`, so both representations see the same episode draws.
/// An empty `encoder_spec` selects default_encoder_spec.
TrainingCurve train(const EnvFactory& make_env, Representation rep, const TrainConfig& config,
                    const EncoderSpec& encoder_spec = {}, const TrainHooks& hooks = {});

}  // namespace perminv
