#include "perminv/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "perminv/gae.hpp"

namespace perminv {

namespace {

constexpr const char* kCurveHeader =
    "epoch,mean_return,mean_episode_len,policy_loss,value_loss,seed";

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool all_finite(const std::vector<Mat*>& params) {
  return std::all_of(params.begin(), params.end(), [](const Mat* p) { return p->all_finite(); });
}

}  // namespace

Representation representation_from_string(const std::string& name) {
  if (name == "baseline") return Representation::baseline;
  if (name == "encoder") return Representation::encoder;
  throw std::invalid_argument("unknown representation '" + name + "'");
}

std::string to_string(Representation rep) {
  return rep == Representation::baseline ? "baseline" : "encoder";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train." + field + ": " + why);
  };
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (steps_per_epoch < 1) fail("steps_per_epoch", "must be >= 1");
  if (minibatch < 1) fail("minibatch", "must be >= 1");
  if (update_passes < 1) fail("update_passes", "must be >= 1");
  if (!(clip > 0.0)) fail("clip", "must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma", "must lie in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda", "must lie in [0, 1]");
  if (!(entropy_coef >= 0.0)) fail("entropy_coef", "must be >= 0");
  if (!(value_coef >= 0.0)) fail("value_coef", "must be >= 0");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be > 0");
  if (hidden.empty()) fail("hidden", "need at least one hidden layer");
  for (std::size_t h : hidden) {
    if (h == 0) fail("hidden", "widths must be >= 1");
  }
  if (!(leak_slope > 0.0 && leak_slope < 1.0)) fail("leak_slope", "must lie in (0, 1)");
  if (!(log_std_min < log_std_max)) fail("log_std_min", "must be below log_std_max");
  if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
}

Observation observe(const Environment& env, Representation rep) {
  Observation obs;
  if (rep == Representation::encoder) {
    obs.objects = env.object_set();
  } else {
    obs.flat = env.flat_baseline();
  }
  return obs;
}

EncoderSpec default_encoder_spec(const EnvDescriptor& env) {
  EncoderSpec spec;
  for (std::size_t j = 0; j < env.class_dims.size(); ++j) {
    ClassSpec c;
    c.input_dim = env.class_dims[j];
    c.abstract_dim = EncoderSpec::default_abstract_dim(env.average_counts.at(j), c.input_dim);
    spec.classes.push_back(c);
  }
  spec.ego_dim = env.ego_dim;
  return spec;
}

Agent::Agent(Representation rep, const EnvDescriptor& env, const EncoderSpec& encoder_spec,
             const TrainConfig& config)
    : rep_(rep) {
  PolicySpec ps;
  ps.action_dim = env.action_dim;
  ps.hidden = config.hidden;
  ps.slope = config.leak_slope;
  ps.log_std_init = config.log_std_init;
  ps.log_std_min = config.log_std_min;
  ps.log_std_max = config.log_std_max;
  if (rep == Representation::encoder) {
    EncoderSpec spec = encoder_spec.classes.empty() ? default_encoder_spec(env) : encoder_spec;
    spec.ego_dim = env.ego_dim;
    if (spec.classes.size() != env.class_dims.size()) {
      throw std::invalid_argument("encoder: spec has " + std::to_string(spec.classes.size()) +
                                  " classes, task has " +
                                  std::to_string(env.class_dims.size()));
    }
    for (std::size_t j = 0; j < spec.classes.size(); ++j) {
      if (spec.classes[j].input_dim != env.class_dims[j]) {
        throw std::invalid_argument("encoder.classes[" + std::to_string(j) +
                                    "].input_dim does not match the task");
      }
    }
    encoder_ = SetEncoder(spec, derive_seed(config.seed, "encoder-init"));
    ps.input_dim = encoder_.output_dim();
  } else {
    ps.input_dim = env.baseline_dim;
  }
  policy_ = GaussianPolicy(ps, derive_seed(config.seed, "policy-init"));
}

std::vector<double> Agent::represent(const Observation& obs) const {
  if (rep_ == Representation::encoder) return encode_state(encoder_, obs.objects);
  return obs.flat;
}

Var Agent::represent_batch(Tape& tape, std::span<const Observation* const> batch) const {
  if (rep_ == Representation::encoder) {
    std::vector<const ObjectSet*> sets;
    sets.reserve(batch.size());
    for (const Observation* o : batch) sets.push_back(&o->objects);
    return encode_batch(encoder_, tape, sets);
  }
  const std::size_t dim = representation_dim();
  Mat x(batch.size(), dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b]->flat.size() != dim) throw ShapeError("baseline: observation width mismatch");
    std::copy(batch[b]->flat.begin(), batch[b]->flat.end(), x.row_span(b).begin());
  }
  return tape.constant(std::move(x));
}

Var Agent::loss(Tape& tape, std::span<const Observation* const> batch, PpoBatch constants,
                PpoTerms* terms) const {
  const Var rep = represent_batch(tape, batch);
  const Var mean = policy_.actor().forward(tape, rep);
  const Var value = policy_.critic().forward(tape, rep);
  const Var log_std = tape.parameter(policy_.log_std());
  constants.log_std_min = policy_.spec().log_std_min;
  constants.log_std_max = policy_.spec().log_std_max;
  return tape.ppo_loss(mean, log_std, value, std::move(constants), terms);
}

std::vector<Mat*> Agent::parameters() {
  auto out = policy_.parameters();
  if (rep_ == Representation::encoder) {
    auto e = encoder_.parameters();
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

ParamBundle Agent::to_bundle() const {
  ParamBundle b;
  b.sections.push_back({"actor", policy_.actor()});
  b.sections.push_back({"log_std", policy_.log_std()});
  b.sections.push_back({"critic", policy_.critic()});
  if (rep_ == Representation::encoder) {
    for (std::size_t j = 0; j < encoder_.class_count(); ++j) {
      const auto& c = encoder_.class_encoder(j);
      b.sections.push_back({fmt::format("encoder.class{}.filter", j), c.filter});
      b.sections.push_back({fmt::format("encoder.class{}.abstraction", j), c.abstraction});
    }
  }
  return b;
}

void TrainingCurve::write_csv(std::ostream& out) const {
  out << kCurveHeader << '\n';
  for (const auto& r : epochs) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.epoch, r.mean_return,
                       r.mean_episode_len, r.policy_loss, r.value_loss, r.seed);
  }
}

void TrainingCurve::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(out);
}

TrainingCurve TrainingCurve::read_csv(std::istream& in) {
  TrainingCurve curve;
  std::string line;
  long line_no = 1;
  if (!std::getline(in, line) || line != kCurveHeader) {
    throw std::runtime_error("curve CSV line 1: expected header '" + std::string(kCurveHeader) +
                             "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    auto bad = [&](const std::string& why) {
      return std::runtime_error(fmt::format("curve CSV line {}: {}", line_no, why));
    };
    if (fields.size() != 6) throw bad("expected 6 fields, got " + std::to_string(fields.size()));
    EpochRecord r;
    try {
      std::size_t used = 0;
      auto num = [&](const std::string& s) {
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      };
      auto integer = [&](const std::string& s) {
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      };
      r.epoch = static_cast<int>(integer(fields[0]));
      r.mean_return = num(fields[1]);
      r.mean_episode_len = num(fields[2]);
      r.policy_loss = num(fields[3]);
      r.value_loss = num(fields[4]);
      r.seed = integer(fields[5]);
    } catch (const std::logic_error&) {
      throw bad("malformed number");
    }
    curve.epochs.push_back(r);
  }
  return curve;
}

TrainingCurve TrainingCurve::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_csv(in);
}

TrainingCurve train(const EnvFactory& make_env, Representation rep, const TrainConfig& config,
                    const EncoderSpec& encoder_spec, const TrainHooks& hooks) {
  config.validate();
  TrainingCurve curve;
  if (config.epochs == 0) return curve;

  auto env = make_env(derive_seed(config.seed, "env"));
  const EnvDescriptor desc = env->describe();
  Agent agent(rep, desc, encoder_spec, config);
  std::vector<Mat*> params = agent.parameters();
  Adam adam(params, {config.learning_rate, config.adam_beta1, config.adam_beta2,
                     config.adam_epsilon});
  Rng sample_rng = make_rng(config.seed, "sampling");
  Rng shuffle_rng = make_rng(config.seed, "shuffle");

  const auto steps = static_cast<std::size_t>(config.steps_per_epoch);
  const std::size_t action_dim = desc.action_dim;
  const double action_scale = config.scale_actions ? desc.action_scale : 1.0;
  Observation obs = observe(*env, rep);
  double episode_return = 0.0;
  long episode_len = 0;
  std::vector<double> scaled(action_dim);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rollout ro;
    ro.observations.reserve(steps);
    ro.actions = Mat(steps, action_dim);
    std::vector<double> finished_returns, finished_lens;

    for (std::size_t t = 0; t < steps; ++t) {
      const auto rep_vec = agent.represent(obs);
      const auto dist = agent.policy().forward(rep_vec);
      const double value = agent.policy().value(rep_vec);
      const auto sample = sample_action(dist.mean, dist.std, sample_rng);
      for (std::size_t d = 0; d < action_dim; ++d) scaled[d] = action_scale * sample.action[d];
      const Transition tr = env->step(scaled);
      episode_return += tr.reward;
      ++episode_len;

      Observation next = observe(*env, rep);
      double reward = tr.reward;
      if (tr.done && tr.info.timeout) {
        // Truncation, not a true terminal: fold in the bootstrap value.
        reward += config.gamma * agent.policy().value(agent.represent(next));
      }
      std::copy(sample.action.begin(), sample.action.end(), ro.actions.row_span(t).begin());
      ro.observations.push_back(std::move(obs));
      ro.log_probs.push_back(sample.log_prob);
      ro.rewards.push_back(reward);
      ro.values.push_back(value);
      ro.dones.push_back(tr.done ? 1 : 0);

      if (tr.done) {
        finished_returns.push_back(episode_return);
        finished_lens.push_back(static_cast<double>(episode_len));
        episode_return = 0.0;
        episode_len = 0;
        env->reset();
        next = observe(*env, rep);
      }
      obs = std::move(next);
    }
    ro.bootstrap = agent.policy().value(agent.represent(obs));
    auto gae = compute_gae(ro.rewards, ro.values, ro.dones, ro.bootstrap, config.gamma,
                           config.lambda);
    if (config.normalize_advantages) normalize_advantages(gae.advantages);

    std::vector<std::size_t> order(steps);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> policy_losses, value_losses;
    bool diverged = false;
    try {
      for (int pass = 0; pass < config.update_passes && !diverged; ++pass) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t lo = 0; lo < steps; lo += static_cast<std::size_t>(config.minibatch)) {
          const std::size_t hi = std::min(steps, lo + static_cast<std::size_t>(config.minibatch));
          std::vector<const Observation*> batch;
          PpoBatch constants;
          constants.actions = Mat(hi - lo, action_dim);
          constants.clip = config.clip;
          constants.value_coef = config.value_coef;
          constants.entropy_coef = config.entropy_coef;
          for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t k = order[i];
            batch.push_back(&ro.observations[k]);
            auto src = ro.actions.row_span(k);
            std::copy(src.begin(), src.end(), constants.actions.row_span(i - lo).begin());
            constants.old_log_probs.push_back(ro.log_probs[k]);
            constants.advantages.push_back(gae.advantages[k]);
            constants.returns.push_back(gae.returns[k]);
          }
          Tape tape;
          PpoTerms terms;
          const Var loss = agent.loss(tape, batch, std::move(constants), &terms);
          if (!std::isfinite(tape.value(loss)(0, 0))) {
            diverged = true;
            curve.divergence = "non-finite loss";
            break;
          }
          adam.step(tape.backward(loss));
          agent.policy().clamp_log_std();
          policy_losses.push_back(terms.policy_loss);
          value_losses.push_back(terms.value_loss);
        }
      }
      if (!diverged && !all_finite(params)) {
        diverged = true;
        curve.divergence = "non-finite parameters";
      }
    } catch (const std::runtime_error& e) {
      diverged = true;
      curve.divergence = e.what();
    }
    if (diverged) {
      curve.diverged_at = epoch;
      return curve;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_return = mean_of(finished_returns);
    rec.mean_episode_len = mean_of(finished_lens);
    rec.policy_loss = mean_of(policy_losses);
    rec.value_loss = mean_of(value_losses);
    rec.seed = config.seed;
    curve.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 &&
        !config.checkpoint_dir.empty()) {
      std::filesystem::create_directories(config.checkpoint_dir);
      save_params(agent.to_bundle(),
                  config.checkpoint_dir / fmt::format("checkpoint_{:05d}.bin", epoch));
    }
    if (hooks.stop && hooks.stop(curve)) break;
  }
  if (hooks.finished) hooks.finished(agent);
  return curve;
}

}  // namespace perminv
