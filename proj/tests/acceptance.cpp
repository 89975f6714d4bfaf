// Acceptance suite: one PASS/FAIL line per criterion. Criteria 6-8 train
// full-length PPO runs and take tens of minutes on one core.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "perminv/combinatorics.hpp"
#include "perminv/convoy.hpp"
#include "perminv/experiment.hpp"
#include "perminv/gae.hpp"
#include "perminv/scavenger.hpp"
#include "support.hpp"

using namespace perminv;
using namespace perminv::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

EncoderSpec random_spec(Rng& rng) {
  std::uniform_int_distribution<std::size_t> classes(1, 3), dim(1, 4), hidden(2, 8), ego(0, 3);
  EncoderSpec spec;
  const std::size_t c = classes(rng);
  for (std::size_t j = 0; j < c; ++j) {
    ClassSpec cs;
    cs.input_dim = dim(rng);
    cs.abstract_dim = dim(rng);
    cs.filter_hidden = {hidden(rng)};
    cs.abstraction_hidden = {hidden(rng)};
    spec.classes.push_back(cs);
  }
  spec.ego_dim = ego(rng);
  return spec;
}

Outcome permutation_invariance() {
  const auto start = Clock::now();
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> other(0, 20);
  double worst = 0.0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    const EncoderSpec spec = random_spec(rng);
    SetEncoder enc(spec, rng());
    jitter(enc.parameters(), rng, 0.5);
    std::vector<std::size_t> counts(spec.classes.size());
    for (auto& c : counts) c = other(rng);
    counts[trial % counts.size()] = 1 + static_cast<std::size_t>(trial % 20);
    const ObjectSet s = random_object_set(spec, counts, rng);
    ObjectSet permuted = s;
    for (auto& cls : permuted.classes) cls = permute_rows(cls, random_permutation(cls.rows(), rng));
    worst = std::max(worst, max_abs_diff(encode_state(enc, s), encode_state(enc, permuted)));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-9 && secs < 10.0,
          fmt::format("{} triples, m in 1..20, max diff {:.3g}, {:.2f} s", trials, worst, secs)};
}

Outcome factorization_oracle() {
  const auto start = Clock::now();
  Rng rng(12);
  std::uniform_int_distribution<std::size_t> count(1, 20), dim(1, 4), hidden(2, 8);
  double worst = 0.0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    ClassSpec cs;
    cs.input_dim = dim(rng);
    cs.abstract_dim = dim(rng);
    cs.filter_hidden = {hidden(rng)};
    cs.abstraction_hidden = {hidden(rng)};
    ClassEncoder enc(cs, rng());
    jitter(enc.parameters(), rng, 0.5);
    // Wide inputs push filter scores apart to exercise the max shift.
    const Mat objects = random_mat(count(rng), cs.input_dim, rng, trial % 2 ? 1.0 : 10.0);
    worst = std::max(worst, max_abs_diff(encode_phi_rho(enc, objects), encode_class(enc, objects)));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-9 && secs < 10.0,
          fmt::format("{} inputs, max diff {:.3g}, {:.2f} s", trials, worst, secs)};
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  Rng rng(13);
  TrainConfig cfg;
  cfg.hidden = {6, 5};
  double worst = 0.0;
  std::size_t max_params = 0;
  const int instances = 60;
  for (int inst = 0; inst < instances; ++inst) {
    const std::size_t m = 1 + static_cast<std::size_t>(inst % 3);
    ScavengerEnv env(2, m, rng());
    EncoderSpec spec = default_encoder_spec(env.describe());
    for (auto& c : spec.classes) c.filter_hidden = c.abstraction_hidden = {4};
    Agent agent(Representation::encoder, env.describe(), spec, cfg);
    // Random biases keep pre-activations off the ReLU kinks.
    jitter(agent.parameters(), rng, 0.2);
    std::size_t count = 0;
    for (const Mat* p : agent.parameters()) count += p->size();
    max_params = std::max(max_params, count);

    std::vector<Observation> obs;
    std::uniform_real_distribution<double> step(-0.05, 0.05);
    env.reset();
    while (obs.size() < 6) {
      obs.push_back(observe(env, Representation::encoder));
      const std::vector<double> a{step(rng), step(rng)};
      if (env.step(a).done) env.reset();
    }
    std::vector<const Observation*> ptrs;
    for (const auto& o : obs) ptrs.push_back(&o);

    PpoBatch constants;
    constants.actions = random_mat(obs.size(), 2, rng);
    std::uniform_real_distribution<double> shift(-0.2, 0.2);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto out = agent.policy().forward(agent.represent(obs[i]));
      // Offsets straddle the clip band so both branches carry gradient.
      constants.old_log_probs.push_back(
          gaussian_log_prob(constants.actions.row_span(i), out.mean, out.std) + shift(rng));
    }
    constants.advantages = random_vec(obs.size(), rng);
    constants.returns = random_vec(obs.size(), rng);

    auto loss = [&] {
      Tape t;
      return t.value(agent.loss(t, ptrs, constants))(0, 0);
    };
    Tape t;
    const Gradients g = t.backward(agent.loss(t, ptrs, constants));
    worst = std::max(worst, max_gradient_error(agent.parameters(), loss, g));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && max_params <= 500 && secs < 60.0,
          fmt::format("{} instances, <= {} parameters, max relative error {:.3g}, {:.2f} s",
                      instances, max_params, worst, secs)};
}

// Direct sum over the episode segment: A_t = sum_l (gamma lambda)^l delta_{t+l}.
std::vector<double> gae_direct(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<std::uint8_t>& done, double bootstrap,
                               double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t l = t; l < n; ++l) {
      const double next = l + 1 < n ? v[l + 1] : bootstrap;
      const double delta = r[l] + (done[l] ? 0.0 : gamma * next) - v[l];
      adv[t] += weight * delta;
      if (done[l]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

Outcome gae_oracle() {
  Rng rng(14);
  std::uniform_int_distribution<std::size_t> len(1, 100);
  std::bernoulli_distribution terminal(0.15);
  const std::array<double, 3> lambdas{0.0, 1.0, 0.9};
  double worst = 0.0;
  const int sequences = 300;
  for (int i = 0; i < sequences; ++i) {
    const std::size_t n = len(rng);
    const auto r = random_vec(n, rng), v = random_vec(n, rng);
    std::vector<std::uint8_t> done(n);
    for (auto& d : done) d = terminal(rng);
    const double bootstrap = random_vec(1, rng)[0];
    const double lambda = lambdas[i % 3];
    const auto got = compute_gae(r, v, done, bootstrap, 0.99, lambda);
    worst = std::max(worst, max_abs_diff(got.advantages, gae_direct(r, v, done, bootstrap, 0.99,
                                                                    lambda)));
  }
  return {worst <= 1e-10, fmt::format("{} sequences, lambda in {{0, 1, 0.9}}, max diff {:.3g}",
                                      sequences, worst)};
}

Outcome combinatorics() {
  bool ok = true;
  int cases = 0;
  for (unsigned n = 1; n <= 8; ++n) {
    for (unsigned m = 1; m <= n; ++m) {
      // Enumerate injective maps {0..m-1} -> {0..n-1} and their images.
      std::set<std::vector<unsigned>> ordered, unordered;
      std::vector<unsigned> symbols(n);
      std::iota(symbols.begin(), symbols.end(), 0u);
      do {
        std::vector<unsigned> prefix(symbols.begin(), symbols.begin() + m);
        ordered.insert(prefix);
        std::sort(prefix.begin(), prefix.end());
        unordered.insert(prefix);
      } while (std::next_permutation(symbols.begin(), symbols.end()));
      const auto s = state_space_sizes(n, m);
      ok = ok && s.ordered == ordered.size() && s.unordered == unordered.size();
      ++cases;
    }
  }
  for (unsigned n = 1; n <= 20; ++n) {
    BigInt m_factorial = 1;
    for (unsigned m = 1; m <= n; ++m) {
      m_factorial *= m;
      const auto s = state_space_sizes(n, m);
      ok = ok && s.ratio_numerator == 1 && s.ratio_denominator == m_factorial &&
           s.ordered == s.unordered * m_factorial;
    }
  }
  return {ok, fmt::format("{} enumerated (n, m) pairs for n <= 8, ratio 1/m! for n <= 20", cases)};
}

ExperimentConfig scavenger_config(const fs::path& out, std::size_t m, Representation rep) {
  ExperimentConfig c;
  c.task = TaskId::scavenger1;
  c.objects = m;
  c.representation = rep;
  c.output_dir = out;
  c.stop_on_threshold = true;
  return c;
}

Outcome scaling_claim(const fs::path& out) {
  const auto start = Clock::now();
  std::map<std::string, int> reached;
  for (std::size_t m : {2u, 3u}) {
    for (auto rep : {Representation::baseline, Representation::encoder}) {
      const auto cfg = scavenger_config(out / "criterion6", m, rep);
      const auto result = run_experiment(cfg);
      reached[cfg.label()] = result.report.reached(to_string(rep));
      fmt::print("  {}: {}/5 seeds reached 0.8 x greedy {:.4f}\n", cfg.label(),
                 reached[cfg.label()], result.greedy.mean);
      std::fflush(stdout);
    }
  }
  const int m2b = reached["scavenger1_m2_baseline"], m2e = reached["scavenger1_m2_encoder"];
  const int m3b = reached["scavenger1_m3_baseline"], m3e = reached["scavenger1_m3_encoder"];
  const bool ok = m2b >= 3 && m2e >= 3 && m3e >= 3 && m3b <= 1;
  return {ok, fmt::format("m=2 baseline {}/5, m=2 encoder {}/5, m=3 encoder {}/5, m=3 baseline "
                          "{}/5, {:.0f} s",
                          m2b, m2e, m3e, m3b, seconds_since(start))};
}

Outcome multi_class(const fs::path& out) {
  const auto start = Clock::now();
  const double threshold = 0.6;
  const int window = 50;
  const ReturnEstimate greedy = estimate_greedy_return(TaskId::scavenger2, 2, 1000, 0);
  int reached = 0;
  double worst = 0.0;
  std::size_t probes = 0;
  fs::create_directories(out / "criterion7");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    TrainHooks hooks;
    hooks.stop = [&](const TrainingCurve& c) {
      return epochs_to_threshold(c, greedy.mean, threshold, window).has_value();
    };
    hooks.finished = [&](const Agent& agent) {
      ScavengerEnv env(2, 2, derive_seed(seed, "probe"));
      Rng rng(derive_seed(seed, "permute"));
      env.reset();
      for (int i = 0; i < 200; ++i) {
        const Observation obs = observe(env, Representation::encoder);
        Observation permuted = obs;
        for (auto& cls : permuted.objects.classes) {
          cls = permute_rows(cls, random_permutation(cls.rows(), rng));
        }
        worst = std::max(worst, max_abs_diff(agent.policy().forward(agent.represent(obs)).mean,
                                             agent.policy().forward(agent.represent(permuted)).mean));
        ++probes;
        if (env.step(env.greedy_action()).done) env.reset();
      }
    };
    const auto curve = train([](std::uint64_t s) { return std::make_unique<ScavengerEnv>(2, 2, s); },
                             Representation::encoder, cfg, {}, hooks);
    curve.write_csv(out / "criterion7" / fmt::format("scavenger2_m2_encoder_seed{}.csv", seed));
    const auto hit = epochs_to_threshold(curve, greedy.mean, threshold, window);
    if (hit) ++reached;
    fmt::print("  seed {}: {}\n", seed, hit ? fmt::format("reached at epoch {}", *hit)
                                            : std::string("not reached"));
    std::fflush(stdout);
  }
  return {reached >= 3 && worst <= 1e-8 && probes > 0,
          fmt::format("{}/5 seeds reached 0.6 x greedy {:.4f}, action-mean invariance {:.3g} over "
                      "{} states, {:.0f} s",
                      reached, greedy.mean, worst, probes, seconds_since(start))};
}

/// Passes every call through while tallying live attackers per state.
class CountingEnv final : public Environment {
 public:
  CountingEnv(std::unique_ptr<Environment> inner, std::map<std::size_t, long>& tally)
      : inner_(std::move(inner)), tally_(tally) {}

  EnvDescriptor describe() const override { return inner_->describe(); }
  void reset() override {
    inner_->reset();
    record();
  }
  Transition step(std::span<const double> action) override {
    const Transition t = inner_->step(action);
    record();
    return t;
  }
  ObjectSet object_set() const override { return inner_->object_set(); }
  std::vector<double> flat_baseline() const override { return inner_->flat_baseline(); }
  std::vector<double> greedy_action() const override { return inner_->greedy_action(); }

 private:
  void record() { ++tally_[inner_->object_set().classes.at(1).rows()]; }

  std::unique_ptr<Environment> inner_;
  std::map<std::size_t, long>& tally_;
};

double mean_return(const TrainingCurve& c, std::size_t lo, std::size_t hi) {
  double sum = 0.0;
  for (std::size_t i = lo; i < hi; ++i) sum += c.epochs[i].mean_return;
  return sum / static_cast<double>(hi - lo);
}

Outcome variable_cardinality(const fs::path& out) {
  const auto start = Clock::now();
  const int epochs = 500;
  const std::size_t window = 50;
  std::map<std::size_t, long> tally;
  bool ran = true, dims_ok = true, zero_block_ok = true;
  int improved = 0;
  std::size_t zero_states = 0;
  fs::create_directories(out / "criterion8");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.epochs = epochs;
    TrainHooks hooks;
    hooks.finished = [&](const Agent& agent) {
      const SetEncoder& enc = agent.encoder();
      const std::size_t offset = enc.spec().classes.at(0).abstract_dim;
      const std::size_t width = enc.spec().classes.at(1).abstract_dim;
      ConvoyEnv env(derive_seed(seed, "probe"));
      env.reset();
      for (int i = 0; i < 2000; ++i) {
        const ObjectSet s = env.object_set();
        const auto code = encode_state(enc, s);
        dims_ok = dims_ok && code.size() == enc.output_dim() &&
                  agent.represent(observe(env, Representation::encoder)).size() ==
                      agent.representation_dim();
        if (s.classes.at(1).rows() == 0) {
          ++zero_states;
          for (std::size_t i = offset; i < offset + width; ++i) {
            zero_block_ok = zero_block_ok && code[i] == 0.0;
          }
        }
        if (env.step(env.greedy_action()).done) env.reset();
      }
    };
    TrainingCurve curve;
    try {
      curve = train(
          [&](std::uint64_t s) {
            return std::make_unique<CountingEnv>(std::make_unique<ConvoyEnv>(s), tally);
          },
          Representation::encoder, cfg, {}, hooks);
    } catch (const std::exception& e) {
      fmt::print("  seed {}: error {}\n", seed, e.what());
      ran = false;
      continue;
    }
    curve.write_csv(out / "criterion8" / fmt::format("convoy_encoder_seed{}.csv", seed));
    if (curve.diverged_at || curve.epochs.size() != static_cast<std::size_t>(epochs)) {
      ran = false;
      fmt::print("  seed {}: stopped after {} epochs ({})\n", seed, curve.epochs.size(),
                 curve.divergence);
      continue;
    }
    const double first = mean_return(curve, 0, window);
    const double last = mean_return(curve, epochs - window, epochs);
    if (last > first) ++improved;
    fmt::print("  seed {}: mean return epochs 1-{} {:.4f}, epochs {}-{} {:.4f}\n", seed, window,
               first, epochs - window + 1, epochs, last);
    std::fflush(stdout);
  }
  std::string counts;
  bool all_counts = true;
  for (std::size_t k = 0; k <= 6; ++k) {
    all_counts = all_counts && tally.count(k);
    counts += fmt::format("{}{}:{}", k ? " " : "", k, tally.count(k) ? tally.at(k) : 0);
  }
  const bool bounded = tally.empty() || tally.rbegin()->first <= 6;
  const bool ok = ran && dims_ok && zero_block_ok && zero_states > 0 && all_counts && bounded &&
                  improved >= 3;
  return {ok, fmt::format("attacker counts seen [{}], constant width {}, zero block on {} empty "
                          "states {}, improved on {}/5 seeds, {:.0f} s",
                          counts, dims_ok ? "yes" : "no", zero_states,
                          zero_block_ok ? "yes" : "no", improved, seconds_since(start))};
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".svg" && ext != ".txt") continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

Outcome determinism(const fs::path& out) {
  auto run = [&](const fs::path& dir) {
    fs::remove_all(dir);
    std::vector<ExperimentConfig> configs;
    for (auto rep : {Representation::encoder, Representation::baseline}) {
      ExperimentConfig c;
      c.task = TaskId::scavenger2;
      c.objects = 2;
      c.representation = rep;
      c.seeds = {0, 1};
      c.train.epochs = 25;
      c.moving_average = 10;
      c.greedy_episodes = 100;
      c.output_dir = dir;
      configs.push_back(c);
    }
    compare(configs);
    return read_tree(dir);
  };
  const auto a = run(out / "criterion9_a");
  const auto b = run(out / "criterion9_b");
  std::size_t svgs = 0, csvs = 0;
  for (const auto& [name, _] : a) {
    svgs += name.ends_with(".svg");
    csvs += name.ends_with(".csv");
  }
  return {a == b && svgs == 2 && csvs >= 4,
          fmt::format("{} files ({} CSV, {} SVG) compared byte for byte, {}", a.size(), csvs, svgs,
                      a == b ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perminv acceptance suite"};
  std::vector<int> only;
  std::string out = "acceptance_runs";
  app.add_option("criteria", only, "criterion numbers to run (default: all)")
      ->check(CLI::Range(1, 9));
  app.add_option("--out", out, "directory for training artifacts");
  CLI11_PARSE(app, argc, argv);

  const fs::path dir = out;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"permutation invariance", permutation_invariance},
      {"factorization oracle", factorization_oracle},
      {"gradient correctness", gradient_correctness},
      {"GAE oracle", gae_oracle},
      {"combinatorics", combinatorics},
      {"scavenger task 1 scaling", [&] { return scaling_claim(dir); }},
      {"scavenger task 2 multi-class", [&] { return multi_class(dir); }},
      {"convoy variable cardinality", [&] { return variable_cardinality(dir); }},
      {"determinism", [&] { return determinism(dir); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failures += !o.pass;
    fmt::print("{} criterion {}: {} ({})\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
               o.detail);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
