#pragma once
// Episode collection, solution history, stratified sampling and the
// training loops: 3SIL, behavioural cloning, A2C, SIL-PAAC and PPO.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rwrl/envs.hpp"
#include "rwrl/neural.hpp"

namespace rwrl {

// Independent stream seed for (seed, a, b); splitmix-style mixing.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

struct Transition {
  EnvState state;
  std::vector<int> legal;
  int action = 0;
  double prob = 1.0;  // behaviour probability of `action`
};

struct Episode {
  std::string problem_id;
  std::uint64_t ctx_seed = 0;
  std::vector<Transition> steps;
  EnvState final_state;
  Outcome outcome = Outcome::kOngoing;
  double reward = 0.0;

  bool solved() const { return outcome == Outcome::kSolved; }
  std::vector<int> actions() const;
};

enum class ActionMode { kSample, kGreedy };

// Rolls out `model` on `problem`. In sample mode, with probability `noise`
// a uniformly random legal action replaces the policy's draw. The fresh-
// variable context seed is drawn from rng.
Episode collect_episode(const EnvSpec& env, const Problem& problem,
                        const Model& model, ActionMode mode, double noise,
                        std::mt19937_64& rng);

// Removes every segment between two visits of the same (term, cursor) pair.
Episode prune_loops(const Episode& e);

class SolutionHistory {
 public:
  struct Solution {
    std::uint64_t ctx_seed;
    std::vector<Transition> steps;
    long long arrival;
  };

  explicit SolutionHistory(int k = 1) : k_(k) {}

  // Stores a solved episode if it is among the k shortest seen for its
  // problem (ties keep the earlier one). Returns true when stored.
  bool add(const Episode& e);
  const std::vector<Solution>* solutions(const std::string& problem_id) const;
  bool solved(const std::string& problem_id) const {
    return solutions(problem_id) != nullptr;
  }
  std::size_t solved_count() const { return by_problem_.size(); }
  std::size_t transition_count() const;
  std::vector<std::string> problem_ids() const;
  int k() const { return k_; }

 private:
  int k_;
  long long arrivals_ = 0;
  std::map<std::string, std::vector<Solution>> by_problem_;
};

struct SampledTransition {
  const Transition* transition;
  std::uint64_t ctx_seed;
};

// Two-stage draw: a solved problem uniformly, then one of its stored
// transitions uniformly. Throws std::invalid_argument when H is empty and
// B > 0.
std::vector<SampledTransition> sample_batch_stratified(
    const SolutionHistory& h, int batch_size, std::mt19937_64& rng);

// Index into `solved`: unsolved entries weigh `bias`, solved ones 1.
std::size_t sample_problem_biased(const std::vector<bool>& solved, double bias,
                                  std::mt19937_64& rng);

// Fraction of stored solutions that replay to solved from their problem.
double history_replay_validity(const SolutionHistory& h, const EnvSpec& env,
                               const std::vector<Problem>& problems);

// V_t^n = sum_{i<n} g^i r_{t+i} + g^n V(s_{t+n}) for every t. `values` has
// one entry per state s_0..s_T; `bootstrap_final` says whether V(s_T) may
// be used (false when s_T is terminal).
std::vector<double> nstep_targets(std::span<const double> rewards,
                                  std::span<const double> values, int n,
                                  double gamma, bool bootstrap_final);

// Keeps the samples with strictly positive advantage.
std::vector<Sample> sil_paac_filter(std::span<const Sample> batch);

enum class Algorithm { k3sil, kBC, kA2C, kSilPaac, kPPO };
Algorithm parse_algorithm(std::string_view s);
const char* algorithm_string(Algorithm a);

struct TrainConfig {
  Algorithm algorithm = Algorithm::k3sil;
  int k = 1;
  int batch_size = 32;
  int batches_per_epoch = 250;
  int warmup_episodes = 1000;
  int episodes_per_epoch = 1000;
  int max_epochs = 50;
  double noise = 0.05;
  double bias = 5.0;
  bool prune = true;
  int step_limit = 0;         // 0: environment default
  int curriculum_block = 400;  // 0: every problem active from the start
  double advance_threshold = 0.95;
  int eval_samples = 400;
  bool stop_when_complete = true;
  bool validate_history = false;
  std::uint64_t seed = 1;
  double lr = 1e-3;
  PredictorOrder predictor_order = PredictorOrder::kSigmoidThenRelu;
  int bc_buffer = 40000;
  // Actor-critic baselines.
  double gamma = 0.99;
  int nstep = 5;
  int sil_buffer = 40000;
  double sil_alpha = 0.6;
  int sil_batches = 250;
  double sil_value_weight = 0.01;
  int ppo_update_steps = 2000;
  int ppo_epochs = 4;
  double ppo_lr = 0.002;
  double ppo_clip = 0.2;
  double max_wall_seconds = 0;  // 0: unlimited
};

// Default settings per environment: RA bias 1 without pruning and a 0.95
// advance threshold; POLY bias 5 with pruning and 0.90; AIM bias 5 with
// pruning, no curriculum, f = 10000, NB = 500, 100 epochs.
TrainConfig preset_config(EnvName env);

// Flat `key = value` text; '#' starts a comment. Unknown keys and malformed
// values throw std::invalid_argument naming the line.
void apply_config_text(TrainConfig& config, std::string_view text);
TrainConfig load_config(const std::filesystem::path& path, EnvName env);

struct EpochMetrics {
  int epoch = 0;
  int level = 1;             // current curriculum level (1-based)
  int levels_completed = 0;  // levels whose evaluation passed the threshold
  int active = 0;            // active problem count
  std::size_t solved_count = 0;  // problems with a stored solution
  int episodes = 0;
  int episodes_solved = 0;
  double eval_success = 0.0;
  double loss = 0.0;         // mean training loss over the epoch's updates
  double history_validity = 1.0;
  double wall_time = 0.0;    // seconds since training start

  std::string to_json() const;
};

struct TrainResult {
  Model model;
  SolutionHistory history;
  std::vector<EpochMetrics> metrics;
  bool curriculum_complete = false;
};

using EpochCallback = std::function<void(const EpochMetrics&, const Model&,
                                         const SolutionHistory&)>;

// `problems` are expected in curriculum order (ascending difficulty).
TrainResult train(const TrainConfig& config, EnvName env,
                  const std::vector<Problem>& problems,
                  const EpochCallback& on_epoch = {});

// Greedy success rate on `samples` draws (with replacement) from the first
// `active` problems. Rollouts of a repeated problem are reused.
double greedy_success(const EnvSpec& env, const Model& model,
                      const std::vector<Problem>& problems, int active,
                      int samples, std::mt19937_64& rng);

}  // namespace rwrl
