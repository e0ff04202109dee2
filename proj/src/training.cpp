#include "rwrl/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace rwrl {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kTrainStream = 0x7472616e;
constexpr std::uint64_t kEvalStream = 0x6576616c;

bool same_position(const EnvState& a, const EnvState& b) {
  return a.cursor == b.cursor && a.term == b.term;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b) {
  return mix(mix(mix(seed) ^ a) ^ b);
}

std::vector<int> Episode::actions() const {
  std::vector<int> out;
  out.reserve(steps.size());
  for (const auto& t : steps) out.push_back(t.action);
  return out;
}

Episode collect_episode(const EnvSpec& env, const Problem& problem,
                        const Model& model, ActionMode mode, double noise,
                        std::mt19937_64& rng) {
  EnvState s = reset(env, problem);
  const std::uint64_t ctx_seed = rng();
  const EpisodeContext ctx(ctx_seed);
  Episode e{problem.id, ctx_seed, {}, s, Outcome::kOngoing, 0.0};
  if (is_solved(env, s)) {
    e.outcome = Outcome::kSolved;
    e.reward = 1.0;
    return e;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (true) {
    std::vector<int> legal = legal_actions(env, s);
    if (legal.empty()) {
      e.outcome = Outcome::kStepLimit;  // stuck: nothing applies
      break;
    }
    const PolicyOutput out = policy_forward(model, s, ctx, legal);
    int action;
    double prob;
    if (mode == ActionMode::kGreedy) {
      action = argmax_action(out.probs, legal);
      prob = 1.0;
    } else {
      const double share = noise / static_cast<double>(legal.size());
      if (noise > 0.0 && unit(rng) < noise) {
        std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
        action = legal[pick(rng)];
      } else {
        const double u = unit(rng);
        double acc = 0.0;
        action = legal.back();
        for (int a : legal) {
          acc += out.probs[a];
          if (u < acc) {
            action = a;
            break;
          }
        }
      }
      prob = (1.0 - noise) * out.probs[action] + share;
    }
    StepResult r = step(env, s, action);
    e.steps.push_back(Transition{std::move(s), std::move(legal), action, prob});
    s = std::move(r.next);
    if (r.done) {
      e.outcome = r.outcome;
      e.reward = r.reward;
      break;
    }
  }
  e.final_state = s;
  return e;
}

Episode prune_loops(const Episode& e) {
  Episode out{e.problem_id, e.ctx_seed, {}, e.final_state, e.outcome, e.reward};
  auto cut_to = [&out](const EnvState& s) {
    for (std::size_t j = 0; j < out.steps.size(); ++j) {
      if (same_position(out.steps[j].state, s)) {
        out.steps.erase(out.steps.begin() + j, out.steps.end());
        return;
      }
    }
  };
  for (const Transition& t : e.steps) {
    cut_to(t.state);
    out.steps.push_back(t);
  }
  cut_to(e.final_state);
  for (std::size_t i = 0; i < out.steps.size(); ++i) {
    out.steps[i].state.steps_taken = static_cast<int>(i);
  }
  out.final_state.steps_taken = static_cast<int>(out.steps.size());
  return out;
}

bool SolutionHistory::add(const Episode& e) {
  if (!e.solved()) return false;
  auto& list = by_problem_[e.problem_id];
  const std::size_t len = e.steps.size();
  auto pos = std::find_if(list.begin(), list.end(), [len](const Solution& s) {
    return s.steps.size() > len;
  });
  if (pos - list.begin() >= k_) {
    if (list.empty()) by_problem_.erase(e.problem_id);
    return false;
  }
  list.insert(pos, Solution{e.ctx_seed, e.steps, arrivals_++});
  if (static_cast<int>(list.size()) > k_) list.pop_back();
  return true;
}

const std::vector<SolutionHistory::Solution>* SolutionHistory::solutions(
    const std::string& problem_id) const {
  auto it = by_problem_.find(problem_id);
  return it == by_problem_.end() ? nullptr : &it->second;
}

std::size_t SolutionHistory::transition_count() const {
  std::size_t n = 0;
  for (const auto& [id, list] : by_problem_) {
    for (const auto& s : list) n += s.steps.size();
  }
  return n;
}

std::vector<std::string> SolutionHistory::problem_ids() const {
  std::vector<std::string> ids;
  ids.reserve(by_problem_.size());
  for (const auto& [id, list] : by_problem_) ids.push_back(id);
  return ids;
}

std::vector<SampledTransition> sample_batch_stratified(
    const SolutionHistory& h, int batch_size, std::mt19937_64& rng) {
  std::vector<SampledTransition> out;
  if (batch_size <= 0) return out;
  // Problems whose only stored solution is empty (solved at reset) have no
  // transitions to offer.
  std::vector<const std::vector<SolutionHistory::Solution>*> lists;
  std::vector<std::size_t> counts;
  for (const auto& id : h.problem_ids()) {
    const auto* list = h.solutions(id);
    std::size_t n = 0;
    for (const auto& s : *list) n += s.steps.size();
    if (n == 0) continue;
    lists.push_back(list);
    counts.push_back(n);
  }
  if (lists.empty()) {
    throw std::invalid_argument("cannot sample from an empty history");
  }
  std::uniform_int_distribution<std::size_t> pick_problem(0, lists.size() - 1);
  out.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    const std::size_t p = pick_problem(rng);
    std::uniform_int_distribution<std::size_t> pick(0, counts[p] - 1);
    std::size_t i = pick(rng);
    for (const auto& s : *lists[p]) {
      if (i < s.steps.size()) {
        out.push_back(SampledTransition{&s.steps[i], s.ctx_seed});
        break;
      }
      i -= s.steps.size();
    }
  }
  return out;
}

std::size_t sample_problem_biased(const std::vector<bool>& solved, double bias,
                                  std::mt19937_64& rng) {
  if (solved.empty()) throw std::invalid_argument("no problems to sample");
  double total = 0.0;
  for (bool s : solved) total += s ? 1.0 : bias;
  std::uniform_real_distribution<double> unit(0.0, total);
  double u = unit(rng);
  for (std::size_t i = 0; i < solved.size(); ++i) {
    u -= solved[i] ? 1.0 : bias;
    if (u < 0.0) return i;
  }
  return solved.size() - 1;
}

double history_replay_validity(const SolutionHistory& h, const EnvSpec& env,
                               const std::vector<Problem>& problems) {
  std::unordered_map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id.emplace(p.id, &p);
  std::size_t total = 0, valid = 0;
  for (const auto& id : h.problem_ids()) {
    for (const auto& s : *h.solutions(id)) {
      ++total;
      auto it = by_id.find(id);
      if (it == by_id.end()) continue;
      std::vector<int> actions;
      for (const auto& t : s.steps) actions.push_back(t.action);
      try {
        if (replay(env, *it->second, actions).outcome == Outcome::kSolved) {
          ++valid;
        }
      } catch (const std::exception&) {
      }
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(valid) / total;
}

std::vector<double> nstep_targets(std::span<const double> rewards,
                                  std::span<const double> values, int n,
                                  double gamma, bool bootstrap_final) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1) {
    throw std::invalid_argument("nstep_targets needs one value per state");
  }
  if (n <= 0) throw std::invalid_argument("n must be positive");
  std::vector<double> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t m = std::min<std::size_t>(n, T - t);
    double g = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      g += std::pow(gamma, static_cast<double>(i)) * rewards[t + i];
    }
    if (t + n < T) {
      g += std::pow(gamma, static_cast<double>(n)) * values[t + n];
    } else if (bootstrap_final) {
      g += std::pow(gamma, static_cast<double>(T - t)) * values[T];
    }
    out[t] = g;
  }
  return out;
}

std::vector<Sample> sil_paac_filter(std::span<const Sample> batch) {
  std::vector<Sample> out;
  for (const Sample& s : batch) {
    if (s.advantage > 0.0) out.push_back(s);
  }
  return out;
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "3sil") return Algorithm::k3sil;
  if (s == "bc") return Algorithm::kBC;
  if (s == "a2c") return Algorithm::kA2C;
  if (s == "sil-paac") return Algorithm::kSilPaac;
  if (s == "ppo") return Algorithm::kPPO;
  throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

const char* algorithm_string(Algorithm a) {
  switch (a) {
    case Algorithm::k3sil: return "3sil";
    case Algorithm::kBC: return "bc";
    case Algorithm::kA2C: return "a2c";
    case Algorithm::kSilPaac: return "sil-paac";
    case Algorithm::kPPO: return "ppo";
  }
  return "?";
}

TrainConfig preset_config(EnvName env) {
  TrainConfig c;
  switch (env) {
    case EnvName::kRA:
      c.bias = 1.0;
      c.prune = false;
      c.advance_threshold = 0.95;
      break;
    case EnvName::kPoly:
      c.bias = 5.0;
      c.prune = true;
      c.advance_threshold = 0.90;
      break;
    case EnvName::kAim:
      c.bias = 5.0;
      c.prune = true;
      c.curriculum_block = 0;
      c.warmup_episodes = 2000000;
      c.episodes_per_epoch = 10000;
      c.batches_per_epoch = 500;
      c.max_epochs = 100;
      break;
  }
  return c;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("bad number '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("bad boolean '" + std::string(v) + "'");
}

using Setter = std::function<void(TrainConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto int_key = [&t](const char* k, int TrainConfig::*f) {
      t[k] = [f](TrainConfig& c, std::string_view v) { c.*f = parse_number<int>(v); };
    };
    auto dbl_key = [&t](const char* k, double TrainConfig::*f) {
      t[k] = [f](TrainConfig& c, std::string_view v) { c.*f = parse_number<double>(v); };
    };
    auto bool_key = [&t](const char* k, bool TrainConfig::*f) {
      t[k] = [f](TrainConfig& c, std::string_view v) { c.*f = parse_bool(v); };
    };
    t["algorithm"] = [](TrainConfig& c, std::string_view v) {
      c.algorithm = parse_algorithm(v);
    };
    t["predictor_order"] = [](TrainConfig& c, std::string_view v) {
      c.predictor_order = parse_predictor_order(v);
    };
    t["seed"] = [](TrainConfig& c, std::string_view v) {
      c.seed = parse_number<std::uint64_t>(v);
    };
    int_key("k", &TrainConfig::k);
    int_key("batch_size", &TrainConfig::batch_size);
    int_key("batches_per_epoch", &TrainConfig::batches_per_epoch);
    int_key("warmup_episodes", &TrainConfig::warmup_episodes);
    int_key("episodes_per_epoch", &TrainConfig::episodes_per_epoch);
    int_key("max_epochs", &TrainConfig::max_epochs);
    dbl_key("noise", &TrainConfig::noise);
    dbl_key("bias", &TrainConfig::bias);
    bool_key("prune", &TrainConfig::prune);
    int_key("step_limit", &TrainConfig::step_limit);
    int_key("curriculum_block", &TrainConfig::curriculum_block);
    dbl_key("advance_threshold", &TrainConfig::advance_threshold);
    int_key("eval_samples", &TrainConfig::eval_samples);
    bool_key("stop_when_complete", &TrainConfig::stop_when_complete);
    bool_key("validate_history", &TrainConfig::validate_history);
    dbl_key("lr", &TrainConfig::lr);
    int_key("bc_buffer", &TrainConfig::bc_buffer);
    dbl_key("gamma", &TrainConfig::gamma);
    int_key("nstep", &TrainConfig::nstep);
    int_key("sil_buffer", &TrainConfig::sil_buffer);
    dbl_key("sil_alpha", &TrainConfig::sil_alpha);
    int_key("sil_batches", &TrainConfig::sil_batches);
    dbl_key("sil_value_weight", &TrainConfig::sil_value_weight);
    int_key("ppo_update_steps", &TrainConfig::ppo_update_steps);
    int_key("ppo_epochs", &TrainConfig::ppo_epochs);
    dbl_key("ppo_lr", &TrainConfig::ppo_lr);
    dbl_key("ppo_clip", &TrainConfig::ppo_clip);
    dbl_key("max_wall_seconds", &TrainConfig::max_wall_seconds);
    return t;
  }();
  return table;
}

}  // namespace

void apply_config_text(TrainConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(where + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) {
      throw std::invalid_argument(where + ": unknown key '" + std::string(key) + "'");
    }
    try {
      it->second(config, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
  }
}

TrainConfig load_config(const std::filesystem::path& path, EnvName env) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  TrainConfig c = preset_config(env);
  apply_config_text(c, ss.str());
  return c;
}

std::string EpochMetrics::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["level"] = level;
  j["levels_completed"] = levels_completed;
  j["active"] = active;
  j["solved_count"] = solved_count;
  j["episodes"] = episodes;
  j["episodes_solved"] = episodes_solved;
  j["eval_success"] = eval_success;
  j["loss"] = loss;
  j["history_validity"] = history_validity;
  j["wall_time"] = wall_time;
  return j.dump();
}

double greedy_success(const EnvSpec& env, const Model& model,
                      const std::vector<Problem>& problems, int active,
                      int samples, std::mt19937_64& rng) {
  if (active <= 0 || samples <= 0) return 0.0;
  std::unordered_map<int, bool> cache;
  std::uniform_int_distribution<int> pick(0, active - 1);
  int solved = 0;
  for (int s = 0; s < samples; ++s) {
    const int idx = pick(rng);
    auto it = cache.find(idx);
    if (it == cache.end()) {
      std::mt19937_64 ctx_rng(derive_seed(kEvalStream, idx, 0));
      const Episode e = collect_episode(env, problems[idx], model,
                                        ActionMode::kGreedy, 0.0, ctx_rng);
      it = cache.emplace(idx, e.solved()).first;
    }
    solved += it->second;
  }
  return static_cast<double>(solved) / samples;
}

namespace {

// Sum tree over priorities for proportional sampling.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity) : cap_(1) {
    while (cap_ < capacity) cap_ <<= 1;
    tree_.assign(2 * cap_, 0.0);
  }
  void set(std::size_t i, double p) {
    i += cap_;
    tree_[i] = p;
    for (i >>= 1; i; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
  }
  double total() const { return tree_[1]; }
  std::size_t find(double u) const {
    std::size_t i = 1;
    while (i < cap_) {
      if (u < tree_[2 * i]) {
        i = 2 * i;
      } else {
        u -= tree_[2 * i];
        i = 2 * i + 1;
      }
    }
    return i - cap_;
  }

 private:
  std::size_t cap_;
  std::vector<double> tree_;
};

struct ReplayItem {
  Transition transition;
  std::uint64_t ctx_seed;
  double ret;
};

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, EnvName name,
          const std::vector<Problem>& problems)
      : cfg_(cfg),
        env_(make_env(name, EnvConfig{cfg.step_limit})),
        problems_(problems),
        model_(model_config(cfg, name), cfg.seed),
        opt_(model_.params().size(), AdamConfig{cfg.lr}),
        history_(cfg.k),
        sil_tree_(std::max(1, cfg.sil_buffer)) {}

  TrainResult run(const EpochCallback& on_epoch) {
    const auto start = std::chrono::steady_clock::now();
    const int total = static_cast<int>(problems_.size());
    const int block = cfg_.curriculum_block > 0 ? cfg_.curriculum_block : total;
    int active = std::min(block, total);
    int level = 1;
    int completed = 0;
    bool complete = false;
    std::vector<EpochMetrics> metrics;
    for (int epoch = 0; epoch < cfg_.max_epochs && total > 0; ++epoch) {
      const double elapsed = seconds_since(start);
      if (cfg_.max_wall_seconds > 0 && elapsed > cfg_.max_wall_seconds) break;
      EpochMetrics m;
      m.epoch = epoch;
      m.level = level;
      m.active = active;
      run_epoch(epoch, active, m);
      std::mt19937_64 eval_rng(derive_seed(cfg_.seed, epoch, kEvalStream));
      m.eval_success = greedy_success(env_, model_, problems_, active,
                                      cfg_.eval_samples, eval_rng);
      if (m.eval_success >= cfg_.advance_threshold && !complete) {
        completed = level;
        if (active < total) {
          active = std::min(total, active + block);
          ++level;
        } else {
          complete = true;
        }
      }
      m.levels_completed = completed;
      m.solved_count = history_.solved_count();
      if (cfg_.validate_history) {
        m.history_validity = history_replay_validity(history_, env_, problems_);
      }
      m.wall_time = seconds_since(start);
      metrics.push_back(m);
      if (on_epoch) on_epoch(m, model_, history_);
      if (complete && cfg_.stop_when_complete) break;
    }
    return TrainResult{std::move(model_), std::move(history_),
                       std::move(metrics), complete};
  }

 private:
  static ModelConfig model_config(const TrainConfig& cfg, EnvName name) {
    const bool value = cfg.algorithm == Algorithm::kA2C ||
                       cfg.algorithm == Algorithm::kSilPaac ||
                       cfg.algorithm == Algorithm::kPPO;
    ModelConfig m = ModelConfig::defaults(name, value);
    m.order = cfg.predictor_order;
    return m;
  }

  static double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t)
        .count();
  }

  void run_epoch(int epoch, int active, EpochMetrics& m) {
    const int num = epoch == 0 ? cfg_.warmup_episodes : cfg_.episodes_per_epoch;
    std::vector<bool> solved(active);
    for (int i = 0; i < active; ++i) solved[i] = history_.solved(problems_[i].id);
    const bool imitation =
        cfg_.algorithm == Algorithm::k3sil || cfg_.algorithm == Algorithm::kBC;
    const double noise = imitation ? cfg_.noise : 0.0;
    for (int i = 0; i < num; ++i) {
      std::mt19937_64 rng(derive_seed(cfg_.seed, epoch, i));
      const std::size_t idx = sample_problem_biased(solved, cfg_.bias, rng);
      Episode e = collect_episode(env_, problems_[idx], model_,
                                  ActionMode::kSample, noise, rng);
      ++m.episodes;
      m.episodes_solved += e.solved();
      if (e.solved() && cfg_.prune) e = prune_loops(e);
      switch (cfg_.algorithm) {
        case Algorithm::k3sil:
          history_.add(e);
          break;
        case Algorithm::kBC:
          history_.add(e);  // for the solved count only
          if (e.solved()) push_bc(e);
          break;
        case Algorithm::kA2C:
        case Algorithm::kSilPaac:
          if (e.solved()) history_.add(e);
          a2c_update(e);
          if (cfg_.algorithm == Algorithm::kSilPaac) push_sil(e);
          break;
        case Algorithm::kPPO:
          if (e.solved()) history_.add(e);
          ppo_push(e);
          break;
      }
    }
    std::mt19937_64 rng(derive_seed(cfg_.seed, epoch, kTrainStream));
    switch (cfg_.algorithm) {
      case Algorithm::k3sil: imitation_updates(rng, false); break;
      case Algorithm::kBC: imitation_updates(rng, true); break;
      case Algorithm::kSilPaac: sil_updates(rng); break;
      default: break;
    }
    m.loss = updates_ ? loss_sum_ / updates_ : 0.0;
    loss_sum_ = 0.0;
    updates_ = 0;
  }

  void apply(std::span<const Sample> batch, LossKind kind, Adam& opt) {
    if (batch.empty()) return;
    LossOptions o;
    o.sil_value_weight = cfg_.sil_value_weight;
    o.ppo_clip = cfg_.ppo_clip;
    const LossResult r = loss_and_grad(model_, batch, kind, o, &grad_);
    opt.step(model_.params(), grad_);
    loss_sum_ += r.loss;
    ++updates_;
  }

  static Sample to_sample(const Transition& t, std::uint64_t ctx_seed) {
    return Sample{t.state, ctx_seed, t.legal, t.action};
  }

  // 3SIL and BC share the update loop; only the sampling differs.
  void imitation_updates(std::mt19937_64& rng, bool uniform) {
    std::vector<SampledTransition> flat;
    if (uniform) {
      for (const auto& [seed, steps] : bc_buffer_) {
        for (const auto& t : steps) flat.push_back({&t, seed});
      }
      if (flat.empty()) return;
    } else if (history_.transition_count() == 0) {
      return;
    }
    std::uniform_int_distribution<std::size_t> pick(0, flat.empty() ? 0 : flat.size() - 1);
    std::vector<Sample> batch;
    for (int b = 0; b < cfg_.batches_per_epoch; ++b) {
      batch.clear();
      if (uniform) {
        for (int i = 0; i < cfg_.batch_size; ++i) {
          const auto& s = flat[pick(rng)];
          batch.push_back(to_sample(*s.transition, s.ctx_seed));
        }
      } else {
        for (const auto& s : sample_batch_stratified(history_, cfg_.batch_size, rng)) {
          batch.push_back(to_sample(*s.transition, s.ctx_seed));
        }
      }
      apply(batch, LossKind::kCrossEntropy, opt_);
    }
  }

  void push_bc(const Episode& e) {
    bc_buffer_.emplace_back(e.ctx_seed, e.steps);
    bc_count_ += e.steps.size();
    while (bc_count_ > static_cast<std::size_t>(cfg_.bc_buffer) &&
           bc_buffer_.size() > 1) {
      bc_count_ -= bc_buffer_.front().second.size();
      bc_buffer_.pop_front();
    }
  }

  std::vector<double> state_values(const Episode& e) {
    const EpisodeContext ctx(e.ctx_seed);
    std::vector<double> v;
    for (const auto& t : e.steps) {
      v.push_back(*policy_forward(model_, t.state, ctx, t.legal).value);
    }
    // The final state's legal set only matters for the policy head.
    auto legal = legal_actions(env_, e.final_state);
    if (legal.empty()) legal.push_back(0);
    v.push_back(*policy_forward(model_, e.final_state, ctx, legal).value);
    return v;
  }

  static std::vector<double> episode_rewards(const Episode& e) {
    std::vector<double> r(e.steps.size(), 0.0);
    if (!r.empty()) r.back() = e.reward;
    return r;
  }

  void a2c_update(const Episode& e) {
    if (e.steps.empty()) return;
    const auto values = state_values(e);
    const auto rewards = episode_rewards(e);
    const auto targets = nstep_targets(rewards, values, cfg_.nstep, cfg_.gamma,
                                       e.outcome != Outcome::kSolved);
    std::vector<Sample> batch;
    for (std::size_t t = 0; t < e.steps.size(); ++t) {
      Sample s = to_sample(e.steps[t], e.ctx_seed);
      s.target = targets[t];
      s.advantage = targets[t] - values[t];
      batch.push_back(std::move(s));
    }
    apply(batch, LossKind::kA2C, opt_);
  }

  static std::vector<double> discounted_returns(const Episode& e, double gamma,
                                                double tail) {
    std::vector<double> out(e.steps.size());
    double g = tail;
    for (std::size_t t = e.steps.size(); t-- > 0;) {
      g = (t + 1 == e.steps.size() ? e.reward : 0.0) + gamma * g;
      out[t] = g;
    }
    return out;
  }

  void push_sil(const Episode& e) {
    const auto returns = discounted_returns(e, cfg_.gamma, 0.0);
    for (std::size_t t = 0; t < e.steps.size(); ++t) {
      const std::size_t slot = sil_next_ % cfg_.sil_buffer;
      ReplayItem item{e.steps[t], e.ctx_seed, returns[t]};
      if (slot < sil_items_.size()) {
        sil_items_[slot] = std::move(item);
      } else {
        sil_items_.push_back(std::move(item));
      }
      // New items get the optimistic priority of their return.
      sil_tree_.set(slot, std::pow(returns[t] + 1e-6, cfg_.sil_alpha));
      ++sil_next_;
    }
  }

  void sil_updates(std::mt19937_64& rng) {
    if (sil_items_.empty()) return;
    std::vector<Sample> batch;
    for (int b = 0; b < cfg_.sil_batches; ++b) {
      if (sil_tree_.total() <= 0.0) return;
      batch.clear();
      std::uniform_real_distribution<double> unit(0.0, sil_tree_.total());
      for (int i = 0; i < cfg_.batch_size; ++i) {
        const std::size_t slot =
            std::min(sil_tree_.find(unit(rng)), sil_items_.size() - 1);
        const ReplayItem& it = sil_items_[slot];
        const EpisodeContext ctx(it.ctx_seed);
        const double v = *policy_forward(model_, it.transition.state, ctx,
                                         it.transition.legal)
                              .value;
        Sample s = to_sample(it.transition, it.ctx_seed);
        s.target = it.ret;
        s.advantage = it.ret - v;
        sil_tree_.set(slot, std::pow(std::max(s.advantage, 0.0) + 1e-6,
                                     cfg_.sil_alpha));
        batch.push_back(std::move(s));
      }
      apply(sil_paac_filter(batch), LossKind::kSilPaac, opt_);
    }
  }

  void ppo_push(const Episode& e) {
    if (e.steps.empty()) return;
    ppo_episodes_.push_back(e);
    ppo_steps_ += e.steps.size();
    if (ppo_steps_ < static_cast<std::size_t>(cfg_.ppo_update_steps)) return;
    std::vector<Sample> batch;
    for (const Episode& ep : ppo_episodes_) {
      const auto values = state_values(ep);
      const double tail = ep.outcome == Outcome::kSolved ? 0.0 : values.back();
      const auto returns = discounted_returns(ep, cfg_.gamma, tail);
      for (std::size_t t = 0; t < ep.steps.size(); ++t) {
        Sample s = to_sample(ep.steps[t], ep.ctx_seed);
        s.target = returns[t];
        s.advantage = returns[t] - values[t];
        s.old_prob = ep.steps[t].prob;
        batch.push_back(std::move(s));
      }
    }
    for (int k = 0; k < cfg_.ppo_epochs; ++k) {
      apply(batch, LossKind::kPpoClip, ppo_opt_);
    }
    ppo_episodes_.clear();
    ppo_steps_ = 0;
  }

  TrainConfig cfg_;
  EnvSpec env_;
  const std::vector<Problem>& problems_;
  Model model_;
  Adam opt_;
  Adam ppo_opt_{0, AdamConfig{cfg_.ppo_lr}};
  SolutionHistory history_;
  std::vector<double> grad_;
  double loss_sum_ = 0.0;
  int updates_ = 0;
  std::deque<std::pair<std::uint64_t, std::vector<Transition>>> bc_buffer_;
  std::size_t bc_count_ = 0;
  std::vector<ReplayItem> sil_items_;
  SumTree sil_tree_;
  std::size_t sil_next_ = 0;
  std::vector<Episode> ppo_episodes_;
  std::size_t ppo_steps_ = 0;
};

}  // namespace

TrainResult train(const TrainConfig& config, EnvName env,
                  const std::vector<Problem>& problems,
                  const EpochCallback& on_epoch) {
  if (config.k < 1) throw std::invalid_argument("k must be at least 1");
  if (config.batch_size < 0 || config.batches_per_epoch < 0) {
    throw std::invalid_argument("batch settings must be non-negative");
  }
  Trainer trainer(config, env, problems);
  return trainer.run(on_epoch);
}

}  // namespace rwrl
