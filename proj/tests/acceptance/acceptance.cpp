// Acceptance run: one PASS/FAIL line per criterion A1-A8.
//
//   acceptance [--only A1,A3] [--verbose]
//
// A1, A2 and A5 share the RA curriculum runs; A8 uses the A6 model when A6
// ran in the same invocation. Exit status is 0 only if every selected
// criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "rwrl/harness.hpp"
#include "rwrl/oracles.hpp"
#include "rwrl/training.hpp"
#include "test_util.hpp"

using namespace rwrl;
using Clock = std::chrono::steady_clock;

namespace {

bool verbose = false;

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void log(const std::string& line) {
  if (verbose) std::cerr << "  " << line << "\n";
}

// ------------------------------------------------------------ RA curriculum

constexpr int kLevels = 3;
constexpr int kLevelSize = 100;
constexpr int kMaxDepth = 6;

const ProblemSet& ra_curriculum() {
  static const ProblemSet set = generate_ra(kLevels * kLevelSize, kMaxDepth, 1);
  return set;
}

TrainConfig curriculum_config(Algorithm algo, std::uint64_t seed) {
  TrainConfig c = preset_config(EnvName::kRA);
  c.algorithm = algo;
  c.seed = seed;
  c.curriculum_block = kLevelSize;
  c.max_epochs = 50;
  c.validate_history = true;
  return c;
}

struct Run {
  TrainResult result;
  double seconds;
};

const std::map<std::pair<int, std::uint64_t>, Run>& curriculum_runs() {
  static const auto runs = [] {
    std::map<std::pair<int, std::uint64_t>, Run> out;
    for (std::uint64_t seed : {1, 2, 3}) {
      for (Algorithm a : {Algorithm::k3sil, Algorithm::kBC}) {
        const auto t0 = Clock::now();
        TrainResult r = train(curriculum_config(a, seed), EnvName::kRA,
                              ra_curriculum().problems());
        const double s = seconds_since(t0);
        log(std::string(algorithm_string(a)) + " seed " + std::to_string(seed) +
            ": " + std::to_string(r.metrics.size()) + " epochs, levels " +
            std::to_string(r.metrics.empty() ? 0 : r.metrics.back().levels_completed) +
            ", " + fmt("%.1fs", s));
        out.emplace(std::make_pair(static_cast<int>(a), seed), Run{std::move(r), s});
      }
    }
    return out;
  }();
  return runs;
}

const Run& run_of(Algorithm a, std::uint64_t seed) {
  return curriculum_runs().at({static_cast<int>(a), seed});
}

int levels_at(const TrainResult& r, std::size_t epoch) {
  if (r.metrics.empty()) return 0;
  return r.metrics[std::min(epoch, r.metrics.size() - 1)].levels_completed;
}

Verdict a1() {
  std::ostringstream d;
  double sil_seconds = 0;
  bool all_complete = true;
  int bc_not_faster = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Run& sil = run_of(Algorithm::k3sil, seed);
    const Run& bc = run_of(Algorithm::kBC, seed);
    sil_seconds += sil.seconds;
    const bool complete = sil.result.curriculum_complete &&
                          levels_at(sil.result, 1000) == kLevels;
    all_complete = all_complete && complete;
    bool ordered = true;
    const std::size_t horizon =
        std::max(sil.result.metrics.size(), bc.result.metrics.size());
    for (std::size_t e = 0; e < horizon; ++e) {
      ordered = ordered && levels_at(bc.result, e) <= levels_at(sil.result, e);
    }
    bc_not_faster += ordered;
    d << "seed " << seed << ": 3sil " << (complete ? "complete" : "incomplete")
      << " in " << sil.result.metrics.size() << " epochs, bc levels "
      << levels_at(bc.result, 1000) << " after " << bc.result.metrics.size()
      << " epochs" << (ordered ? "" : " (bc ahead)") << "; ";
  }
  d << "3sil total " << fmt("%.1fs", sil_seconds) << "; bc no faster on "
    << bc_not_faster << "/3 seeds";
  return {all_complete && sil_seconds < 1800 && bc_not_faster >= 2, d.str()};
}

Verdict a2() {
  const Model& model = run_of(Algorithm::k3sil, 1).result.model;
  GenerateOptions held_out;
  for (const auto& e : ra_curriculum().entries) held_out.exclude.push_back(e.problem.term);
  const ProblemSet test = generate_ra(200, kMaxDepth, 2, held_out);
  const EvalReport r = evaluate(model, EnvName::kRA, test.problems());
  return {r.rate >= 0.90, "greedy success " + fmt("%.3f", r.rate) +
                              " on 200 held-out problems (need >= 0.90)"};
}

// ------------------------------------------------------------ gradients

Verdict a3() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(3);
  const LossKind kinds[] = {LossKind::kCrossEntropy, LossKind::kA2C,
                            LossKind::kSilPaac, LossKind::kPpoClip,
                            LossKind::kValueMse};
  const EnvName envs[] = {EnvName::kRA, EnvName::kPoly, EnvName::kAim};
  double worst = 0;
  std::size_t checked = 0, skipped = 0;
  int cases = 0;
  for (LossKind kind : kinds) {
    for (int i = 0; i < 50; ++i, ++cases) {
      const EnvName env = envs[i % 3];
      ModelConfig mc = ModelConfig::defaults(env, kind != LossKind::kPpoClip || i % 2);
      if (i % 4 == 3) mc.order = PredictorOrder::kReluThenSigmoid;
      const Model model(mc, rng());
      std::vector<Sample> batch;
      const int size = 1 + static_cast<int>(rng() % 3);
      for (int b = 0; b < size; ++b) {
        batch.push_back(testing::random_sample(rng, default_env(env), 3));
      }
      std::vector<std::size_t> coords;
      const auto& mask = model.params().trainable_mask;
      while (coords.size() < 150) {
        const std::size_t c = rng() % mask.size();
        if (mask[c]) coords.push_back(c);
      }
      const auto r = testing::check_gradients(model, batch, kind, {}, 1e-4, coords);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
      skipped += r.skipped;
    }
  }
  const double secs = seconds_since(t0);
  const double skip_rate = static_cast<double>(skipped) / (checked + skipped);
  return {worst <= 1e-4 && secs < 60 && skip_rate <= 0.05,
          std::to_string(cases) + " cases, " + std::to_string(checked) +
              " coordinates, max rel error " + fmt("%.2e", worst) +
              ", kink skips " + fmt("%.2f%%", 100 * skip_rate) + ", " +
              fmt("%.1fs", secs)};
}

// ------------------------------------------------------------ environments

std::vector<int> legal_rewrites(const EnvSpec& env, const EnvState& s) {
  std::vector<int> out;
  for (int a : legal_actions(env, s)) {
    if (env.actions[a].kind == Action::Kind::kRewrite) out.push_back(a);
  }
  return out;
}

Verdict a4() {
  const auto t0 = Clock::now();
  std::ostringstream d;
  const bool sizes = default_env(EnvName::kRA).action_count() == 9 &&
                     default_env(EnvName::kPoly).action_count() == 28 &&
                     default_env(EnvName::kAim).action_count() == 177;
  d << "tables " << default_env(EnvName::kRA).action_count() << "/"
    << default_env(EnvName::kPoly).action_count() << "/"
    << default_env(EnvName::kAim).action_count() << "; ";

  std::mt19937_64 rng(4);
  const EnvSpec& ra = default_env(EnvName::kRA);
  int ra_cases = 0, ra_bad = 0;
  while (ra_cases < 10000) {
    const Term t = testing::random_term(rng, ra.signature, 4);
    const EnvState s{t, testing::random_path(rng, t), 0, "", {}};
    const auto acts = legal_rewrites(ra, s);
    if (acts.empty()) continue;
    const int a = acts[rng() % acts.size()];
    const Term after = step(ra, s, a).next.term;
    ra_bad += eval_ra(after) != eval_ra(t);
    ++ra_cases;
  }
  d << "RA invariance " << ra_cases - ra_bad << "/" << ra_cases << "; ";

  const EnvSpec& poly = default_env(EnvName::kPoly);
  int poly_cases = 0, poly_bad = 0, nf_checked = 0;
  std::uniform_int_distribution<std::uint64_t> val(0, 12);
  while (poly_cases < 1000) {
    const Term t = testing::random_term(rng, poly.signature, 3);
    EnvState s{t, testing::random_path(rng, t), 0, "", t};
    const auto acts = legal_rewrites(poly, s);
    if (acts.empty()) continue;
    const int a = acts[rng() % acts.size()];
    std::optional<Term> after;
    for (const RewriteRule& rule : poly.actions[a].rules) {
      if ((after = rewrite_at(t, s.cursor, rule))) break;
    }
    const std::array<std::uint64_t, 3> xyz{val(rng), val(rng), val(rng)};
    bool ok = eval_poly(*after, xyz) == eval_poly(t, xyz);
    try {
      const Term nf = poly_normalize(t, 1000);
      ok = ok && eval_poly(nf, xyz) == eval_poly(t, xyz);
      ++nf_checked;
    } catch (const ValueBoundExceeded&) {
    } catch (const std::domain_error&) {  // non-ground exponent
    }
    poly_bad += !ok;
    ++poly_cases;
  }
  d << "POLY congruence " << poly_cases - poly_bad << "/" << poly_cases
    << " (normal form compared on " << nf_checked << "); " << fmt("%.1fs", seconds_since(t0));
  return {sizes && ra_bad == 0 && poly_bad == 0 && seconds_since(t0) < 60, d.str()};
}

// ------------------------------------------------------------ 3SIL mechanics

Episode solved_of_length(const std::string& id, std::size_t len, std::uint64_t tag) {
  const EnvState s{parse_term("0", ra_signature()), {}, 0, id, {}};
  Episode e{id, tag, {}, s, rwrl::Outcome::kSolved, 1.0};
  for (std::size_t i = 0; i < len; ++i) e.steps.push_back(Transition{s, {1}, 1, 1.0});
  return e;
}

bool has_repeated_state(const Episode& e) {
  std::vector<std::pair<Term, Path>> seen;
  for (const auto& t : e.steps) seen.emplace_back(t.state.term, t.state.cursor);
  seen.emplace_back(e.final_state.term, e.final_state.cursor);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    for (std::size_t j = i + 1; j < seen.size(); ++j) {
      if (seen[i] == seen[j]) return true;
    }
  }
  return false;
}

Verdict a5() {
  std::ostringstream d;
  std::mt19937_64 rng(5);

  bool retention = true;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 4);
    SolutionHistory h(k);
    std::vector<std::size_t> lens;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 25); i < n; ++i) {
      lens.push_back(1 + rng() % 40);
      h.add(solved_of_length("p", lens.back(), i));
    }
    std::stable_sort(lens.begin(), lens.end());
    lens.resize(std::min<std::size_t>(k, lens.size()));
    std::vector<std::size_t> stored;
    for (const auto& s : *h.solutions("p")) stored.push_back(s.steps.size());
    retention = retention && stored == lens;
  }
  d << "retention " << (retention ? "ok" : "FAILED") << "; ";

  // Five problems with very different solution lengths; 4 dof, alpha 0.01.
  SolutionHistory h(1);
  const std::size_t lengths[] = {1, 3, 10, 40, 100};
  for (std::uint64_t i = 0; i < 5; ++i) {
    h.add(solved_of_length("p" + std::to_string(i), lengths[i], i));
  }
  std::array<int, 5> counts{};
  for (const auto& s : sample_batch_stratified(h, 10000, rng)) ++counts[s.ctx_seed];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  const bool fair = chi2 < 13.277;
  d << "stratified chi2 " << fmt("%.2f", chi2) << " (crit 13.28); ";

  int unsolved = 0;
  for (int i = 0; i < 10000; ++i) unsolved += sample_problem_biased({true, false}, 5, rng) == 1;
  const double freq = unsolved / 10000.0;
  const bool bias = std::abs(freq - 5.0 / 6.0) <= 0.02;
  d << "bias freq " << fmt("%.4f", freq) << "; ";

  const Model random_model(ModelConfig::defaults(EnvName::kRA), 5);
  const EnvSpec& ra = default_env(EnvName::kRA);
  int pruned_ok = 0, pruned_total = 0, removed = 0;
  const auto pool = generate_ra(50, 4, 55).problems();
  for (int i = 0; pruned_total < 1000 && i < 100000; ++i) {
    const Problem& p = pool[i % pool.size()];
    const Episode e = collect_episode(ra, p, random_model, ActionMode::kSample, 1.0, rng);
    if (!e.solved()) continue;
    const Episode q = prune_loops(e);
    const StepResult r = replay(ra, p, q.actions());
    pruned_ok += !has_repeated_state(q) && r.outcome == rwrl::Outcome::kSolved &&
                 r.next.term == e.final_state.term && q.steps.size() <= e.steps.size();
    removed += static_cast<int>(e.steps.size() - q.steps.size());
    ++pruned_total;
  }
  d << "pruning " << pruned_ok << "/" << pruned_total << " (" << removed
    << " steps removed); ";

  bool validity = true;
  int epochs = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& m : run_of(Algorithm::k3sil, seed).result.metrics) {
      validity = validity && m.history_validity == 1.0;
      ++epochs;
    }
  }
  d << "history validity 100% over " << epochs << " epochs: " << (validity ? "yes" : "no");
  return {retention && fair && bias && pruned_total == 1000 && pruned_ok == 1000 && validity,
          d.str()};
}

// ------------------------------------------------------------ AIM

std::optional<Model> aim_model;

Verdict a6() {
  GenerateOptions options;
  options.min_scramble_depth = 1;
  const ProblemSet set = generate_aim(200, 4, 1, options);
  TrainConfig c = preset_config(EnvName::kAim);
  c.warmup_episodes = 2000;
  c.episodes_per_epoch = 1000;
  c.batches_per_epoch = 250;
  c.max_epochs = 100;
  c.eval_samples = 200;
  const auto t0 = Clock::now();
  const TrainResult r = train(c, EnvName::kAim, set.problems(),
                              [](const EpochMetrics& m, const Model&, const SolutionHistory&) {
                                if (m.epoch % 10 == 9) {
                                  log("aim epoch " + std::to_string(m.epoch) + " eval " +
                                      fmt("%.3f", m.eval_success));
                                }
                              });
  const double train_s = seconds_since(t0);
  aim_model = r.model;
  const EvalReport greedy = evaluate(r.model, EnvName::kAim, set.problems());
  EvalOptions budget;
  budget.mode = EvalMode::kBudgetSampled;
  budget.seconds_per_problem = 10;
  const EvalReport sampled = evaluate(r.model, EnvName::kAim, set.problems(), budget);
  return {greedy.rate >= 0.60 && sampled.rate >= greedy.rate,
          "greedy " + fmt("%.3f", greedy.rate) + " after " +
              std::to_string(r.metrics.size()) + " epochs (" + fmt("%.0fs", train_s) +
              "), budget-sampled 10s " + fmt("%.3f", sampled.rate) + " (" +
              fmt("%.0fs", sampled.wall_time) + ")"};
}

// ------------------------------------------------------------ losses

// Direct definition: sum_{i < min(n, T-t)} g^i r_{t+i}, plus g^n V(s_{t+n})
// when t+n < T, or g^(T-t) V(s_T) when the tail reaches T and bootstrapping
// is allowed.
std::vector<double> brute_targets(const std::vector<double>& r,
                                  const std::vector<double>& v, int n, double g,
                                  bool bootstrap) {
  const int T = static_cast<int>(r.size());
  std::vector<double> out(T);
  for (int t = 0; t < T; ++t) {
    double acc = 0, w = 1;
    int i = 0;
    for (; i < n && t + i < T; ++i) {
      acc += w * r[t + i];
      w *= g;
    }
    if (t + i < T || bootstrap) acc += w * v[t + i];
    out[t] = acc;
  }
  return out;
}

Verdict a7() {
  std::mt19937_64 rng(7);
  // Dyadic gammas, rewards and values keep every partial sum exact, so the
  // comparison can be bitwise.
  const double gammas[] = {0.5, 0.75, 0.9375, 1.0};
  int exact = 0;
  for (int i = 0; i < 1000; ++i) {
    const int T = 1 + static_cast<int>(rng() % 40);
    const int n = 1 + static_cast<int>(rng() % 10);
    const double g = gammas[rng() % 4];
    const bool boot = rng() % 2;
    std::vector<double> r(T), v(T + 1);
    for (auto& x : r) x = (rng() % 4 == 0) ? static_cast<double>(rng() % 9) / 8 : 0.0;
    for (auto& x : v) x = (static_cast<double>(rng() % 129) - 64) / 64;
    exact += nstep_targets(r, v, n, g, boot) == brute_targets(r, v, n, g, boot);
  }

  int ppo_ok = 0;
  double worst = 0;
  const EnvName envs[] = {EnvName::kRA, EnvName::kPoly, EnvName::kAim};
  for (int i = 0; i < 1000; ++i) {
    const EnvName env = envs[i % 3];
    const bool vh = i % 2;
    const Model m(ModelConfig::defaults(env, vh), rng());
    std::vector<Sample> batch;
    for (int b = 0, size = 1 + static_cast<int>(rng() % 6); b < size; ++b) {
      batch.push_back(testing::random_sample(rng, default_env(env), 3));
    }
    LossOptions opt;
    opt.ppo_clip = 0.1 + 0.2 * (rng() % 3);
    const double got = loss_and_grad(m, batch, LossKind::kPpoClip, opt, nullptr).loss;
    double ref = 0;
    for (const Sample& s : batch) {
      const PolicyOutput out = policy_forward(m, s.state, EpisodeContext(s.ctx_seed), s.legal);
      const double rho = out.probs[s.action] / s.old_prob;
      const double clipped = std::min(std::max(rho, 1 - opt.ppo_clip), 1 + opt.ppo_clip);
      double l = -std::min(rho * s.advantage, clipped * s.advantage);
      if (vh) l += 0.5 * (s.target - *out.value) * (s.target - *out.value);
      ref += l;
    }
    ref /= batch.size();
    const double err = std::abs(got - ref) / std::max(1.0, std::abs(ref));
    worst = std::max(worst, err);
    ppo_ok += err <= 1e-12;
  }
  return {exact == 1000 && ppo_ok == 1000,
          "n-step exact " + std::to_string(exact) + "/1000; PPO within 1e-12 " +
              std::to_string(ppo_ok) + "/1000 (max err " + fmt("%.1e", worst) + ")"};
}

// ------------------------------------------------------------ lemmas

Verdict a8() {
  GenerateOptions options;
  options.min_scramble_depth = 1;
  const ProblemSet set = generate_aim(100, 4, 8, options);
  const bool trained = aim_model.has_value();
  const Model model = trained ? *aim_model : Model(ModelConfig::defaults(EnvName::kAim), 8);
  int lemmas = 0, unsound = 0, with_lemma = 0;
  for (const auto& e : set.entries) {
    const auto ls = emit_lemmas(model, e.problem, 1.0);
    with_lemma += !ls.empty();
    for (const Lemma& l : ls) {
      ++lemmas;
      unsound += !verify_lemma(l) || l.before != e.problem.term.child(l.side);
    }
  }
  return {unsound == 0 && lemmas > 0,
          std::to_string(lemmas) + " lemmas from " + std::to_string(with_lemma) +
              "/100 problems (" + (trained ? "A6 model" : "untrained model") +
              "), unsound " + std::to_string(unsound)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria A1-A8"};
  std::vector<std::string> only;
  app.add_option("--only", only, "Criteria to run, e.g. A1,A3")->delimiter(',');
  app.add_flag("--verbose", verbose, "Progress on stderr");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4},
      {"A5", a5}, {"A6", a6}, {"A7", a7}, {"A8", a8}};
  const std::set<std::string> selected(only.begin(), only.end());
  bool all = true;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Verdict o{false, ""};
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << id << " " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << " ["
              << fmt("%.1fs", seconds_since(t0)) << "]" << std::endl;
  }
  return all ? 0 : 1;
}
