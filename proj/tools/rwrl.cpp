// rwrl: generate problems, train, evaluate, solve and export lemmas.
//
// Exit codes: 0 success, 1 user error (bad flags, inputs or files),
// 2 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rwrl/harness.hpp"
#include "rwrl/training.hpp"

namespace fs = std::filesystem;
using namespace rwrl;

namespace {

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string env = "ra";
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_config) {
  cmd->add_option("--env", c.env, "Environment: ra, poly or aim")
      ->check(CLI::IsMember({"ra", "poly", "aim"}));
  if (with_config) {
    cmd->add_option("--config", c.config, "key = value training config file")
        ->check(CLI::ExistingFile);
  }
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Output path");
}

// Writes to --out when given, stdout otherwise.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw UserError("cannot write " + out);
  f << text << "\n";
}

Model load_model(const std::string& path, EnvName env) {
  if (path.empty()) throw UserError("--checkpoint is required");
  LoadedCheckpoint ck = load_checkpoint(path);
  if (ck.model.config().env != env) {
    throw UserError("checkpoint " + path + " is for env " +
                    env_name_string(ck.model.config().env) + ", not " +
                    env_name_string(env));
  }
  return std::move(ck.model);
}

int run_gen(const Common& c, int count, int max_depth, std::uint64_t value_cap,
            int scramble_depth, int min_scramble_depth,
            const std::string& exclude) {
  const EnvName env = parse_env_name(c.env);
  GenerateOptions options;
  options.min_scramble_depth = min_scramble_depth;
  if (!exclude.empty()) {
    for (const auto& e : load_problem_set(exclude, env).entries) {
      options.exclude.push_back(e.problem.term);
    }
  }
  ProblemSet set;
  switch (env) {
    case EnvName::kRA:
      set = generate_ra(count, max_depth, c.seed, options);
      break;
    case EnvName::kPoly:
      set = generate_poly(count, max_depth, value_cap, c.seed, options);
      break;
    case EnvName::kAim:
      set = generate_aim(count, scramble_depth, c.seed, options);
      break;
  }
  if (c.out.empty()) {
    write_problem_set(std::cout, set);
  } else {
    save_problem_set(c.out, set);
  }
  return 0;
}

int run_train(const Common& c, const std::string& problems_path,
              const std::vector<std::string>& overrides, bool seed_given,
              int checkpoint_every) {
  const EnvName env = parse_env_name(c.env);
  if (problems_path.empty()) throw UserError("--problems is required");
  if (c.out.empty()) throw UserError("--out directory is required");
  TrainConfig cfg = c.config.empty() ? preset_config(env) : load_config(c.config, env);
  for (const auto& kv : overrides) apply_config_text(cfg, kv);
  if (seed_given) cfg.seed = c.seed;
  const ProblemSet set = load_problem_set(problems_path, env);
  fs::create_directories(c.out);
  std::ofstream metrics(fs::path(c.out) / "metrics.jsonl");
  if (!metrics) throw UserError("cannot write metrics in " + c.out);
  const std::string meta =
      nlohmann::json{{"algorithm", algorithm_string(cfg.algorithm)},
                     {"seed", cfg.seed},
                     {"problems", problems_path}}
          .dump();
  const TrainResult r = train(
      cfg, env, set.problems(),
      [&](const EpochMetrics& m, const Model& model, const SolutionHistory&) {
        metrics << m.to_json() << std::endl;
        std::cerr << "epoch " << m.epoch << " level " << m.level << " solved "
                  << m.solved_count << "/" << set.size() << " eval "
                  << m.eval_success << " loss " << m.loss << "\n";
        if (checkpoint_every > 0 && (m.epoch + 1) % checkpoint_every == 0) {
          save_checkpoint(fs::path(c.out) / ("epoch_" + std::to_string(m.epoch) + ".ckpt"),
                          model, meta);
        }
      });
  save_checkpoint(fs::path(c.out) / "final.ckpt", r.model, meta);
  std::cerr << "curriculum " << (r.curriculum_complete ? "complete" : "incomplete")
            << "; checkpoint " << (fs::path(c.out) / "final.ckpt").string() << "\n";
  return 0;
}

int run_eval(const Common& c, const std::string& checkpoint,
             const std::string& problems_path, const std::string& mode,
             double seconds, int max_attempts) {
  const EnvName env = parse_env_name(c.env);
  if (problems_path.empty()) throw UserError("--problems is required");
  const Model model = load_model(checkpoint, env);
  EvalOptions options;
  options.mode = parse_eval_mode(mode);
  options.seconds_per_problem = seconds;
  options.max_attempts = max_attempts;
  options.seed = c.seed;
  const EvalReport report =
      evaluate(model, env, load_problem_set(problems_path, env).problems(), options);
  emit(c.out, report.to_json());
  return 0;
}

int run_solve(const Common& c, const std::string& checkpoint,
              const std::string& term_text, const std::string& goal_text,
              const std::string& mode, double seconds) {
  const EnvName env = parse_env_name(c.env);
  if (term_text.empty()) throw UserError("--term is required");
  const Model model = load_model(checkpoint, env);
  const EnvSpec& spec = default_env(env);
  Problem p{"cli", parse_term(term_text, spec.signature), std::nullopt};
  if (!goal_text.empty()) {
    p.goal = parse_term(goal_text, spec.signature);
  } else if (env == EnvName::kPoly) {
    p.goal = poly_normalize(p.term);
  }
  EvalOptions options;
  options.mode = parse_eval_mode(mode);
  options.seconds_per_problem = seconds;
  options.seed = c.seed;
  const EvalReport report = evaluate(model, env, {p}, options);
  const ProblemOutcome& o = report.outcomes.front();
  if (!o.solved) {
    std::cout << "not solved after " << o.attempts << " attempt(s)\n";
    return 0;
  }
  EnvState s = reset(spec, p);
  std::cout << "0\t-\t" << print_term(s.term) << "\n";
  for (std::size_t i = 0; i < o.actions.size(); ++i) {
    const int a = o.actions[i];
    s = step(spec, s, a).next;
    std::cout << i + 1 << '\t' << a << ' ' << spec.actions[a].label << '\t'
              << print_term(s.term) << ' ' << print_path(s.cursor) << "\n";
  }
  return 0;
}

int run_lemmas(const Common& c, const std::string& checkpoint,
               const std::string& problems_path, double time_cap) {
  if (problems_path.empty()) throw UserError("--problems is required");
  const Model model = load_model(checkpoint, EnvName::kAim);
  std::string text;
  int unsound = 0;
  for (const auto& e : load_problem_set(problems_path, EnvName::kAim).entries) {
    for (const Lemma& l : emit_lemmas(model, e.problem, time_cap, c.seed)) {
      if (!verify_lemma(l)) {
        ++unsound;
        continue;
      }
      text += l.line() + "\n";
    }
  }
  if (!text.empty()) text.pop_back();
  emit(c.out, text);
  if (unsound) {
    std::cerr << unsound << " lemma(s) failed verification and were dropped\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Term-rewriting reinforcement-learning workbench"};
  app.require_subcommand(1);

  Common common;
  int count = 100, max_depth = 4, scramble_depth = 3;
  std::uint64_t value_cap = 100;
  std::string exclude;
  auto* gen = app.add_subcommand("gen", "Generate a problem file");
  add_common(gen, common, false);
  gen->add_option("--count", count, "Number of problems")->check(CLI::NonNegativeNumber);
  gen->add_option("--max-depth", max_depth, "Maximum term depth (ra, poly)");
  gen->add_option("--value-cap", value_cap, "Largest coefficient/exponent in goals (poly)");
  int min_scramble_depth = 0;
  gen->add_option("--scramble-depth", scramble_depth, "Scrambling rewrites (aim)");
  gen->add_option("--min-scramble-depth", min_scramble_depth,
                  "Draw each problem's depth from [min, scramble-depth] (aim)");
  gen->add_option("--exclude", exclude, "Problem file whose terms must not recur")
      ->check(CLI::ExistingFile);

  std::string problems, checkpoint;
  std::vector<std::string> overrides;
  int checkpoint_every = 1;
  auto* train_cmd = app.add_subcommand("train", "Train on a problem file");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--problems", problems, "Problem file (curriculum order)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--set", overrides, "Config override key=value (repeatable)");
  train_cmd->add_option("--checkpoint-every", checkpoint_every,
                        "Write <out>/epoch_<k>.ckpt every N epochs (0: final only)");

  std::string mode = "greedy";
  double seconds = 60.0;
  int max_attempts = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, common, false);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->check(CLI::ExistingFile);
  eval->add_option("--problems", problems, "Problem file")->check(CLI::ExistingFile);
  eval->add_option("--mode", mode, "greedy or budget");
  eval->add_option("--seconds", seconds, "Budget per problem (budget mode)");
  eval->add_option("--max-attempts", max_attempts, "Attempt cap per problem (0: none)");

  std::string term, goal;
  auto* solve = app.add_subcommand("solve", "Print a solving trace for one term");
  add_common(solve, common, false);
  solve->add_option("--checkpoint", checkpoint, "Checkpoint file")->check(CLI::ExistingFile);
  solve->add_option("--term", term, "Problem term as an s-expression");
  solve->add_option("--goal", goal, "Goal term (poly; defaults to the normal form)");
  solve->add_option("--mode", mode, "greedy or budget");
  solve->add_option("--seconds", seconds, "Budget (budget mode)");

  double time_cap = 1.0;
  auto* lemmas = app.add_subcommand("lemmas", "Export lemmas from model rewrites (aim)");
  add_common(lemmas, common, false);
  lemmas->add_option("--checkpoint", checkpoint, "Checkpoint file")->check(CLI::ExistingFile);
  lemmas->add_option("--problems", problems, "AIM problem file")->check(CLI::ExistingFile);
  lemmas->add_option("--time-cap", time_cap, "Seconds per problem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << app.help();
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      return run_gen(common, count, max_depth, value_cap, scramble_depth,
                     min_scramble_depth, exclude);
    }
    if (*train_cmd) {
      return run_train(common, problems, overrides,
                       train_cmd->count("--seed") > 0, checkpoint_every);
    }
    if (*eval) return run_eval(common, checkpoint, problems, mode, seconds, max_attempts);
    if (*solve) return run_solve(common, checkpoint, term, goal, mode, seconds);
    if (*lemmas) return run_lemmas(common, checkpoint, problems, time_cap);
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {  // parse, file and input errors
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
