#pragma once
// Problem generation, problem files, evaluation and lemma export.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rwrl/envs.hpp"
#include "rwrl/neural.hpp"
#include "rwrl/oracles.hpp"

namespace rwrl {

struct ProblemEntry {
  Problem problem;
  std::optional<Difficulty> difficulty;
  std::optional<std::vector<int>> solution;  // replayable action ids
};

struct ProblemSet {
  EnvName env = EnvName::kRA;
  std::vector<ProblemEntry> entries;

  std::vector<Problem> problems() const;
  std::size_t size() const { return entries.size(); }
};

struct GenerateOptions {
  // Reject problems whose known solution (moves included) is longer than
  // this; 0 selects the environment step limit.
  int max_solution_steps = 0;
  // Terms already used elsewhere (e.g. a training set) are not generated.
  std::vector<Term> exclude;
  // AIM: each problem's scramble depth is drawn uniformly from
  // [min_scramble_depth, scramble_depth]; 0 means exactly scramble_depth.
  int min_scramble_depth = 0;
};

// Sets come out sorted by ascending oracle difficulty (stable), ready to be
// cut into curriculum levels. Terms within a set are distinct.
ProblemSet generate_ra(int count, int max_depth, std::uint64_t seed,
                       const GenerateOptions& options = {});
ProblemSet generate_poly(int count, int max_depth, std::uint64_t value_cap,
                         std::uint64_t seed,
                         const GenerateOptions& options = {});
// t = t over a random loop term, then `scramble_depth` random rewrites of
// one side, each checked to be undone exactly by the paired action.
ProblemSet generate_aim(int count, int scramble_depth, std::uint64_t seed,
                        const GenerateOptions& options = {});

// Problem TSV: `# env=<name>` header, then `<id> TAB <term> [TAB <goal>]`
// with optional `@difficulty=<category>:<steps>` and `@solution=<a,b,...>`
// columns. Read errors throw std::runtime_error naming the line.
void write_problem_set(std::ostream& out, const ProblemSet& set);
ProblemSet read_problem_set(std::istream& in,
                            std::optional<EnvName> env = std::nullopt);
void save_problem_set(const std::filesystem::path& path, const ProblemSet& set);
ProblemSet load_problem_set(const std::filesystem::path& path,
                            std::optional<EnvName> env = std::nullopt);

enum class EvalMode { kGreedyOnce, kBudgetSampled };
EvalMode parse_eval_mode(std::string_view s);  // "greedy" | "budget"
const char* eval_mode_string(EvalMode m);

struct EvalOptions {
  EvalMode mode = EvalMode::kGreedyOnce;
  double seconds_per_problem = 60.0;  // budget-sampled only
  int max_attempts = 0;               // budget-sampled cap; 0: unlimited
  double noise = 0.05;
  std::uint64_t seed = 1;
  int step_limit = 0;  // 0: environment default
};

struct ProblemOutcome {
  std::string id;
  bool solved = false;
  int attempts = 0;
  double seconds = 0.0;
  std::vector<int> actions;  // the solving trace, when solved
};

struct EvalReport {
  EvalMode mode = EvalMode::kGreedyOnce;
  int n = 0;
  int solved = 0;
  double rate = 0.0;
  double seconds_per_problem = 0.0;  // configured budget (0 for greedy)
  double wall_time = 0.0;
  std::map<int, int> attempts_histogram;  // attempts-to-solve -> count
  std::vector<ProblemOutcome> outcomes;

  std::string to_json() const;
};

// Throws std::invalid_argument for an empty problem set or a model trained
// for another environment.
EvalReport evaluate(const Model& model, EnvName env,
                    const std::vector<Problem>& problems,
                    const EvalOptions& options = {});

struct LemmaStep {
  Path path;  // relative to the side
  int action = 0;
  Bindings introduced;
};

struct Lemma {
  int side = 0;  // 0: lhs, 1: rhs of the goal equation
  Term before;
  Term after;
  std::vector<LemmaStep> trace;

  std::string line() const;  // "(= before after)"
};

// Runs the greedy policy on an AIM goal for at most `time_cap` seconds (and
// the step limit) and relates each changed side to its rewritten form.
std::vector<Lemma> emit_lemmas(const Model& model, const Problem& problem,
                               double time_cap = 1.0, std::uint64_t seed = 1);

// Re-derives `after` from `before` by applying the recorded rewrites with
// the AIM rule table; true iff every step applies and the result matches.
bool verify_lemma(const Lemma& lemma);

}  // namespace rwrl
