#pragma once
// The three rewriting environments (Robinson arithmetic, polynomial
// arithmetic, AIM loop theory) behind one contract: a fixed ordered action
// table, a cursor, sparse terminal reward and a step limit.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rwrl/term.hpp"

namespace rwrl {

enum class EnvName { kRA, kPoly, kAim };

EnvName parse_env_name(std::string_view name);  // "ra" | "poly" | "aim"
const char* env_name_string(EnvName name);

struct Action {
  enum class Kind { kRewrite, kMove };
  int id = 0;
  Kind kind = Kind::kRewrite;
  // Alternatives tried in order; the first whose lhs matches is applied.
  std::vector<RewriteRule> rules;
  int child = -1;  // move target for kMove
  bool resets_cursor = false;
  std::string label;
};

struct EnvConfig {
  // <= 0 selects the environment default (RA 100, POLY 100, AIM 30).
  int step_limit = 0;
  // Episodes whose term grows past this many nodes are truncated like a
  // step-limit hit. < 0 selects the default (AIM 400, otherwise unlimited);
  // 0 disables the cap.
  int max_term_size = -1;
};

struct EnvSpec {
  EnvName name;
  Signature signature;
  std::vector<Action> actions;
  int step_limit;
  std::size_t max_term_size = 0;  // 0: unlimited

  int action_count() const { return static_cast<int>(actions.size()); }
  // Id of the move action to child i, or -1.
  int move_action(int child) const;
};

struct Problem {
  std::string id;
  Term term;
  std::optional<Term> goal;
};

struct EnvState {
  Term term;
  Path cursor;
  int steps_taken = 0;
  std::string problem_id;
  std::optional<Term> goal;
};

enum class Outcome { kOngoing, kSolved, kStepLimit };
const char* outcome_string(Outcome o);

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
  Outcome outcome = Outcome::kOngoing;
  // Fresh variables bound by the rewrite (AIM only), for trace recording.
  Bindings introduced;
};

class IllegalAction : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ReplayError : public std::runtime_error {
 public:
  ReplayError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (action index " + std::to_string(index) +
                           ")"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

EnvSpec make_env(EnvName name, EnvConfig config = {});
const EnvSpec& default_env(EnvName name);  // cached make_env(name, {})

// Throws std::invalid_argument on a signature mismatch or a missing POLY goal.
EnvState reset(const EnvSpec& spec, const Problem& problem);
bool is_solved(const EnvSpec& spec, const EnvState& s);
std::vector<int> legal_actions(const EnvSpec& spec, const EnvState& s);
bool is_legal(const EnvSpec& spec, const EnvState& s, int action);
// Throws IllegalAction when `action` is not legal in s.
StepResult step(const EnvSpec& spec, const EnvState& s, int action);
// Folds step over actions. Throws ReplayError for an illegal action or for
// actions left over after the episode finished.
StepResult replay(const EnvSpec& spec, const Problem& problem,
                  std::span<const int> actions);

// Fresh-variable bindings the env would use for `rule` applied anywhere in
// `term`: extra variables get v<k>, v<k+1>, ... with k the smallest index
// not present in term.
Bindings fresh_bindings_for(const RewriteRule& rule, const Term& term);

// The AIM table's underlying equations, in action order.
struct NamedEquation {
  std::string name;
  Term lhs;
  Term rhs;
};
const std::vector<NamedEquation>& aim_equations();

const Signature& ra_signature();
const Signature& poly_signature();
const Signature& aim_signature();

}  // namespace rwrl
