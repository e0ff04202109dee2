#include "rwrl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "rwrl/training.hpp"

namespace rwrl {

namespace {

using TermSet = std::unordered_set<Term, TermHash>;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int effective_limit(EnvName env, int requested) {
  return requested > 0 ? requested : default_env(env).step_limit;
}

// Rejection sampling guard: generators give up instead of spinning.
void check_budget(long long tries, int count, const char* what) {
  if (tries > 2000LL * (count + 10)) {
    throw std::runtime_error(std::string("could not generate enough ") + what +
                             " problems; relax the parameters");
  }
}

void finish(ProblemSet& set, const char* prefix,
            const std::vector<int>& sort_key) {
  std::vector<std::size_t> order(set.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sort_key[a] < sort_key[b];
  });
  std::vector<ProblemEntry> sorted;
  sorted.reserve(order.size());
  for (std::size_t i : order) sorted.push_back(std::move(set.entries[i]));
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    sorted[i].problem.id = prefix + std::to_string(i);
  }
  set.entries = std::move(sorted);
}

Term random_ra(std::mt19937_64& rng, int depth, bool root) {
  const Signature& sig = ra_signature();
  if (depth <= 1) return Term(sig.find("0"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  if (root || r < 0.45) {
    const char* op = (root ? u(rng) < 0.5 : r < 0.25) ? "+" : "*";
    return Term(sig.find(op), {random_ra(rng, depth - 1, false),
                               random_ra(rng, depth - 1, false)});
  }
  if (r < 0.85) return Term(sig.find("S"), {random_ra(rng, depth - 1, false)});
  return Term(sig.find("0"));
}

Term small_numeral(const Signature& sig, int n) {
  Term t(sig.find("0"));
  for (int i = 0; i < n; ++i) t = Term(sig.find("S"), {t});
  return t;
}

Term random_poly(std::mt19937_64& rng, int depth, bool root) {
  const Signature& sig = poly_signature();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto leaf = [&]() {
    static const char* names[] = {"x", "y", "z", "0"};
    const double r = u(rng);
    if (r < 0.2) return small_numeral(sig, 1 + static_cast<int>(rng() % 2));
    return Term(sig.find(names[rng() % 4]));
  };
  if (depth <= 1) return leaf();
  const double r = u(rng);
  if (root || r < 0.6) {
    const double o = u(rng);
    if (o < 0.15) {
      return Term(sig.find("^"), {random_poly(rng, depth - 1, false),
                                  small_numeral(sig, static_cast<int>(rng() % 3))});
    }
    const char* op = o < 0.6 ? "+" : "*";
    return Term(sig.find(op), {random_poly(rng, depth - 1, false),
                               random_poly(rng, depth - 1, false)});
  }
  if (r < 0.75) return Term(sig.find("S"), {random_poly(rng, depth - 1, false)});
  return leaf();
}

Term random_loop(std::mt19937_64& rng, int depth) {
  const Signature& sig = aim_signature();
  static const char* leaves[] = {"x", "y", "z", "e"};
  static const char* ops[] = {"*", "\\", "/"};
  if (depth <= 0 || rng() % 3 == 0) return Term(sig.find(leaves[rng() % 4]));
  return Term(sig.find(ops[rng() % 3]),
              {random_loop(rng, depth - 1), random_loop(rng, depth - 1)});
}

Path prefixed(int side, const Path& p) {
  Path out{side};
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Cursor moves from the root to `path`, then `action`.
void append_targeted(const EnvSpec& env, const Path& path, int action,
                     std::vector<int>& out) {
  for (int c : path) out.push_back(env.move_action(c));
  out.push_back(action);
}

// The env's rewrite for `action` at `path`, without step's solved-state
// short-circuit (scrambling starts from a solved equation).
std::optional<Term> apply_action(const EnvSpec& env, const Term& t,
                                 const Path& path, int action) {
  const Term& target = subterm_at(t, path);
  for (const RewriteRule& rule : env.actions[action].rules) {
    if (!match(rule.from(), target)) continue;
    return rewrite_at(t, path, rule, fresh_bindings_for(rule, t));
  }
  return std::nullopt;
}

}  // namespace

std::vector<Problem> ProblemSet::problems() const {
  std::vector<Problem> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.problem);
  return out;
}

ProblemSet generate_ra(int count, int max_depth, std::uint64_t seed,
                       const GenerateOptions& options) {
  if (max_depth < 2) {
    throw std::invalid_argument("generate_ra: max_depth must be at least 2");
  }
  const int limit = effective_limit(EnvName::kRA, options.max_solution_steps);
  std::mt19937_64 rng(seed);
  TermSet seen(options.exclude.begin(), options.exclude.end());
  ProblemSet set{EnvName::kRA, {}};
  std::vector<int> key;
  std::uniform_int_distribution<int> depth_pick(2, max_depth);
  for (long long tries = 0; static_cast<int>(set.size()) < count; ++tries) {
    check_budget(tries, count, "RA");
    Term t = random_ra(rng, depth_pick(rng), true);
    if (seen.count(t)) continue;
    const auto sol = lopl_solve(t, limit);
    if (!sol || static_cast<int>(sol->actions.size()) > limit) continue;
    seen.insert(t);
    Problem p{"", t, {}};
    ProblemEntry e{p, difficulty(p, EnvName::kRA), sol->actions};
    key.push_back(e.difficulty->steps);
    set.entries.push_back(std::move(e));
  }
  finish(set, "ra", key);
  return set;
}

ProblemSet generate_poly(int count, int max_depth, std::uint64_t value_cap,
                         std::uint64_t seed, const GenerateOptions& options) {
  if (max_depth < 2) {
    throw std::invalid_argument("generate_poly: max_depth must be at least 2");
  }
  std::mt19937_64 rng(seed);
  TermSet seen(options.exclude.begin(), options.exclude.end());
  ProblemSet set{EnvName::kPoly, {}};
  std::vector<int> key;
  std::uniform_int_distribution<int> depth_pick(2, max_depth);
  for (long long tries = 0; static_cast<int>(set.size()) < count; ++tries) {
    check_budget(tries, count, "POLY");
    Term t = random_poly(rng, depth_pick(rng), true);
    if (seen.count(t)) continue;
    std::optional<Term> goal;
    try {
      goal = poly_normalize(t, value_cap);
    } catch (const ValueBoundExceeded&) {
      continue;
    }
    if (*goal == t) continue;
    seen.insert(t);
    Problem p{"", t, goal};
    ProblemEntry e{p, difficulty(p, EnvName::kPoly), std::nullopt};
    key.push_back(e.difficulty->steps);
    set.entries.push_back(std::move(e));
  }
  finish(set, "poly", key);
  return set;
}

ProblemSet generate_aim(int count, int scramble_depth, std::uint64_t seed,
                        const GenerateOptions& options) {
  if (scramble_depth < 1) {
    throw std::invalid_argument("generate_aim: scramble_depth must be >= 1");
  }
  constexpr std::size_t kMaxSideSize = 25;
  const EnvSpec& env = default_env(EnvName::kAim);
  const int limit = effective_limit(EnvName::kAim, options.max_solution_steps);
  const Symbol eq = aim_signature().find("=");
  std::mt19937_64 rng(seed);
  TermSet seen(options.exclude.begin(), options.exclude.end());
  ProblemSet set{EnvName::kAim, {}};
  std::vector<int> key;

  const int lo = options.min_scramble_depth > 0
                     ? std::min(options.min_scramble_depth, scramble_depth)
                     : scramble_depth;
  std::uniform_int_distribution<int> depth_pick(lo, scramble_depth);

  struct Move {
    Path path;  // full path, side first
    int action;
  };

  for (long long tries = 0; static_cast<int>(set.size()) < count; ++tries) {
    check_budget(tries, count, "AIM");
    const int depth = depth_pick(rng);
    const Term base = random_loop(rng, 2);
    Term cur(eq, {base, base});
    std::vector<Term> chain{cur};
    std::vector<Move> scramble;
    bool ok = true;
    for (int k = 0; k < depth && ok; ++k) {
      const int side = static_cast<int>(rng() % 2);
      // Group candidate positions by action so that catch-all patterns do
      // not dominate the draw.
      std::map<int, std::vector<Path>> by_action;
      for (const Path& p : all_paths(cur.child(side))) {
        const Path full = prefixed(side, p);
        for (int a : legal_actions(env, EnvState{cur, full, 0, "", {}})) {
          if (env.actions[a].kind == Action::Kind::kRewrite) {
            by_action[a].push_back(full);
          }
        }
      }
      std::vector<std::pair<int, Path>> candidates;
      for (auto& [a, paths] : by_action) {
        candidates.emplace_back(a, paths[rng() % paths.size()]);
      }
      std::shuffle(candidates.begin(), candidates.end(), rng);
      ok = false;
      for (const auto& [a, full] : candidates) {
        const Term next = *apply_action(env, cur, full, a);
        if (next.child(side).size() > kMaxSideSize) continue;
        if (next.child(0) == next.child(1)) continue;
        if (std::find(chain.begin(), chain.end(), next) != chain.end()) continue;
        // The paired action must restore the previous term exactly.
        const int inverse = a ^ 1;
        const auto back = apply_action(env, next, full, inverse);
        if (!back || *back != cur) continue;
        scramble.push_back(Move{full, inverse});
        cur = next;
        chain.push_back(cur);
        ok = true;
        break;
      }
    }
    if (!ok || seen.count(cur)) continue;
    std::vector<int> solution;
    for (auto it = scramble.rbegin(); it != scramble.rend(); ++it) {
      append_targeted(env, it->path, it->action, solution);
    }
    if (static_cast<int>(solution.size()) > limit) continue;
    Problem p{"", cur, {}};
    if (replay(env, p, solution).outcome != Outcome::kSolved) {
      throw std::logic_error("generated AIM solution does not replay: " +
                             print_term(cur));
    }
    seen.insert(cur);
    key.push_back(static_cast<int>(solution.size()));
    set.entries.push_back(ProblemEntry{p, std::nullopt, std::move(solution)});
  }
  finish(set, "aim", key);
  return set;
}

// ---------------------------------------------------------------- files

void write_problem_set(std::ostream& out, const ProblemSet& set) {
  out << "# env=" << env_name_string(set.env) << "\n";
  for (const auto& e : set.entries) {
    out << e.problem.id << '\t' << print_term(e.problem.term);
    if (e.problem.goal) out << '\t' << print_term(*e.problem.goal);
    if (e.difficulty) {
      out << "\t@difficulty=" << category_string(e.difficulty->category) << ':'
          << e.difficulty->steps << (e.difficulty->timed_out ? ":timeout" : "");
    }
    if (e.solution) {
      out << "\t@solution=";
      for (std::size_t i = 0; i < e.solution->size(); ++i) {
        out << (i ? "," : "") << (*e.solution)[i];
      }
    }
    out << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad integer '" + s + "'");
  return v;
}

}  // namespace

ProblemSet read_problem_set(std::istream& in, std::optional<EnvName> env) {
  ProblemSet set;
  std::optional<EnvName> header;
  std::string line;
  std::vector<std::string> pending;
  std::vector<int> line_numbers;
  std::unordered_set<std::string> ids;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("env=");
      if (pos != std::string::npos && !header) {
        header = parse_env_name(line.substr(pos + 4));
      }
      continue;
    }
    pending.push_back(line);
    line_numbers.push_back(number);
  }
  if (env && header && *env != *header) {
    throw std::runtime_error(std::string("problem file is for env ") +
                             env_name_string(*header) + ", expected " +
                             env_name_string(*env));
  }
  if (!env && !header) {
    throw std::runtime_error("problem file has no '# env=' header");
  }
  set.env = env ? *env : *header;
  const EnvSpec& spec = default_env(set.env);
  for (std::size_t i = 0; i < pending.size(); ++i) {
    const std::string where = "line " + std::to_string(line_numbers[i]) + ": ";
    try {
      const auto cols = split(pending[i], '\t');
      if (cols.size() < 2) throw std::runtime_error("expected id TAB term");
      ProblemEntry e{Problem{cols[0], parse_term(cols[1], spec.signature), {}},
                     std::nullopt, std::nullopt};
      for (std::size_t c = 2; c < cols.size(); ++c) {
        const std::string& col = cols[c];
        if (col.rfind("@difficulty=", 0) == 0) {
          const auto parts = split(col.substr(12), ':');
          if (parts.size() < 2) throw std::runtime_error("bad difficulty");
          Difficulty d;
          d.category = parse_category(parts[0]);
          d.steps = parse_int(parts[1]);
          d.timed_out = parts.size() > 2 && parts[2] == "timeout";
          e.difficulty = d;
        } else if (col.rfind("@solution=", 0) == 0) {
          std::vector<int> actions;
          for (const auto& a : split(col.substr(10), ',')) {
            if (!a.empty()) actions.push_back(parse_int(a));
          }
          e.solution = std::move(actions);
        } else if (c == 2) {
          e.problem.goal = parse_term(col, spec.signature);
        } else {
          throw std::runtime_error("unexpected column '" + col + "'");
        }
      }
      if (!ids.insert(e.problem.id).second) {
        throw std::runtime_error("duplicate id '" + e.problem.id + "'");
      }
      set.entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw std::runtime_error(where + ex.what());
    }
  }
  return set;
}

void save_problem_set(const std::filesystem::path& path, const ProblemSet& set) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_problem_set(out, set);
}

ProblemSet load_problem_set(const std::filesystem::path& path,
                            std::optional<EnvName> env) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_problem_set(in, env);
}

// ----------------------------------------------------------- evaluation

EvalMode parse_eval_mode(std::string_view s) {
  if (s == "greedy" || s == "greedy-once") return EvalMode::kGreedyOnce;
  if (s == "budget" || s == "budget-sampled") return EvalMode::kBudgetSampled;
  throw std::invalid_argument("unknown eval mode '" + std::string(s) +
                              "' (expected greedy or budget)");
}

const char* eval_mode_string(EvalMode m) {
  return m == EvalMode::kGreedyOnce ? "greedy-once" : "budget-sampled";
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["mode"] = eval_mode_string(mode);
  j["n"] = n;
  j["solved"] = solved;
  j["rate"] = rate;
  j["seconds_per_problem"] = seconds_per_problem;
  j["wall_time"] = wall_time;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, v] : attempts_histogram) hist[std::to_string(k)] = v;
  j["attempts_histogram"] = hist;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& o : outcomes) {
    per.push_back({{"id", o.id},
                   {"solved", o.solved},
                   {"attempts", o.attempts},
                   {"seconds", o.seconds},
                   {"actions", o.actions}});
  }
  j["outcomes"] = per;
  return j.dump();
}

EvalReport evaluate(const Model& model, EnvName env_name,
                    const std::vector<Problem>& problems,
                    const EvalOptions& options) {
  if (problems.empty()) {
    throw std::invalid_argument("evaluate: empty problem set");
  }
  if (model.config().env != env_name) {
    throw std::invalid_argument(std::string("evaluate: model is for env ") +
                                env_name_string(model.config().env) +
                                ", problems are " + env_name_string(env_name));
  }
  const EnvSpec env = make_env(env_name, EnvConfig{options.step_limit});
  const auto start = Clock::now();
  EvalReport report;
  report.mode = options.mode;
  report.n = static_cast<int>(problems.size());
  report.seconds_per_problem =
      options.mode == EvalMode::kBudgetSampled ? options.seconds_per_problem : 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const auto t0 = Clock::now();
    ProblemOutcome o{problems[i].id, false, 0, 0.0, {}};
    if (options.mode == EvalMode::kGreedyOnce) {
      std::mt19937_64 rng(derive_seed(options.seed, i, 0));
      const Episode e = collect_episode(env, problems[i], model,
                                        ActionMode::kGreedy, 0.0, rng);
      o.attempts = 1;
      o.solved = e.solved();
      if (o.solved) o.actions = e.actions();
    } else {
      std::mt19937_64 rng(derive_seed(options.seed, i, 1));
      do {
        const Episode e = collect_episode(env, problems[i], model,
                                          ActionMode::kSample, options.noise, rng);
        ++o.attempts;
        if (e.solved()) {
          o.solved = true;
          o.actions = e.actions();
        }
      } while (!o.solved && seconds_since(t0) < options.seconds_per_problem &&
               (options.max_attempts <= 0 || o.attempts < options.max_attempts));
    }
    o.seconds = seconds_since(t0);
    if (o.solved) {
      ++report.solved;
      ++report.attempts_histogram[o.attempts];
    }
    report.outcomes.push_back(std::move(o));
  }
  report.rate = static_cast<double>(report.solved) / report.n;
  report.wall_time = seconds_since(start);
  return report;
}

// --------------------------------------------------------------- lemmas

std::string Lemma::line() const {
  return "(= " + print_term(before) + " " + print_term(after) + ")";
}

std::vector<Lemma> emit_lemmas(const Model& model, const Problem& problem,
                               double time_cap, std::uint64_t seed) {
  if (model.config().env != EnvName::kAim) {
    throw std::invalid_argument("emit_lemmas: needs an AIM model");
  }
  const EnvSpec& env = default_env(EnvName::kAim);
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  const EpisodeContext ctx(rng());
  EnvState s = reset(env, problem);
  std::vector<LemmaStep> traces[2];
  bool done = is_solved(env, s);
  while (!done && seconds_since(start) < time_cap) {
    const auto legal = legal_actions(env, s);
    if (legal.empty()) break;
    const int a = argmax_action(policy_forward(model, s, ctx, legal).probs, legal);
    StepResult r = step(env, s, a);
    if (env.actions[a].kind == Action::Kind::kRewrite) {
      const int side = s.cursor.front();
      traces[side].push_back(LemmaStep{Path(s.cursor.begin() + 1, s.cursor.end()),
                                       a, r.introduced});
    }
    done = r.done;
    s = std::move(r.next);
  }
  std::vector<Lemma> out;
  for (int side = 0; side < 2; ++side) {
    const Term& before = problem.term.child(side);
    const Term& after = s.term.child(side);
    if (traces[side].empty() || before == after) continue;
    out.push_back(Lemma{side, before, after, std::move(traces[side])});
  }
  return out;
}

bool verify_lemma(const Lemma& lemma) {
  const EnvSpec& env = default_env(EnvName::kAim);
  Term t = lemma.before;
  for (const LemmaStep& st : lemma.trace) {
    if (st.action < 0 || st.action >= env.action_count()) return false;
    const Action& a = env.actions[st.action];
    if (a.kind != Action::Kind::kRewrite || !is_valid_path(t, st.path)) {
      return false;
    }
    std::optional<Term> next;
    for (const RewriteRule& rule : a.rules) {
      // Only the rule's extra variables may be supplied from outside.
      const auto extras = rule.extra_variables();
      bool bindings_ok = st.introduced.size() == extras.size();
      for (Symbol v : extras) bindings_ok = bindings_ok && st.introduced.find(v);
      if (!bindings_ok) continue;
      next = rewrite_at(t, st.path, rule, st.introduced);
      if (next) break;
    }
    if (!next) return false;
    t = *next;
  }
  return t == lemma.after;
}

}  // namespace rwrl
