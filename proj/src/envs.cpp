#include "rwrl/envs.hpp"

#include <algorithm>
#include <array>
#include <mutex>
#include <set>

namespace rwrl {

namespace {

// Appendix 3 equations in listed order, pattern variables spelled ?name.
// Action 2i applies equation i left-to-right, action 2i+1 right-to-left.
struct EquationText {
  const char* name;
  const char* lhs;
  const char* rhs;
};

constexpr EquationText kAimEquations[] = {
    {"lid", "(* e ?x)", "?x"},
    {"rid", "(* ?x e)", "?x"},
    {"b1", "(\\ ?x (* ?x ?y))", "?y"},
    {"b2", "(* ?x (\\ ?x ?y))", "?y"},
    {"s1", "(/ (* ?x ?y) ?y)", "?x"},
    {"s2", "(* (/ ?x ?y) ?y)", "?x"},
    {"def_a", "(a ?x ?y ?z)", "(\\ (* ?x (* ?y ?z)) (* (* ?x ?y) ?z))"},
    {"def_K", "(K ?x ?y)", "(\\ (* ?y ?x) (* ?x ?y))"},
    {"def_T", "(T ?u ?x)", "(\\ ?x (* ?u ?x))"},
    {"def_L", "(L ?u ?x ?y)", "(\\ (* ?y ?x) (* ?y (* ?x ?u)))"},
    {"def_R", "(R ?u ?x ?y)", "(/ (* (* ?u ?x) ?y) (* ?x ?y))"},
    {"TT", "(T (T ?u ?x) ?y)", "(T (T ?u ?y) ?x)"},
    {"TL", "(T (L ?u ?x ?y) ?z)", "(L (T ?u ?z) ?x ?y)"},
    {"TR", "(T (R ?u ?x ?y) ?z)", "(R (T ?u ?z) ?x ?y)"},
    {"LR", "(L (R ?u ?x ?y) ?z ?w)", "(R (L ?u ?z ?w) ?x ?y)"},
    {"LL", "(L (L ?u ?x ?y) ?z ?w)", "(L (L ?u ?z ?w) ?x ?y)"},
    {"RR", "(R (R ?u ?x ?y) ?z ?w)", "(R (R ?u ?z ?w) ?x ?y)"},
    {"id1", "(/ ?y (\\ ?x ?y))", "?x"},
    {"id2", "(\\ (/ ?y ?x) ?y)", "?x"},
    {"id3", "(\\ e ?x)", "?x"},
    {"id4", "(/ ?x e)", "?x"},
    {"id5", "(\\ ?x ?x)", "e"},
    {"id6", "(/ ?x ?x)", "e"},
    {"prop_034cf5c5", "(* ?x (T ?y ?x))", "(* ?y ?x)"},
    {"prop_66f8dd43", "(T (/ ?x ?y) ?y)", "(\\ ?y ?x)"},
    {"prop_81894ca4", "(/ (* ?x (T ?y ?x)) ?x)", "?y"},
    {"prop_da4738e2", "(T ?x (\\ ?x ?y))", "(\\ (\\ ?x ?y) ?y)"},
    {"prop_4a90a23f", "(* ?x (T (T ?y ?x) ?z))", "(* (T ?y ?z) ?x)"},
    {"prop_73fa4877", "(T (T (/ ?x ?y) ?z) ?y)", "(T (\\ ?y ?x) ?z)"},
    {"prop_d10a3b1a", "(* (* ?x ?y) (L ?z ?y ?x))", "(* ?x (* ?y ?z))"},
    {"prop_293cbc16", "(L (\\ ?x ?y) ?x ?z)", "(\\ (* ?z ?x) (* ?z ?y))"},
    {"prop_55464ec9", "(* (R ?x ?y ?z) (* ?y ?z))", "(* (* ?x ?y) ?z)"},
    {"prop_61fb8127", "(R (/ ?x ?y) ?y ?z)", "(/ (* ?x ?z) (* ?y ?z))"},
    {"prop_ddd1c86f", "(* ?x (* (\\ ?x e) ?y))", "(L ?y (\\ ?x e) ?x)"},
    {"prop_0d7e7151", "(* (\\ ?x e) ?y)", "(\\ ?x (L ?y (\\ ?x e) ?x))"},
    {"prop_1aae4a83", "(* ?x (L (T ?y ?x) ?z ?w))", "(* (L ?y ?z ?w) ?x)"},
    {"prop_1db0183a", "(* ?x (R (T ?y ?x) ?z ?w))", "(* (R ?y ?z ?w) ?x)"},
    {"prop_a4abb1e0", "(T (R (/ ?x ?y) ?z ?w) ?y)", "(R (\\ ?y ?x) ?z ?w)"},
    {"prop_55842885", "(* (T (/ ?x ?y) ?z) ?y)", "(* ?y (T (\\ ?y ?x) ?z))"},
    {"prop_1a725917", "(\\ (* ?x ?y) (* ?x (* ?z ?y)))", "(L (T ?z ?y) ?y ?x)"},
    {"prop_c626af2d", "(T ?x (* ?x ?y))", "(L (T ?x ?y) ?y ?x)"},
    {"prop_526a359c", "(T (/ (* ?x ?y) (* ?z ?y)) ?z)", "(R (\\ ?z ?x) ?z ?y)"},
    {"prop_deeac89a", "(* (T (R ?x ?y ?z) ?w) (* ?y ?z))",
     "(* (* (T ?x ?w) ?y) ?z)"},
    {"prop_575d1ed9", "(R ?x (\\ ?x e) ?y)", "(/ ?y (* (\\ ?x e) ?y))"},
    {"prop_f338e359", "(* (/ e ?x) (* ?x ?y))", "(L ?y ?x (/ e ?x))"},
    {"prop_5a914e30", "(R ?x ?y (\\ ?y e))", "(* (* ?x ?y) (\\ ?y e))"},
    {"prop_cc8a9ae6", "(R ?x (/ e ?y) ?y)", "(* (* ?x (/ e ?y)) ?y)"},
    {"prop_c2aa8580", "(L (\\ ?x (\\ ?y ?z)) ?x ?y)", "(\\ (* ?y ?x) ?z)"},
    {"prop_b3890d2c", "(R (/ ?x ?y) ?y (\\ ?y e))", "(* ?x (\\ ?y e))"},
    {"prop_f14899ed", "(T (L (/ ?x ?y) ?z ?w) ?y)", "(L (\\ ?y ?x) ?z ?w)"},
    {"prop_f2b7d0ab", "(L (\\ ?x (T ?y ?z)) ?x ?z)", "(\\ (* ?z ?x) (* ?y ?z))"},
    {"prop_be6cad0a", "(R (/ (/ ?x ?y) ?z) ?z ?y)", "(/ ?x (* ?z ?y))"},
    {"prop_1e558562", "(L (/ (\\ ?x ?y) ?z) ?z ?x)",
     "(/ (* ?z (\\ (* ?x ?z) ?y)) ?z)"},
    {"prop_e9eef609", "(K (\\ ?x e) ?x)", "(* (\\ ?x e) ?x)"},
    {"prop_9ee87fb5", "(K ?x (/ e ?x))", "(* ?x (/ e ?x))"},
    {"prop_da958b3f", "(L (\\ ?x e) ?x ?y)", "(\\ (* ?y ?x) ?y)"},
    {"prop_c3fa51e8", "(R (/ e ?x) ?x ?y)", "(/ ?y (* ?x ?y))"},
    {"prop_ba6418d1", "(\\ (R (/ e ?x) ?x ?y) ?y)", "(* ?x ?y)"},
    {"prop_d7dd57dd", "(\\ (* ?x ?y) (* (* ?z ?x) ?y))",
     "(R (T ?z (* ?x ?y)) ?x ?y)"},
    {"prop_e1aa92db", "(* (* ?x ?y) (K ?y ?x))", "(* ?y ?x)"},
    {"prop_19fcac9b2", "(* (R (/ ?x ?y) ?z ?w) ?y)",
     "(* ?y (R (\\ ?y ?x) ?z ?w))"},
    {"prop_3d75df700", "(* (* ?x ?y) (R (\\ (* ?x ?y) ?y) ?z ?w))",
     "(* (* ?x (R (\\ ?x e) ?z ?w)) ?y)"},
    {"prop_acafcc6f0", "(L (R (\\ ?x (\\ ?y ?z)) ?w ?u) ?x ?y)",
     "(R (\\ (* ?y ?x) ?z) ?w ?u)"},
    {"prop_203fc9151", "(* ?x (* ?y (R (\\ ?y (\\ ?x ?y)) ?z ?w)))",
     "(* (* ?x (R (\\ ?x e) ?z ?w)) ?y)"},
    {"prop_2e844a2a9", "(* (* ?x ?y) (R (\\ (* ?x ?y) ?z) ?w ?u))",
     "(* ?x (* ?y (R (\\ ?y (\\ ?x ?z)) ?w ?u)))"},
    {"prop_d9f457e09", "(* (\\ ?x ?y) (R (\\ (\\ ?x ?y) ?y) ?z ?w))",
     "(* (R ?x ?z ?w) (\\ ?x ?y))"},
    {"prop_ce2987245", "(\\ ?x (R ?x ?y ?z))", "(* (R ?x ?y ?z) (\\ ?x e))"},
    {"prop_b7fe5fbfb", "(K (\\ ?x e) ?x)", "(\\ (/ e ?x) (\\ ?x e))"},
    {"prov9_7c96e347d4", "(R (T (/ e ?x) ?z) ?x ?y)",
     "(T (/ ?y (* ?x ?y)) ?z)"},
    {"prov9_3e047dc57d", "(\\ (R ?x (\\ ?x e) ?y) ?y)", "(* (\\ ?x e) ?y)"},
    {"prov9_ee78192c46", "(* (R ?x ?y ?x) (* ?y ?x))",
     "(* (* ?y ?x) (T ?x ?y))"},
    {"prov9_062c221162", "(T ?x ?y)", "(R (T ?x (* ?y ?x)) ?y ?x)"},
    {"prov9_d18167fcf7", "(* ?x (\\ (T ?x ?y) e))", "(\\ (T ?x ?y) ?x)"},
    {"prov9_6385279d78", "(/ (\\ ?x ?y) (/ ?y ?x))",
     "(* (/ e (/ ?y ?x)) (\\ ?x ?y))"},
    {"prov9_b192646899", "(* ?x (T (\\ ?x e) ?y))", "(K (\\ ?y (/ ?y ?x)) ?y)"},
    {"prov9_2e3bc568bd_alt1", "(* (K (\\ ?x (/ ?x (/ e ?y))) ?x) ?y)",
     "(T ?y ?x)"},
    {"prov9_1ffb5e2572", "(L (T (\\ ?x e) ?z) ?x ?y)",
     "(T (\\ (* ?y ?x) ?y) ?z)"},
    {"prov9_7fed2c3e64", "(* (* ?x ?y) (T (\\ (* ?x ?y) ?x) ?z))",
     "(* ?x (* ?y (T (\\ ?y e) ?z)))"},
    {"prov9_47e1e09ded", "(* (* ?x ?y) (T (\\ (* ?x ?y) ?y) ?z))",
     "(* (* ?x (T (\\ ?x e) ?z)) ?y)"},
    {"prov9_a06014c62d_com", "(* ?x (* ?x (T (\\ ?x e) ?y)))",
     "(* (* ?x (T (\\ ?x e) ?y)) ?x)"},
    {"prov9_a06014c62d", "(T ?x (* ?x (T (\\ ?x e) ?y)))", "?x"},
    {"prov9_49726cdcf0", "(T ?x (* (\\ ?x e) ?x))", "?x"},
    {"prov9_a69214de59", "(R ?x (\\ ?x e) ?x)", "(T ?x (\\ ?x e))"},
    {"prov9_3a3c9a39ee", "(\\ (T ?x (\\ ?x e)) e)", "(T (\\ ?x e) ?x)"},
    {"prov9_1cecad55d3", "(T ?x (/ e ?x))", "(\\ (\\ ?x e) e)"},
    {"prov9_13e5c8ed0a", "(T (/ e (/ e ?x)) (\\ ?x e))", "?x"},
    {"prov9_183b179b43", "(* (K ?x (\\ ?x e)) ?x)", "(T ?x (\\ ?x e))"},
};

constexpr int kAimEquationCount =
    static_cast<int>(sizeof(kAimEquations) / sizeof(kAimEquations[0]));
static_assert(kAimEquationCount == 87);

Symbol op(const char* name, int arity) {
  return intern_symbol(name, arity, SymbolKind::kOperator);
}
Symbol constant(const char* name) {
  return intern_symbol(name, 0, SymbolKind::kConstant);
}

RewriteRule rule_from_text(const Signature& sig, std::string id,
                           const char* lhs, const char* rhs,
                           Direction dir = Direction::kForward) {
  ParseOptions opts;
  opts.allow_pattern_variables = true;
  return RewriteRule{std::move(id), parse_term(lhs, sig, opts),
                     parse_term(rhs, sig, opts), dir};
}

Action rewrite_action(std::vector<RewriteRule> rules, bool resets_cursor) {
  Action a;
  a.kind = Action::Kind::kRewrite;
  a.rules = std::move(rules);
  a.resets_cursor = resets_cursor;
  for (const auto& r : a.rules) {
    if (!a.label.empty()) a.label += " | ";
    a.label += r.label();
  }
  return a;
}

Action move_action(int child) {
  Action a;
  a.kind = Action::Kind::kMove;
  a.child = child;
  a.label = "move " + std::to_string(child);
  return a;
}

// Appendix 1 actions 1-7 (shared by RA and POLY).
std::vector<Action> arithmetic_core(const Signature& sig) {
  const RewriteRule add0 = rule_from_text(sig, "add_zero", "(+ ?x 0)", "?x");
  const RewriteRule add_s =
      rule_from_text(sig, "add_succ", "(+ ?x (S ?y))", "(S (+ ?x ?y))");
  const RewriteRule mul0 = rule_from_text(sig, "mul_zero", "(* ?x 0)", "0");
  const RewriteRule mul_s =
      rule_from_text(sig, "mul_succ", "(* ?x (S ?y))", "(+ (* ?x ?y) ?x)");
  std::vector<Action> out;
  out.push_back(rewrite_action({add0}, true));
  out.push_back(rewrite_action({add0.reversed()}, true));
  out.push_back(rewrite_action({add_s}, true));
  out.push_back(rewrite_action({add_s.reversed()}, true));
  out.push_back(rewrite_action({mul0}, true));
  out.push_back(rewrite_action({mul_s}, true));
  out.push_back(rewrite_action({mul_s.reversed()}, true));
  return out;
}

std::vector<Action> ra_actions(const Signature& sig) {
  auto out = arithmetic_core(sig);
  out.push_back(move_action(0));
  out.push_back(move_action(1));
  return out;
}

std::vector<Action> poly_actions(const Signature& sig) {
  auto out = arithmetic_core(sig);
  out.push_back(move_action(0));
  out.push_back(move_action(1));
  auto r = [&](std::string id, const char* l, const char* rhs) {
    return rule_from_text(sig, std::move(id), l, rhs);
  };
  const RewriteRule add_comm = r("add_comm", "(+ ?x ?y)", "(+ ?y ?x)");
  const RewriteRule mul_comm = r("mul_comm", "(* ?x ?y)", "(* ?y ?x)");
  const RewriteRule pow0 = r("pow_zero", "(^ ?x 0)", "(S 0)");
  const RewriteRule pow_s = r("pow_succ", "(^ ?x (S ?y))", "(* (^ ?x ?y) ?x)");
  const RewriteRule add_assoc =
      r("add_assoc", "(+ (+ ?x ?y) ?z)", "(+ ?x (+ ?y ?z))");
  const RewriteRule mul_assoc =
      r("mul_assoc", "(* (* ?x ?y) ?z)", "(* ?x (* ?y ?z))");
  const RewriteRule distrib =
      r("distrib", "(* ?x (+ ?y ?z))", "(+ (* ?x ?y) (* ?x ?z))");
  const RewriteRule mul_one = r("mul_one", "(* ?x (S 0))", "?x");
  const RewriteRule one_pow = r("one_pow", "(^ (S 0) ?x)", "(S 0)");
  const RewriteRule pow_one = r("pow_one", "(^ ?x (S 0))", "?x");
  const RewriteRule pow_add =
      r("pow_add", "(^ ?x (+ ?y ?z))", "(* (^ ?x ?y) (^ ?x ?z))");
  const RewriteRule pow_mul =
      r("pow_mul", "(^ (* ?x ?y) ?z)", "(* (^ ?x ?z) (^ ?y ?z))");
  const RewriteRule pow_pow =
      r("pow_pow", "(^ (^ ?x ?y) ?z)", "(^ ?x (* ?y ?z))");

  out.push_back(rewrite_action({add_comm, mul_comm}, true));                 // 10
  out.push_back(rewrite_action({pow0}, true));                               // 11
  out.push_back(rewrite_action({pow_s}, true));                              // 12
  out.push_back(rewrite_action({pow_s.reversed()}, true));                   // 13
  out.push_back(rewrite_action({add_assoc, mul_assoc}, true));               // 14
  out.push_back(rewrite_action({add_assoc.reversed(), mul_assoc.reversed()},
                               true));                                       // 15
  out.push_back(rewrite_action({distrib}, true));                            // 16
  out.push_back(rewrite_action({distrib.reversed()}, true));                 // 17
  out.push_back(rewrite_action({mul_one}, true));                            // 18
  out.push_back(rewrite_action({mul_one.reversed()}, true));                 // 19
  out.push_back(rewrite_action({one_pow}, true));                            // 20
  out.push_back(rewrite_action({pow_one}, true));                            // 21
  out.push_back(rewrite_action({pow_one.reversed()}, true));                 // 22
  out.push_back(rewrite_action({pow_add}, true));                            // 23
  out.push_back(rewrite_action({pow_add.reversed()}, true));                 // 24
  out.push_back(rewrite_action({pow_mul}, true));                            // 25
  out.push_back(rewrite_action({pow_mul.reversed()}, true));                 // 26
  out.push_back(rewrite_action({pow_pow}, true));                            // 27
  out.push_back(rewrite_action({pow_pow.reversed()}, true));                 // 28
  return out;
}

std::vector<Action> aim_actions() {
  std::vector<Action> out;
  for (const NamedEquation& eq : aim_equations()) {
    RewriteRule fwd{eq.name, eq.lhs, eq.rhs, Direction::kForward};
    out.push_back(rewrite_action({fwd}, true));
    out.push_back(rewrite_action({fwd.reversed()}, true));
  }
  for (int c = 0; c < 3; ++c) out.push_back(move_action(c));
  return out;
}

bool only_numeral_nodes(const Term& t, Symbol zero, Symbol succ) {
  const Term* cur = &t;
  while (cur->symbol() == succ) cur = &cur->child(0);
  return cur->symbol() == zero;
}

const Term* rewrite_target(const EnvSpec& spec, const EnvState& s) {
  if (spec.name == EnvName::kAim && s.cursor.empty()) return nullptr;
  return &subterm_at(s.term, s.cursor);
}

// Index of the first alternative of `a` matching at the cursor, or -1.
int matching_rule(const EnvSpec& spec, const EnvState& s, const Action& a) {
  const Term* target = rewrite_target(spec, s);
  if (!target) return -1;
  for (std::size_t i = 0; i < a.rules.size(); ++i) {
    if (match(a.rules[i].from(), *target)) return static_cast<int>(i);
  }
  return -1;
}

void validate_signature(const Term& t, const Signature& sig) {
  if (!sig.contains(t.symbol())) {
    throw std::invalid_argument("symbol '" + t.symbol()->name +
                                "' is not in signature " + sig.name());
  }
  for (const Term& c : t.children()) validate_signature(c, sig);
}

void collect_fresh(const Term& t, std::set<int>& used) {
  const int idx = fresh_variable_index(t.symbol());
  if (idx >= 0) used.insert(idx);
  for (const Term& c : t.children()) collect_fresh(c, used);
}

}  // namespace

EnvName parse_env_name(std::string_view name) {
  if (name == "ra" || name == "RA") return EnvName::kRA;
  if (name == "poly" || name == "POLY") return EnvName::kPoly;
  if (name == "aim" || name == "AIM") return EnvName::kAim;
  throw std::invalid_argument("unknown environment '" + std::string(name) +
                              "' (expected ra, poly or aim)");
}

const char* env_name_string(EnvName name) {
  switch (name) {
    case EnvName::kRA:
      return "ra";
    case EnvName::kPoly:
      return "poly";
    case EnvName::kAim:
      return "aim";
  }
  return "?";
}

const char* outcome_string(Outcome o) {
  switch (o) {
    case Outcome::kOngoing:
      return "ongoing";
    case Outcome::kSolved:
      return "solved";
    case Outcome::kStepLimit:
      return "step-limit";
  }
  return "?";
}

const Signature& ra_signature() {
  static const Signature sig("RA",
                             {constant("0"), op("S", 1), op("+", 2), op("*", 2)},
                             false);
  return sig;
}

const Signature& poly_signature() {
  static const Signature sig("POLY",
                             {constant("0"), op("S", 1), op("+", 2), op("*", 2),
                              op("^", 2), constant("x"), constant("y"),
                              constant("z")},
                             false);
  return sig;
}

const Signature& aim_signature() {
  static const Signature sig(
      "AIM",
      {op("=", 2), op("*", 2), op("\\", 2), op("/", 2), constant("e"),
       op("T", 2), op("L", 3), op("R", 3), op("a", 3), op("K", 2),
       constant("x"), constant("y"), constant("z"), constant("u"),
       constant("v"), constant("w")},
      true, {{"1", "e"}});
  return sig;
}

const std::vector<NamedEquation>& aim_equations() {
  static const std::vector<NamedEquation> eqs = [] {
    std::vector<NamedEquation> out;
    ParseOptions opts;
    opts.allow_pattern_variables = true;
    for (const auto& e : kAimEquations) {
      out.push_back({e.name, parse_term(e.lhs, aim_signature(), opts),
                     parse_term(e.rhs, aim_signature(), opts)});
    }
    return out;
  }();
  return eqs;
}

int EnvSpec::move_action(int child) const {
  for (const Action& a : actions) {
    if (a.kind == Action::Kind::kMove && a.child == child) return a.id;
  }
  return -1;
}

EnvSpec make_env(EnvName name, EnvConfig config) {
  std::vector<Action> actions;
  const Signature* sig = nullptr;
  int limit = 0;
  std::size_t expected = 0;
  switch (name) {
    case EnvName::kRA:
      sig = &ra_signature();
      actions = ra_actions(*sig);
      limit = 100;
      expected = 9;
      break;
    case EnvName::kPoly:
      sig = &poly_signature();
      actions = poly_actions(*sig);
      limit = 100;
      expected = 28;
      break;
    case EnvName::kAim:
      sig = &aim_signature();
      actions = aim_actions();
      limit = 30;
      expected = 177;
      break;
  }
  if (actions.size() != expected) {
    throw std::logic_error("action table size mismatch");
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    actions[i].id = static_cast<int>(i);
    if (name != EnvName::kAim) {
      for (const auto& r : actions[i].rules) {
        if (!r.admissible()) {
          throw std::logic_error("inadmissible arithmetic rule " + r.label());
        }
      }
    }
  }
  if (config.step_limit > 0) limit = config.step_limit;
  if (config.step_limit < 0) throw std::invalid_argument("negative step limit");
  std::size_t size_cap = name == EnvName::kAim ? 400 : 0;
  if (config.max_term_size >= 0) size_cap = config.max_term_size;
  return EnvSpec{name, *sig, std::move(actions), limit, size_cap};
}

const EnvSpec& default_env(EnvName name) {
  static const EnvSpec ra = make_env(EnvName::kRA);
  static const EnvSpec poly = make_env(EnvName::kPoly);
  static const EnvSpec aim = make_env(EnvName::kAim);
  switch (name) {
    case EnvName::kRA:
      return ra;
    case EnvName::kPoly:
      return poly;
    case EnvName::kAim:
      return aim;
  }
  return ra;
}

EnvState reset(const EnvSpec& spec, const Problem& problem) {
  validate_signature(problem.term, spec.signature);
  if (spec.name == EnvName::kPoly && !problem.goal) {
    throw std::invalid_argument("POLY problem '" + problem.id +
                                "' has no goal term");
  }
  if (problem.goal) validate_signature(*problem.goal, spec.signature);
  if (spec.name == EnvName::kAim &&
      problem.term.symbol() != aim_signature().find("=")) {
    throw std::invalid_argument("AIM problem '" + problem.id +
                                "' must be an equation (= lhs rhs)");
  }
  return EnvState{problem.term, {}, 0, problem.id, problem.goal};
}

bool is_solved(const EnvSpec& spec, const EnvState& s) {
  switch (spec.name) {
    case EnvName::kRA: {
      static const Symbol zero = ra_signature().find("0");
      static const Symbol succ = ra_signature().find("S");
      return only_numeral_nodes(s.term, zero, succ);
    }
    case EnvName::kPoly:
      return s.goal && s.term == *s.goal;
    case EnvName::kAim:
      return s.term.arity() == 2 && s.term.child(0) == s.term.child(1);
  }
  return false;
}

bool is_legal(const EnvSpec& spec, const EnvState& s, int action) {
  if (action < 0 || action >= spec.action_count()) return false;
  const Action& a = spec.actions[action];
  if (a.kind == Action::Kind::kMove) {
    return static_cast<std::size_t>(a.child) <
           subterm_at(s.term, s.cursor).arity();
  }
  return matching_rule(spec, s, a) >= 0;
}

std::vector<int> legal_actions(const EnvSpec& spec, const EnvState& s) {
  std::vector<int> out;
  const Term& here = subterm_at(s.term, s.cursor);
  const Term* target = rewrite_target(spec, s);
  for (const Action& a : spec.actions) {
    if (a.kind == Action::Kind::kMove) {
      if (static_cast<std::size_t>(a.child) < here.arity()) out.push_back(a.id);
      continue;
    }
    if (!target) continue;
    for (const auto& r : a.rules) {
      if (match(r.from(), *target)) {
        out.push_back(a.id);
        break;
      }
    }
  }
  return out;
}

Bindings fresh_bindings_for(const RewriteRule& rule, const Term& term) {
  Bindings b;
  const auto extras = rule.extra_variables();
  if (extras.empty()) return b;
  std::set<int> used;
  collect_fresh(term, used);
  int next = 0;
  for (Symbol var : extras) {
    while (used.count(next)) ++next;
    b.bind(var, Term(fresh_variable(next)));
    used.insert(next);
  }
  return b;
}

StepResult step(const EnvSpec& spec, const EnvState& s, int action) {
  StepResult result{s, 0.0, false, Outcome::kOngoing, {}};
  if (is_solved(spec, s)) {
    result.reward = 1.0;
    result.done = true;
    result.outcome = Outcome::kSolved;
    return result;
  }
  if (action < 0 || action >= spec.action_count()) {
    throw IllegalAction("action id " + std::to_string(action) +
                        " out of range");
  }
  const Action& a = spec.actions[action];
  EnvState& next = result.next;
  if (a.kind == Action::Kind::kMove) {
    if (static_cast<std::size_t>(a.child) >=
        subterm_at(s.term, s.cursor).arity()) {
      throw IllegalAction("move to missing child " + std::to_string(a.child) +
                          " at " + print_path(s.cursor));
    }
    next.cursor.push_back(a.child);
  } else {
    const int which = matching_rule(spec, s, a);
    if (which < 0) {
      throw IllegalAction("rewrite action " + std::to_string(action) +
                          " does not apply at " + print_path(s.cursor));
    }
    const RewriteRule& rule = a.rules[which];
    result.introduced = fresh_bindings_for(rule, s.term);
    next.term = *rewrite_at(s.term, s.cursor, rule, result.introduced);
    if (a.resets_cursor) next.cursor.clear();
  }
  next.steps_taken = s.steps_taken + 1;
  if (is_solved(spec, next)) {
    result.reward = 1.0;
    result.done = true;
    result.outcome = Outcome::kSolved;
  } else if (next.steps_taken >= spec.step_limit ||
             (spec.max_term_size && next.term.size() > spec.max_term_size)) {
    result.done = true;
    result.outcome = Outcome::kStepLimit;
  }
  return result;
}

StepResult replay(const EnvSpec& spec, const Problem& problem,
                  std::span<const int> actions) {
  EnvState s = reset(spec, problem);
  StepResult last{s, 0.0, false, Outcome::kOngoing, {}};
  if (is_solved(spec, s)) {
    last.reward = 1.0;
    last.done = true;
    last.outcome = Outcome::kSolved;
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (last.done) throw ReplayError("episode already finished", i);
    if (!is_legal(spec, last.next, actions[i])) {
      throw ReplayError("illegal action " + std::to_string(actions[i]), i);
    }
    last = step(spec, last.next, actions[i]);
  }
  return last;
}

}  // namespace rwrl
