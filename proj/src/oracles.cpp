#include "rwrl/oracles.hpp"

#include <algorithm>
#include <limits>

namespace rwrl {

namespace {

constexpr int kActAddZero = 0;
constexpr int kActAddSucc = 2;
constexpr int kActMulZero = 4;
constexpr int kActMulSucc = 5;
constexpr int kActMoveLeft = 7;
constexpr int kActMoveRight = 8;

struct RaSymbols {
  Symbol zero, succ, plus, times;
};

const RaSymbols& ra() {
  static const RaSymbols s{ra_signature().find("0"), ra_signature().find("S"),
                           ra_signature().find("+"), ra_signature().find("*")};
  return s;
}

struct PolySymbols {
  Symbol zero, succ, plus, times, pow;
  std::array<Symbol, 3> vars;
};

const PolySymbols& poly() {
  const Signature& sig = poly_signature();
  static const PolySymbols s{sig.find("0"),
                             sig.find("S"),
                             sig.find("+"),
                             sig.find("*"),
                             sig.find("^"),
                             {sig.find("x"), sig.find("y"), sig.find("z")}};
  return s;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  if (a > std::numeric_limits<std::uint64_t>::max() - b) {
    throw std::overflow_error("RA value overflow");
  }
  return a + b;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    throw std::overflow_error("RA value overflow");
  }
  return a * b;
}

// One LOPL redex contraction at node t, or nullopt when t is not a redex.
std::optional<std::pair<Term, int>> contract(const Term& t) {
  const auto& s = ra();
  if (t.arity() != 2) return std::nullopt;
  const Term& a = t.child(0);
  const Term& b = t.child(1);
  if (t.symbol() == s.plus) {
    if (b.symbol() == s.zero) return std::pair{a, kActAddZero};
    if (b.symbol() == s.succ) {
      return std::pair{Term(s.succ, {Term(s.plus, {a, b.child(0)})}),
                       kActAddSucc};
    }
  } else if (t.symbol() == s.times) {
    if (b.symbol() == s.zero) return std::pair{Term(s.zero), kActMulZero};
    if (b.symbol() == s.succ) {
      return std::pair{Term(s.plus, {Term(s.times, {a, b.child(0)}), a}),
                       kActMulSucc};
    }
  }
  return std::nullopt;
}

// First redex in left-to-right post-order; that redex has no redex below it.
bool find_leftmost_innermost(const Term& t, Path& path) {
  for (std::size_t i = 0; i < t.arity(); ++i) {
    path.push_back(static_cast<int>(i));
    if (find_leftmost_innermost(t.child(i), path)) return true;
    path.pop_back();
  }
  return contract(t).has_value();
}

// --- polynomial arithmetic -------------------------------------------------

constexpr std::uint64_t kInternalCap = 1ULL << 40;

struct PolyContext {
  int steps = 0;
};

void guard(std::uint64_t v) {
  if (v > kInternalCap) {
    throw ValueBoundExceeded("intermediate polynomial value too large");
  }
}

Polynomial poly_add(const Polynomial& a, const Polynomial& b, PolyContext& ctx) {
  Polynomial out = a;
  for (const auto& [mono, coef] : b) {
    ++ctx.steps;
    auto& slot = out[mono];
    slot += coef;
    guard(slot);
  }
  return out;
}

Polynomial poly_mul(const Polynomial& a, const Polynomial& b, PolyContext& ctx) {
  Polynomial out;
  for (const auto& [ma, ca] : a) {
    for (const auto& [mb, cb] : b) {
      ++ctx.steps;
      Exponents m{};
      for (int i = 0; i < 3; ++i) {
        m[i] = ma[i] + mb[i];
        guard(m[i]);
      }
      guard(ca);
      guard(cb);
      auto& slot = out[m];
      slot += ca * cb;
      guard(slot);
    }
  }
  return out;
}

Polynomial constant_poly(std::uint64_t c) {
  Polynomial p;
  if (c != 0) p[Exponents{0, 0, 0}] = c;
  return p;
}

std::uint64_t as_constant(const Polynomial& p) {
  if (p.empty()) return 0;
  if (p.size() == 1 && p.begin()->first == Exponents{0, 0, 0}) {
    return p.begin()->second;
  }
  throw std::domain_error("exponent is not a ground numeral expression");
}

Polynomial expand(const Term& t, PolyContext& ctx) {
  const auto& s = poly();
  Symbol sym = t.symbol();
  if (sym == s.zero) return {};
  for (int i = 0; i < 3; ++i) {
    if (sym == s.vars[i]) {
      Exponents e{};
      e[i] = 1;
      return Polynomial{{e, 1}};
    }
  }
  if (sym == s.succ) {
    ++ctx.steps;
    return poly_add(expand(t.child(0), ctx), constant_poly(1), ctx);
  }
  if (sym == s.plus) {
    return poly_add(expand(t.child(0), ctx), expand(t.child(1), ctx), ctx);
  }
  if (sym == s.times) {
    return poly_mul(expand(t.child(0), ctx), expand(t.child(1), ctx), ctx);
  }
  if (sym == s.pow) {
    const Polynomial base = expand(t.child(0), ctx);
    const std::uint64_t exponent = as_constant(expand(t.child(1), ctx));
    guard(exponent);
    Polynomial acc = constant_poly(1);
    for (std::uint64_t i = 0; i < exponent; ++i) acc = poly_mul(acc, base, ctx);
    return acc;
  }
  throw std::invalid_argument("symbol '" + sym->name +
                              "' is not in the POLY signature");
}

Term product(std::vector<Term> factors) {
  const auto& s = poly();
  Term acc = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) {
    acc = Term(s.times, {acc, factors[i]});
  }
  return acc;
}

}  // namespace

Term numeral(std::uint64_t n) {
  Term t(ra().zero);
  for (std::uint64_t i = 0; i < n; ++i) t = Term(ra().succ, {t});
  return t;
}

std::uint64_t eval_ra(const Term& t) {
  const auto& s = ra();
  Symbol sym = t.symbol();
  if (sym == s.zero) return 0;
  if (sym == s.succ) return checked_add(eval_ra(t.child(0)), 1);
  if (sym == s.plus) return checked_add(eval_ra(t.child(0)), eval_ra(t.child(1)));
  if (sym == s.times) {
    return checked_mul(eval_ra(t.child(0)), eval_ra(t.child(1)));
  }
  throw std::invalid_argument("symbol '" + sym->name +
                              "' is not in the RA signature");
}

std::optional<LoplSolution> lopl_solve(const Term& t, int limit) {
  LoplSolution sol;
  Term cur = t;
  Path path;
  for (;;) {
    path.clear();
    if (!find_leftmost_innermost(cur, path)) return sol;
    if (sol.steps >= limit) return std::nullopt;
    const Term& redex = subterm_at(cur, path);
    auto [replacement, action] = *contract(redex);
    for (int idx : path) {
      sol.actions.push_back(idx == 0 ? kActMoveLeft : kActMoveRight);
    }
    sol.actions.push_back(action);
    cur = replace_at(cur, path, std::move(replacement));
    ++sol.steps;
  }
}

bool GradedLexGreater::operator()(const Exponents& a,
                                  const Exponents& b) const {
  const auto da = std::uint64_t{a[0]} + a[1] + a[2];
  const auto db = std::uint64_t{b[0]} + b[1] + b[2];
  if (da != db) return da > db;
  return a > b;
}

Term polynomial_to_term(const Polynomial& p) {
  const auto& s = poly();
  std::vector<Term> monomials;
  for (const auto& [mono, coef] : p) {
    if (coef == 0) continue;
    std::vector<Term> factors;
    const bool has_vars = mono[0] + mono[1] + mono[2] > 0;
    if (coef != 1 || !has_vars) factors.push_back(numeral(coef));
    for (int i = 0; i < 3; ++i) {
      if (mono[i] == 0) continue;
      Term var(s.vars[i]);
      factors.push_back(mono[i] == 1 ? var
                                     : Term(s.pow, {var, numeral(mono[i])}));
    }
    monomials.push_back(product(std::move(factors)));
  }
  if (monomials.empty()) return Term(s.zero);
  Term acc = monomials.front();
  for (std::size_t i = 1; i < monomials.size(); ++i) {
    acc = Term(s.plus, {acc, monomials[i]});
  }
  return acc;
}

PolyNormalization poly_normalize_full(const Term& t, std::uint64_t value_cap) {
  PolyContext ctx;
  Polynomial p = expand(t, ctx);
  for (auto it = p.begin(); it != p.end();) {
    if (it->second == 0) {
      it = p.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [mono, coef] : p) {
    if (coef > value_cap) {
      throw ValueBoundExceeded("coefficient " + std::to_string(coef) +
                               " exceeds cap " + std::to_string(value_cap));
    }
    for (auto e : mono) {
      if (e > value_cap) {
        throw ValueBoundExceeded("exponent " + std::to_string(e) +
                                 " exceeds cap " + std::to_string(value_cap));
      }
    }
  }
  Term term = polynomial_to_term(p);
  return PolyNormalization{std::move(p), std::move(term), ctx.steps};
}

Term poly_normalize(const Term& t, std::uint64_t value_cap) {
  return poly_normalize_full(t, value_cap).term;
}

std::uint64_t eval_poly(const Term& t,
                        const std::array<std::uint64_t, 3>& xyz) {
  const auto& s = poly();
  Symbol sym = t.symbol();
  if (sym == s.zero) return 0;
  for (int i = 0; i < 3; ++i) {
    if (sym == s.vars[i]) return xyz[i];
  }
  if (sym == s.succ) return eval_poly(t.child(0), xyz) + 1;
  if (sym == s.plus) return eval_poly(t.child(0), xyz) + eval_poly(t.child(1), xyz);
  if (sym == s.times) {
    return eval_poly(t.child(0), xyz) * eval_poly(t.child(1), xyz);
  }
  if (sym == s.pow) {
    const std::uint64_t base = eval_poly(t.child(0), xyz);
    std::uint64_t exponent = eval_poly(t.child(1), xyz);
    std::uint64_t result = 1;
    std::uint64_t sq = base;
    while (exponent) {
      if (exponent & 1) result *= sq;
      sq *= sq;
      exponent >>= 1;
    }
    return result;
  }
  throw std::invalid_argument("symbol '" + sym->name +
                              "' is not in the POLY signature");
}

const char* category_string(DifficultyCategory c) {
  switch (c) {
    case DifficultyCategory::kLow:
      return "low";
    case DifficultyCategory::kMedium:
      return "medium";
    case DifficultyCategory::kHigh:
      return "high";
  }
  return "?";
}

DifficultyCategory parse_category(std::string_view s) {
  if (s == "low") return DifficultyCategory::kLow;
  if (s == "medium") return DifficultyCategory::kMedium;
  if (s == "high") return DifficultyCategory::kHigh;
  throw std::invalid_argument("unknown difficulty category '" +
                              std::string(s) + "'");
}

DifficultyCategory categorize(int steps, const DifficultyThresholds& th) {
  if (steps < th.low_below) return DifficultyCategory::kLow;
  if (steps <= th.medium_upto) return DifficultyCategory::kMedium;
  return DifficultyCategory::kHigh;
}

Difficulty difficulty(const Problem& problem, EnvName env, int oracle_limit,
                      const DifficultyThresholds& th) {
  Difficulty d;
  switch (env) {
    case EnvName::kRA: {
      auto sol = lopl_solve(problem.term, oracle_limit);
      if (!sol) {
        d.steps = oracle_limit;
        d.timed_out = true;
        d.category = DifficultyCategory::kHigh;
        return d;
      }
      d.steps = sol->steps;
      break;
    }
    case EnvName::kPoly: {
      try {
        d.steps = poly_normalize_full(problem.term).steps;
      } catch (const ValueBoundExceeded&) {
        d.steps = oracle_limit;
        d.timed_out = true;
        d.category = DifficultyCategory::kHigh;
        return d;
      }
      if (d.steps > oracle_limit) {
        d.timed_out = true;
        d.category = DifficultyCategory::kHigh;
        return d;
      }
      break;
    }
    case EnvName::kAim:
      throw std::invalid_argument("no difficulty oracle for AIM problems");
  }
  d.category = categorize(d.steps, th);
  return d;
}

}  // namespace rwrl
