#pragma once
// Model-free reference algorithms: Robinson-arithmetic evaluation, the LOPL
// fixed strategy, a canonical polynomial normalizer and difficulty scoring.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rwrl/envs.hpp"
#include "rwrl/term.hpp"

namespace rwrl {

// Value of a closed RA term. Throws std::overflow_error past 2^64-1.
std::uint64_t eval_ra(const Term& t);
Term numeral(std::uint64_t n);

struct LoplSolution {
  int steps = 0;             // rewrite steps
  std::vector<int> actions;  // replayable RA action ids, moves included
};

// Leftmost-innermost reduction with add_zero, add_succ, mul_zero, mul_succ.
// nullopt when more than `limit` rewrites would be needed.
std::optional<LoplSolution> lopl_solve(const Term& t, int limit);

// Polynomials over x, y, z with natural coefficients.
using Exponents = std::array<std::uint32_t, 3>;
// Descending graded-lex on exponent vectors (x > y > z).
struct GradedLexGreater {
  bool operator()(const Exponents& a, const Exponents& b) const;
};
using Polynomial = std::map<Exponents, std::uint64_t, GradedLexGreater>;

class ValueBoundExceeded : public std::range_error {
 public:
  using std::range_error::range_error;
};

struct PolyNormalization {
  Polynomial polynomial;
  Term term;
  int steps = 0;  // monomial-level operations performed
};

// Canonical form; throws ValueBoundExceeded when a coefficient or exponent
// in the result exceeds value_cap, std::domain_error for a non-ground
// exponent.
PolyNormalization poly_normalize_full(const Term& t,
                                      std::uint64_t value_cap = 100);
Term poly_normalize(const Term& t, std::uint64_t value_cap = 100);
Term polynomial_to_term(const Polynomial& p);
// Numeric value of a POLY term with x, y, z assigned; arithmetic mod 2^64.
std::uint64_t eval_poly(const Term& t, const std::array<std::uint64_t, 3>& xyz);

enum class DifficultyCategory { kLow, kMedium, kHigh };
const char* category_string(DifficultyCategory c);
DifficultyCategory parse_category(std::string_view s);

struct DifficultyThresholds {
  int low_below = 90;     // steps < 90 -> low
  int medium_upto = 130;  // 90 <= steps <= 130 -> medium
};

struct Difficulty {
  int steps = 0;
  DifficultyCategory category = DifficultyCategory::kLow;
  bool timed_out = false;
};

DifficultyCategory categorize(int steps, const DifficultyThresholds& th = {});
// RA: LOPL rewrite count; POLY: normalizer step count. Oracle failure
// (limit exceeded) is reported as high. Throws std::invalid_argument for AIM.
Difficulty difficulty(const Problem& problem, EnvName env,
                      int oracle_limit = 10000,
                      const DifficultyThresholds& th = {});

}  // namespace rwrl
