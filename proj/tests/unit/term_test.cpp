#include <random>

#include "doctest.h"
#include "rwrl/envs.hpp"
#include "rwrl/term.hpp"
#include "test_util.hpp"

using namespace rwrl;

namespace {

Term ra(const char* text) { return parse_term(text, ra_signature()); }
Term poly(const char* text) { return parse_term(text, poly_signature()); }
Term pat(const Signature& sig, const char* text) {
  return parse_term(text, sig, ParseOptions{true});
}

RewriteRule rule(const Signature& sig, const char* lhs, const char* rhs) {
  return RewriteRule{"r", pat(sig, lhs), pat(sig, rhs), Direction::kForward};
}

}  // namespace

TEST_CASE("parse_term builds the expected trees") {
  const Term t = ra("(+ (S (S 0)) (S 0))");
  CHECK(t.symbol()->name == "+");
  CHECK(t.child(0) == ra("(S (S 0))"));
  CHECK(t.child(1) == ra("(S 0)"));

  const Term zero = ra("0");
  CHECK(zero.is_leaf());
  CHECK(zero.symbol()->name == "0");

  const Term p = poly("(* x (S 0))");
  CHECK(p.symbol()->name == "*");
  CHECK(p.child(0).symbol()->name == "x");
}

TEST_CASE("parse_term reports errors") {
  CHECK_THROWS_AS(ra("(+ 0"), ParseError);
  CHECK_THROWS_AS(ra("(+ 0 0 0)"), ParseError);
  CHECK_THROWS_AS(ra("(S)"), ParseError);
  CHECK_THROWS_AS(ra("x"), ParseError);           // not in RA
  CHECK_THROWS_AS(ra("(+ 0 0) 0"), ParseError);   // trailing input
  CHECK_THROWS_AS(ra("?x"), ParseError);          // patterns not enabled
  CHECK_THROWS_AS(ra("S"), ParseError);           // operator used as leaf
  try {
    ra("(+ 0 #)");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 5);
  }
  CHECK_THROWS_AS(parse_term("v0", poly_signature()), ParseError);
  CHECK(parse_term("v3", aim_signature()).symbol()->kind ==
        SymbolKind::kFreshVariable);
  CHECK(parse_term("1", aim_signature()).symbol()->name == "e");
}

TEST_CASE("print_term produces canonical s-expressions") {
  CHECK(print_term(ra("(S (S (S 0)))")) == "(S (S (S 0)))");
  CHECK(print_term(poly("(+ x 0)")) == "(+ x 0)");
  CHECK(print_term(parse_term("(T u x)", aim_signature())) == "(T u x)");
  CHECK(print_term(parse_term("(\\ x (* x  y))", aim_signature())) ==
        "(\\ x (* x y))");
}

TEST_CASE("subterm_at addresses children by 0-based index") {
  const Term t = ra("(+ (S (S 0)) (S 0))");
  CHECK(subterm_at(t, {0}) == ra("(S (S 0))"));
  CHECK(subterm_at(t, {}) == t);
  const Term p = poly("(+ (* x y) x)");
  CHECK(subterm_at(p, {1}) == poly("x"));
  CHECK_THROWS_AS(subterm_at(t, {2}), InvalidPath);
  CHECK_THROWS_AS(subterm_at(t, {1, 0, 0}), InvalidPath);
}

TEST_CASE("match binds pattern variables consistently") {
  const auto& sig = ra_signature();
  auto b = match(pat(sig, "(+ ?x 0)"), ra("(+ (S 0) 0)"));
  REQUIRE(b);
  CHECK(*b->find(pattern_variable("x")) == ra("(S 0)"));

  auto b2 = match(pat(sig, "(+ (* ?x ?y) ?x)"), ra("(+ (* (S 0) 0) (S 0))"));
  REQUIRE(b2);
  CHECK(*b2->find(pattern_variable("x")) == ra("(S 0)"));
  CHECK(*b2->find(pattern_variable("y")) == ra("0"));

  CHECK_FALSE(match(pat(sig, "(+ ?x 0)"), ra("(+ 0 (S 0))")));
  // Repeated variable must bind equal subterms.
  CHECK_FALSE(match(pat(sig, "(+ (* ?x ?y) ?x)"), ra("(+ (* (S 0) 0) 0)")));
}

TEST_CASE("rewrite_at applies rules at a position without mutating input") {
  const auto& sig = ra_signature();
  const Term t = ra("(+ (S (S 0)) (S 0))");
  const Term t1 = *rewrite_at(t, {}, rule(sig, "(+ ?x (S ?y))", "(S (+ ?x ?y))"));
  CHECK(t1 == ra("(S (+ (S (S 0)) 0))"));
  CHECK(t == ra("(+ (S (S 0)) (S 0))"));
  const Term t2 = *rewrite_at(t1, {0}, rule(sig, "(+ ?x 0)", "?x"));
  CHECK(t2 == ra("(S (S (S 0)))"));
  CHECK_FALSE(rewrite_at(ra("0"), {}, rule(sig, "(+ ?x 0)", "?x")));
  CHECK_THROWS_AS(rewrite_at(ra("0"), {0}, rule(sig, "(+ ?x 0)", "?x")),
                  InvalidPath);
}

TEST_CASE("rules with extra variables need explicit bindings") {
  const auto& sig = aim_signature();
  RewriteRule r{"b1", pat(sig, "(\\ ?x (* ?x ?y))"), pat(sig, "?y"),
                Direction::kBackward};
  CHECK_FALSE(r.admissible());
  REQUIRE(r.extra_variables().size() == 1);
  const Term t = parse_term("(* u e)", sig);
  CHECK_THROWS_AS(rewrite_at(t, {0}, r), std::invalid_argument);
  Bindings extra;
  extra.bind(pattern_variable("x"), Term(fresh_variable(0)));
  CHECK(*rewrite_at(t, {0}, r, extra) ==
        parse_term("(* (\\ v0 (* v0 u)) e)", sig));
}

TEST_CASE("property: parse(print(t)) == t for random terms") {
  std::mt19937_64 rng(11);
  for (const Signature* sig :
       {&ra_signature(), &poly_signature(), &aim_signature()}) {
    for (int i = 0; i < 500; ++i) {
      const Term t = testing::random_term(rng, *sig, 6);
      CHECK(parse_term(print_term(t), *sig) == t);
    }
  }
}

TEST_CASE("property: matching soundness and rewrite locality") {
  std::mt19937_64 rng(12);
  const EnvSpec& env = default_env(EnvName::kPoly);
  int matched = 0;
  for (int i = 0; i < 2000; ++i) {
    const Term t = testing::random_term(rng, poly_signature(), 5);
    const Path p = testing::random_path(rng, t);
    const Action& a = env.actions[i % env.action_count()];
    if (a.kind != Action::Kind::kRewrite) continue;
    for (const RewriteRule& r : a.rules) {
      auto b = match(r.from(), subterm_at(t, p));
      if (!b) continue;
      ++matched;
      CHECK(substitute(r.from(), *b) == subterm_at(t, p));
      const Term out = *rewrite_at(t, p, r);
      // Every path that is not an extension of p and does not lie on the
      // route to p addresses an identical subterm.
      for (const Path& q : all_paths(t)) {
        const bool below = q.size() >= p.size() &&
                           std::equal(p.begin(), p.end(), q.begin());
        const bool above = q.size() < p.size() &&
                           std::equal(q.begin(), q.end(), p.begin());
        if (below || above) continue;
        REQUIRE(is_valid_path(out, q));
        CHECK(subterm_at(out, q) == subterm_at(t, q));
      }
    }
  }
  CHECK(matched > 100);
}

TEST_CASE("property: inverse rule pairs undo each other") {
  std::mt19937_64 rng(13);
  const EnvSpec& env = default_env(EnvName::kRA);
  // Appendix pairs (3,4) and (6,7), plus (1,2).
  const std::pair<int, int> pairs[] = {{0, 1}, {2, 3}, {5, 6}};
  int checked = 0;
  for (int i = 0; i < 3000; ++i) {
    const Term t = testing::random_term(rng, ra_signature(), 5);
    const Path p = testing::random_path(rng, t);
    for (auto [a, b] : pairs) {
      for (auto [f, g] : {std::pair{a, b}, std::pair{b, a}}) {
        const RewriteRule& r = env.actions[f].rules[0];
        const RewriteRule& inv = env.actions[g].rules[0];
        auto out = rewrite_at(t, p, r);
        if (!out) continue;
        auto back = rewrite_at(*out, p, inv);
        REQUIRE(back);
        CHECK(*back == t);
        ++checked;
      }
    }
  }
  CHECK(checked > 500);
}
