#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pendwit/control.hpp"

using namespace pendwit;

namespace {

Env planar_env(double q, double p, double t = 0.0) {
  Env env;
  env.set(Var::Q, q);
  env.set(Var::P, p);
  env.set(Var::T, t);
  return env;
}

double eval_text(const std::string& text, const Env& env) { return eval(*parse(text), env); }

}  // namespace

TEST_CASE("precedence and parenthesization") {
  CHECK(eval_text("sin(q)*2 + p", planar_env(M_PI / 2, 1.0)) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(eval_text("-2^2", planar_env(0, 0)) == -4.0);
  CHECK(eval_text("2^-2", planar_env(0, 0)) == 0.25);
  CHECK(eval_text("2^3^2", planar_env(0, 0)) == 512.0);
  CHECK(eval_text("(1+2)*3", planar_env(0, 0)) == 9.0);
  CHECK(eval_text("1 - 2 - 3", planar_env(0, 0)) == -4.0);
  CHECK(eval_text("12/4/3", planar_env(0, 0)) == 1.0);
  CHECK(eval_text("sat(10*p, -1, 1)", planar_env(0, 1.0)) == 1.0);
  CHECK(eval_text("sat(10*p, -1, 1)", planar_env(0, -1.0)) == -1.0);
  CHECK(eval_text("sat(0.3, -1, 1)", planar_env(0, 0)) == 0.3);
}

TEST_CASE("literal forms") {
  Env env = planar_env(0, 0);
  CHECK(eval_text("0.5", env) == 0.5);
  CHECK(eval_text(".5", env) == 0.5);
  CHECK(eval_text("2.", env) == 2.0);
  CHECK(eval_text("1e-3", env) == 1e-3);
  CHECK(eval_text("1.5E+2", env) == 150.0);
  CHECK(eval_text("pi", env) == M_PI);
}

TEST_CASE("evaluation examples") {
  CHECK(eval_text("cos(q)", planar_env(0, 0)) == 1.0);
  CHECK(eval_text("p^2/(1+q^2)", planar_env(1, 2)) == 2.0);
  CHECK(eval_text("min(q, p)", planar_env(2, 3)) == 2.0);
  CHECK(eval_text("max(q, p)", planar_env(2, 3)) == 3.0);
  CHECK(eval_text("sign(p)", planar_env(0, -2)) == -1.0);
  CHECK(eval_text("sign(p)", planar_env(0, 0)) == 0.0);
  CHECK(eval_text("abs(p)", planar_env(0, -2)) == 2.0);
  CHECK(eval_text("tanh(q)", planar_env(0.5, 0)) == doctest::Approx(std::tanh(0.5)).epsilon(1e-16));
}

TEST_CASE("syntax errors carry offsets and expectations") {
  try {
    parse("sin(q");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 5);
    CHECK(!e.expected().empty());
  }
  CHECK_THROWS_AS(parse("1 +"), SyntaxError);
  CHECK_THROWS_AS(parse("(1"), SyntaxError);
  CHECK_THROWS_AS(parse("1 2"), SyntaxError);
  CHECK_THROWS_AS(parse("#"), SyntaxError);
}

TEST_CASE("identifier and arity errors") {
  try {
    parse("bogus + 1");
    FAIL("expected UnknownIdentifier");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownIdentifier);
  }
  try {
    parse("frob(q)");
    FAIL("expected UnknownIdentifier");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownIdentifier);
  }
  try {
    parse("sin(q, p)");
    FAIL("expected ArityMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ArityMismatch);
  }
  try {
    parse("sat(q, p)");
    FAIL("expected ArityMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ArityMismatch);
  }
}

TEST_CASE("domain errors") {
  Env env = planar_env(-1.0, 0.0);
  auto expect_domain = [&](const std::string& text) {
    try {
      eval_text(text, env);
      FAIL("expected DomainError for ", text);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Domain);
    }
  };
  expect_domain("ln(q)");
  expect_domain("sqrt(q)");
  expect_domain("1/p");
  expect_domain("q^0.5");
  expect_domain("ln(p)");  // ln(0)
}

TEST_CASE("missing variable") {
  Env env;
  env.set(Var::Q, 1.0);
  try {
    eval_text("q + p", env);
    FAIL("expected MissingVariable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingVariable);
  }
}

TEST_CASE("pretty-print round trip on random trees") {
  std::mt19937_64 rng(20240811);
  std::uniform_real_distribution<double> coef(-10.0, 10.0);
  std::uniform_int_distribution<int> pick(0, 99);

  // hand-rolled generator over the full node alphabet
  std::function<ExprPtr(int)> gen = [&](int depth) -> ExprPtr {
    const int r = pick(rng);
    if (depth >= 5 || r < 30) {
      // literals are non-negative in parser output; negation is a node
      if (r % 2 == 0) return std::make_shared<Expr>(Expr{Number{std::fabs(coef(rng))}});
      return std::make_shared<Expr>(Expr{VarRef{static_cast<Var>(pick(rng) % kVarCount)}});
    }
    if (r < 45) return std::make_shared<Expr>(Expr{Negate{gen(depth + 1)}});
    if (r < 75) {
      const char ops[] = {'+', '-', '*', '/', '^'};
      return std::make_shared<Expr>(
          Expr{Binary{ops[pick(rng) % 5], gen(depth + 1), gen(depth + 1)}});
    }
    const Func f = static_cast<Func>(pick(rng) % 13);
    std::vector<ExprPtr> args;
    for (int i = 0; i < func_arity(f); ++i) args.push_back(gen(depth + 1));
    return std::make_shared<Expr>(Expr{Call{f, std::move(args)}});
  };

  for (int i = 0; i < 300; ++i) {
    ExprPtr e = gen(0);
    ExprPtr back = parse(pretty_print(*e));
    CHECK(structurally_equal(*e, *back));
  }
}

TEST_CASE("evaluation is deterministic") {
  ExprPtr e = parse("sin(q)*tanh(p) + exp(q/4) - t^2");
  Env env = planar_env(0.7, -1.3, 2.5);
  const double a = eval(*e, env);
  const double b = eval(*e, env);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("builtin controllers") {
  SUBCASE("zero") {
    ControlLaw law = builtins::zero();
    CHECK(law.declared_bound == 0.0);
    CHECK(eval_law(law, planar_env(1, 2)) == 0.0);
  }
  SUBCASE("constant") {
    ControlLaw law = builtins::constant(-2.0);
    CHECK(law.declared_bound == 2.0);
    CHECK(eval_law(law, planar_env(0, 0)) == -2.0);
  }
  SUBCASE("periodic_forcing") {
    ControlLaw law = builtins::periodic_forcing(0.5, 2.0 * M_PI);
    CHECK(law.declared_bound == 0.5);
    CHECK(law.declared_period == doctest::Approx(1.0).epsilon(1e-16));
    CHECK(eval_law(law, planar_env(0, 0, 0.25)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(eval_law(law, planar_env(0, 0, 0.0)) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("pd vanishes at its set point") {
    ControlLaw law = builtins::pd(2.0, 1.0, M_PI / 2);
    CHECK(eval_law(law, planar_env(M_PI / 2, 0)) == 0.0);
    CHECK(!law.declared_bound.has_value());
  }
  SUBCASE("saturated_pd respects the bound") {
    ControlLaw law = builtins::saturated_pd(100.0, 10.0, M_PI / 2, 1.5);
    CHECK(law.declared_bound == 1.5);
    CHECK(eval_law(law, planar_env(3.0, 5.0)) == -1.5);
  }
  SUBCASE("bad parameters rejected") {
    CHECK_THROWS_AS(builtins::saturated_pd(1, 1, 0, 0.0), Error);
    CHECK_THROWS_AS(builtins::energy_swingup(1, -1.0), Error);
    try {
      builtin("nope", {});
      FAIL("expected UnknownBuiltin");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnknownBuiltin);
    }
    try {
      builtin("pd", {{"k_p", 1.0}});
      FAIL("expected BadParameter");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::BadParameter);
    }
  }
  SUBCASE("builtin dispatch by name") {
    ControlLaw law = builtin("periodic_forcing", {{"A", 0.5}, {"omega", 2.0 * M_PI}});
    CHECK(law.declared_period == doctest::Approx(1.0));
  }
}

TEST_CASE("declared bound soundness for builtins") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> qd(-2.0 * M_PI, 2.0 * M_PI), pd_(-8.0, 8.0),
      td(0.0, 50.0);
  const ControlLaw laws[] = {
      builtins::zero(),
      builtins::constant(1.25),
      builtins::periodic_forcing(0.5, 2.0 * M_PI),
      builtins::saturated_pd(3.0, 2.0, M_PI / 2, 2.0),
      builtins::energy_swingup(1.5, 1.0),
  };
  for (const ControlLaw& law : laws) {
    REQUIRE(law.declared_bound.has_value());
    for (int i = 0; i < 10000; ++i) {
      const double u = eval_law(law, planar_env(qd(rng), pd_(rng), td(rng)));
      CHECK(std::fabs(u) <= *law.declared_bound + 1e-12);
    }
  }
}

TEST_CASE("declared bound violations raise") {
  ControlLaw law = ControlLaw::from_text("2*q", 1.0);
  try {
    eval_law(law, planar_env(3.0, 0.0));
    FAIL("expected BoundViolated");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BoundViolated);
  }
}

TEST_CASE("lipschitz flag tracks sign and abs") {
  CHECK(ControlLaw::from_text("sin(q) + sat(p, -1, 1)").lipschitz_clean);
  CHECK(ControlLaw::from_text("min(q, max(p, 0))").lipschitz_clean);
  CHECK_FALSE(ControlLaw::from_text("abs(p)").lipschitz_clean);
  CHECK_FALSE(ControlLaw::from_text("sign(q)*0.5").lipschitz_clean);
}
