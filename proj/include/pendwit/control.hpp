#pragma once

// Control-law expression language: parsing, evaluation, printing, and the
// built-in controller library.
//
// Grammar, lowest to highest precedence:
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?            right associative
//   primary := number | name | name '(' expr {',' expr} ')' | '(' expr ')'
// Numbers are plain decimals with an optional exponent. The name `pi` folds
// to a numeric literal at parse time.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pendwit/error.hpp"

namespace pendwit {

enum class Var : int { Q, P, X, Y, T, Phi, Dphi, Theta, Dtheta };
inline constexpr int kVarCount = 9;
std::string_view var_name(Var v);
std::optional<Var> var_from_name(std::string_view name);

enum class Func : int { Sin, Cos, Tan, Atan, Exp, Ln, Sqrt, Abs, Sign, Tanh, Min, Max, Sat };
std::string_view func_name(Func f);
int func_arity(Func f);
std::optional<Func> func_from_name(std::string_view name);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Number { double value; };
struct VarRef { Var var; };
struct Negate { ExprPtr operand; };
struct Binary { char op; ExprPtr lhs; ExprPtr rhs; };  // one of + - * / ^
struct Call { Func func; std::vector<ExprPtr> args; };

struct Expr {
  std::variant<Number, VarRef, Negate, Binary, Call> node;
};

ExprPtr parse(std::string_view text);

// Canonical, fully parenthesized rendering; parse(pretty_print(e)) is
// structurally identical to e.
std::string pretty_print(const Expr& e);
bool structurally_equal(const Expr& a, const Expr& b);

// Collects the variables referenced by an expression as a bitmask over Var.
std::uint16_t used_variables(const Expr& e);

// true when the expression contains sign or abs
bool contains_non_lipschitz(const Expr& e);

// Variable bindings for evaluation. Reading an unset variable raises
// MissingVariable.
class Env {
 public:
  void set(Var v, double value) {
    values_[static_cast<int>(v)] = value;
    mask_ |= static_cast<std::uint16_t>(1u << static_cast<int>(v));
  }
  bool has(Var v) const { return (mask_ >> static_cast<int>(v)) & 1u; }
  double get(Var v) const;

 private:
  std::array<double, kVarCount> values_{};
  std::uint16_t mask_ = 0;
};

// IEEE double evaluation; a non-finite intermediate result (ln/sqrt of a
// negative, division by zero, overflow) raises Domain.
double eval(const Expr& e, const Env& env);

// A compiled control expression with its declared metadata.
struct ControlLaw {
  ExprPtr expr;
  std::string source;                    // canonical text form
  std::optional<double> declared_bound;  // |u| <= bound, enforced at every evaluation
  std::optional<double> declared_period; // period in t, required by the periodic finder
  bool lipschitz_clean = true;           // false when sign/abs occur

  static ControlLaw from_text(std::string_view text,
                              std::optional<double> bound = std::nullopt,
                              std::optional<double> period = std::nullopt);
  static ControlLaw from_expr(ExprPtr expr,
                              std::optional<double> bound = std::nullopt,
                              std::optional<double> period = std::nullopt);
};

// Evaluates a law and enforces declared_bound with 1e-12 slack.
double eval_law(const ControlLaw& law, const Env& env);

// Built-in controllers. Each returns a ControlLaw whose declared_bound and
// declared_period reflect the construction.
namespace builtins {
ControlLaw zero();
ControlLaw constant(double c);
ControlLaw pd(double k_p, double k_d, double q_ref);
ControlLaw energy_swingup(double k, double bound);
ControlLaw periodic_forcing(double amplitude, double omega);
ControlLaw saturated_pd(double k_p, double k_d, double q_ref, double bound);
}  // namespace builtins

// Dispatch by name with named parameters; raises UnknownBuiltin/BadParameter.
ControlLaw builtin(std::string_view name, const std::map<std::string, double>& params);

}  // namespace pendwit
