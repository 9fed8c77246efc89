#include "pendwit/control.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace pendwit {

namespace {

constexpr std::string_view kVarNames[kVarCount] = {
    "q", "p", "x", "y", "t", "phi", "dphi", "theta", "dtheta"};

struct FuncInfo {
  std::string_view name;
  int arity;
};
constexpr FuncInfo kFuncs[] = {
    {"sin", 1}, {"cos", 1}, {"tan", 1}, {"atan", 1}, {"exp", 1}, {"ln", 1},
    {"sqrt", 1}, {"abs", 1}, {"sign", 1}, {"tanh", 1}, {"min", 2}, {"max", 2},
    {"sat", 3}};

}  // namespace

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::Syntax: return "SyntaxError";
    case Errc::UnknownIdentifier: return "UnknownIdentifier";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::Domain: return "DomainError";
    case Errc::MissingVariable: return "MissingVariable";
    case Errc::UnknownBuiltin: return "UnknownBuiltin";
    case Errc::BadParameter: return "BadParameter";
    case Errc::BoundViolated: return "BoundViolated";
    case Errc::Singular: return "SingularConfiguration";
    case Errc::NotAnEquilibrium: return "NotAnEquilibrium";
    case Errc::TorqueInadmissible: return "TorqueInadmissible";
    case Errc::StepBudgetExceeded: return "StepBudgetExceeded";
    case Errc::StepUnderflow: return "StepUnderflow";
    case Errc::OutOfSpan: return "OutOfSpan";
    case Errc::NotHurwitz: return "NotHurwitz";
    case Errc::IllConditioned: return "IllConditioned";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::VerificationFailed: return "VerificationFailed";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::SameFateEndpoints: return "SameFateEndpoints";
    case Errc::InconclusiveEncountered: return "InconclusiveEncountered";
    case Errc::NoRootFound: return "NoRootFound";
    case Errc::Config: return "ConfigError";
    case Errc::Io: return "IoError";
  }
  return "Error";
}

std::string_view var_name(Var v) { return kVarNames[static_cast<int>(v)]; }

std::optional<Var> var_from_name(std::string_view name) {
  for (int i = 0; i < kVarCount; ++i)
    if (kVarNames[i] == name) return static_cast<Var>(i);
  return std::nullopt;
}

std::string_view func_name(Func f) { return kFuncs[static_cast<int>(f)].name; }
int func_arity(Func f) { return kFuncs[static_cast<int>(f)].arity; }

std::optional<Func> func_from_name(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kFuncs); ++i)
    if (kFuncs[i].name == name) return static_cast<Func>(i);
  return std::nullopt;
}

double Env::get(Var v) const {
  if (!has(v))
    fail(Errc::MissingVariable,
         "variable '" + std::string(var_name(v)) + "' is not bound in the environment");
  return values_[static_cast<int>(v)];
}

// ---------------------------------------------------------------------------
// Tokenizer + recursive-descent parser

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string text;
  double value = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    std::size_t start = pos_;
    if (pos_ >= src_.size()) return {Tok::End, start, ""};
    char c = src_[pos_];
    switch (c) {
      case '+': ++pos_; return {Tok::Plus, start, "+"};
      case '-': ++pos_; return {Tok::Minus, start, "-"};
      case '*': ++pos_; return {Tok::Star, start, "*"};
      case '/': ++pos_; return {Tok::Slash, start, "/"};
      case '^': ++pos_; return {Tok::Caret, start, "^"};
      case '(': ++pos_; return {Tok::LParen, start, "("};
      case ')': ++pos_; return {Tok::RParen, start, ")"};
      case ',': ++pos_; return {Tok::Comma, start, ","};
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return lex_number(start);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      return {Tok::Ident, start, std::string(src_.substr(start, pos_ - start))};
    }
    throw SyntaxError(start, "number, identifier, operator, '(', ')' or ','",
                      "unexpected character '" + std::string(1, c) + "' at offset " +
                          std::to_string(start));
  }

 private:
  Token lex_number(std::size_t start) {
    bool saw_digit = false;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
      saw_digit = true;
    }
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        saw_digit = true;
      }
    }
    if (!saw_digit)
      throw SyntaxError(start, "digit", "malformed number at offset " + std::to_string(start));
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        pos_ = mark;  // the 'e' belongs to something else; stop the number here
      } else {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    std::string text(src_.substr(start, pos_ - start));
    return {Tok::Number, start, text, std::stod(text)};
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lexer_(src) { advance(); }

  ExprPtr run() {
    ExprPtr e = expression();
    if (cur_.kind != Tok::End)
      throw SyntaxError(cur_.offset, "end of input, operator, or ','",
                        "unexpected token '" + cur_.text + "' at offset " +
                            std::to_string(cur_.offset));
    return e;
  }

 private:
  void advance() { cur_ = lexer_.next(); }

  ExprPtr expression() {
    ExprPtr lhs = term();
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      char op = cur_.kind == Tok::Plus ? '+' : '-';
      advance();
      lhs = std::make_shared<Expr>(Expr{Binary{op, lhs, term()}});
    }
    return lhs;
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
      char op = cur_.kind == Tok::Star ? '*' : '/';
      advance();
      lhs = std::make_shared<Expr>(Expr{Binary{op, lhs, unary()}});
    }
    return lhs;
  }

  ExprPtr unary() {
    if (cur_.kind == Tok::Minus) {
      advance();
      return std::make_shared<Expr>(Expr{Negate{unary()}});
    }
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    if (cur_.kind == Tok::Caret) {
      advance();
      // exponent parses through unary so both 2^-3 and 2^3^2 read naturally
      return std::make_shared<Expr>(Expr{Binary{'^', base, unary()}});
    }
    return base;
  }

  ExprPtr primary() {
    if (cur_.kind == Tok::Number) {
      double v = cur_.value;
      advance();
      return std::make_shared<Expr>(Expr{Number{v}});
    }
    if (cur_.kind == Tok::Ident) {
      Token name = cur_;
      advance();
      if (cur_.kind == Tok::LParen) return call(name);
      if (name.text == "pi") return std::make_shared<Expr>(Expr{Number{M_PI}});
      if (auto v = var_from_name(name.text))
        return std::make_shared<Expr>(Expr{VarRef{*v}});
      throw Error(Errc::UnknownIdentifier,
                  "unknown identifier '" + name.text + "' at offset " +
                      std::to_string(name.offset));
    }
    if (cur_.kind == Tok::LParen) {
      advance();
      ExprPtr e = expression();
      expect(Tok::RParen, "')'");
      return e;
    }
    throw SyntaxError(cur_.offset, "number, identifier, '-', or '('",
                      "unexpected token '" + (cur_.kind == Tok::End ? std::string("<end>") : cur_.text) +
                          "' at offset " + std::to_string(cur_.offset));
  }

  ExprPtr call(const Token& name) {
    auto f = func_from_name(name.text);
    if (!f)
      throw Error(Errc::UnknownIdentifier,
                  "unknown function '" + name.text + "' at offset " +
                      std::to_string(name.offset));
    advance();  // consume '('
    std::vector<ExprPtr> args;
    if (cur_.kind != Tok::RParen) {
      args.push_back(expression());
      while (cur_.kind == Tok::Comma) {
        advance();
        args.push_back(expression());
      }
    }
    expect(Tok::RParen, "')' or ','");
    if (static_cast<int>(args.size()) != func_arity(*f))
      throw Error(Errc::ArityMismatch,
                  "function '" + name.text + "' expects " + std::to_string(func_arity(*f)) +
                      " argument(s), got " + std::to_string(args.size()));
    return std::make_shared<Expr>(Expr{Call{*f, std::move(args)}});
  }

  void expect(Tok kind, const std::string& what) {
    if (cur_.kind != kind)
      throw SyntaxError(cur_.offset, what,
                        "expected " + what + " at offset " + std::to_string(cur_.offset));
    advance();
  }

  Lexer lexer_;
  Token cur_{Tok::End, 0, ""};
};

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExprPtr parse(std::string_view text) { return Parser(text).run(); }

std::string pretty_print(const Expr& e) {
  struct Printer {
    std::string operator()(const Number& n) const {
      // negative literals re-enter through unary minus
      if (std::signbit(n.value)) return "(-" + format_number(-n.value) + ")";
      return format_number(n.value);
    }
    std::string operator()(const VarRef& v) const { return std::string(var_name(v.var)); }
    std::string operator()(const Negate& n) const { return "(-" + pretty_print(*n.operand) + ")"; }
    std::string operator()(const Binary& b) const {
      return "(" + pretty_print(*b.lhs) + std::string(1, b.op) + pretty_print(*b.rhs) + ")";
    }
    std::string operator()(const Call& c) const {
      std::string out(func_name(c.func));
      out += "(";
      for (std::size_t i = 0; i < c.args.size(); ++i) {
        if (i) out += ",";
        out += pretty_print(*c.args[i]);
      }
      out += ")";
      return out;
    }
  };
  return std::visit(Printer{}, e.node);
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  if (const auto* na = std::get_if<Number>(&a.node)) {
    const auto& nb = std::get<Number>(b.node);
    return na->value == nb.value || (std::isnan(na->value) && std::isnan(nb.value));
  }
  if (const auto* va = std::get_if<VarRef>(&a.node))
    return va->var == std::get<VarRef>(b.node).var;
  if (const auto* ga = std::get_if<Negate>(&a.node))
    return structurally_equal(*ga->operand, *std::get<Negate>(b.node).operand);
  if (const auto* ba = std::get_if<Binary>(&a.node)) {
    const auto& bb = std::get<Binary>(b.node);
    return ba->op == bb.op && structurally_equal(*ba->lhs, *bb.lhs) &&
           structurally_equal(*ba->rhs, *bb.rhs);
  }
  const auto& ca = std::get<Call>(a.node);
  const auto& cb = std::get<Call>(b.node);
  if (ca.func != cb.func || ca.args.size() != cb.args.size()) return false;
  for (std::size_t i = 0; i < ca.args.size(); ++i)
    if (!structurally_equal(*ca.args[i], *cb.args[i])) return false;
  return true;
}

std::uint16_t used_variables(const Expr& e) {
  struct Scan {
    std::uint16_t operator()(const Number&) const { return 0; }
    std::uint16_t operator()(const VarRef& v) const {
      return static_cast<std::uint16_t>(1u << static_cast<int>(v.var));
    }
    std::uint16_t operator()(const Negate& n) const { return used_variables(*n.operand); }
    std::uint16_t operator()(const Binary& b) const {
      return used_variables(*b.lhs) | used_variables(*b.rhs);
    }
    std::uint16_t operator()(const Call& c) const {
      std::uint16_t m = 0;
      for (const auto& a : c.args) m |= used_variables(*a);
      return m;
    }
  };
  return std::visit(Scan{}, e.node);
}

bool contains_non_lipschitz(const Expr& e) {
  struct Scan {
    bool operator()(const Number&) const { return false; }
    bool operator()(const VarRef&) const { return false; }
    bool operator()(const Negate& n) const { return contains_non_lipschitz(*n.operand); }
    bool operator()(const Binary& b) const {
      return contains_non_lipschitz(*b.lhs) || contains_non_lipschitz(*b.rhs);
    }
    bool operator()(const Call& c) const {
      if (c.func == Func::Sign || c.func == Func::Abs) return true;
      for (const auto& a : c.args)
        if (contains_non_lipschitz(*a)) return true;
      return false;
    }
  };
  return std::visit(Scan{}, e.node);
}

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v))
    fail(Errc::Domain, std::string("non-finite result from ") + what);
  return v;
}

}  // namespace

double eval(const Expr& e, const Env& env) {
  struct Eval {
    const Env& env;
    double operator()(const Number& n) const { return n.value; }
    double operator()(const VarRef& v) const { return env.get(v.var); }
    double operator()(const Negate& n) const { return -eval(*n.operand, env); }
    double operator()(const Binary& b) const {
      double l = eval(*b.lhs, env);
      double r = eval(*b.rhs, env);
      switch (b.op) {
        case '+': return checked(l + r, "addition");
        case '-': return checked(l - r, "subtraction");
        case '*': return checked(l * r, "multiplication");
        case '/': return checked(l / r, "division");
        case '^': return checked(std::pow(l, r), "exponentiation");
      }
      fail(Errc::Domain, "unknown binary operator");
    }
    double operator()(const Call& c) const {
      auto arg = [&](std::size_t i) { return eval(*c.args[i], env); };
      switch (c.func) {
        case Func::Sin: return checked(std::sin(arg(0)), "sin");
        case Func::Cos: return checked(std::cos(arg(0)), "cos");
        case Func::Tan: return checked(std::tan(arg(0)), "tan");
        case Func::Atan: return checked(std::atan(arg(0)), "atan");
        case Func::Exp: return checked(std::exp(arg(0)), "exp");
        case Func::Ln: return checked(std::log(arg(0)), "ln");
        case Func::Sqrt: return checked(std::sqrt(arg(0)), "sqrt");
        case Func::Abs: return std::fabs(arg(0));
        case Func::Sign: {
          double v = arg(0);
          return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
        }
        case Func::Tanh: return std::tanh(arg(0));
        case Func::Min: return std::min(arg(0), arg(1));
        case Func::Max: return std::max(arg(0), arg(1));
        case Func::Sat: {
          double v = arg(0);
          return std::min(std::max(v, arg(1)), arg(2));
        }
      }
      fail(Errc::Domain, "unknown function");
    }
  };
  return std::visit(Eval{env}, e.node);
}

ControlLaw ControlLaw::from_text(std::string_view text, std::optional<double> bound,
                                 std::optional<double> period) {
  return from_expr(parse(text), bound, period);
}

ControlLaw ControlLaw::from_expr(ExprPtr expr, std::optional<double> bound,
                                 std::optional<double> period) {
  if (!expr) fail(Errc::BadParameter, "null expression");
  if (bound && *bound < 0) fail(Errc::BadParameter, "declared bound must be >= 0");
  if (period && *period <= 0) fail(Errc::BadParameter, "declared period must be > 0");
  ControlLaw law;
  law.source = pretty_print(*expr);
  law.expr = std::move(expr);
  law.declared_bound = bound;
  law.declared_period = period;
  law.lipschitz_clean = !contains_non_lipschitz(*law.expr);
  return law;
}

double eval_law(const ControlLaw& law, const Env& env) {
  double v = eval(*law.expr, env);
  if (law.declared_bound && std::fabs(v) > *law.declared_bound + 1e-12)
    throw Error(Errc::BoundViolated,
                "control value " + format_number(v) + " exceeds declared bound " +
                    format_number(*law.declared_bound));
  return v;
}

// ---------------------------------------------------------------------------
// Built-in controllers, constructed directly as syntax trees so their
// canonical text form round-trips exactly.

namespace {

ExprPtr num(double v) {
  if (std::signbit(v) && v != 0.0)
    return std::make_shared<Expr>(Expr{Negate{num(-v)}});
  return std::make_shared<Expr>(Expr{Number{v}});
}
ExprPtr ref(Var v) { return std::make_shared<Expr>(Expr{VarRef{v}}); }
ExprPtr bin(char op, ExprPtr l, ExprPtr r) {
  return std::make_shared<Expr>(Expr{Binary{op, std::move(l), std::move(r)}});
}
ExprPtr neg(ExprPtr e) { return std::make_shared<Expr>(Expr{Negate{std::move(e)}}); }
ExprPtr call(Func f, std::vector<ExprPtr> args) {
  return std::make_shared<Expr>(Expr{Call{f, std::move(args)}});
}

// -k_p*(q - q_ref) - k_d*p
ExprPtr pd_expr(double k_p, double k_d, double q_ref) {
  return bin('-', neg(bin('*', num(k_p), bin('-', ref(Var::Q), num(q_ref)))),
             bin('*', num(k_d), ref(Var::P)));
}

}  // namespace

namespace builtins {

ControlLaw zero() { return ControlLaw::from_expr(num(0.0), 0.0); }

ControlLaw constant(double c) { return ControlLaw::from_expr(num(c), std::fabs(c)); }

ControlLaw pd(double k_p, double k_d, double q_ref) {
  return ControlLaw::from_expr(pd_expr(k_p, k_d, q_ref));
}

ControlLaw energy_swingup(double k, double bound) {
  if (bound <= 0) fail(Errc::BadParameter, "energy_swingup: U must be > 0");
  // Pumps the pendulum energy E = p^2/2 + sin(q) toward the upright level 1:
  //   u = sat(k*(1-E)*p*sin(q), -U, U)   so that  dE/dt = u*p*sin(q)
  // has the sign of (1-E).
  ExprPtr energy = bin('+', bin('/', bin('^', ref(Var::P), num(2.0)), num(2.0)),
                       call(Func::Sin, {ref(Var::Q)}));
  ExprPtr drive = bin('*', bin('*', bin('*', num(k), bin('-', num(1.0), energy)), ref(Var::P)),
                      call(Func::Sin, {ref(Var::Q)}));
  return ControlLaw::from_expr(call(Func::Sat, {drive, neg(num(bound)), num(bound)}), bound);
}

ControlLaw periodic_forcing(double amplitude, double omega) {
  if (omega <= 0) fail(Errc::BadParameter, "periodic_forcing: omega must be > 0");
  ExprPtr e = bin('*', num(amplitude), call(Func::Sin, {bin('*', num(omega), ref(Var::T))}));
  return ControlLaw::from_expr(std::move(e), std::fabs(amplitude), 2.0 * M_PI / omega);
}

ControlLaw saturated_pd(double k_p, double k_d, double q_ref, double bound) {
  if (bound <= 0) fail(Errc::BadParameter, "saturated_pd: U must be > 0");
  return ControlLaw::from_expr(
      call(Func::Sat, {pd_expr(k_p, k_d, q_ref), neg(num(bound)), num(bound)}), bound);
}

}  // namespace builtins

ControlLaw builtin(std::string_view name, const std::map<std::string, double>& params) {
  auto need = [&](const char* key) {
    auto it = params.find(key);
    if (it == params.end())
      fail(Errc::BadParameter,
           "builtin '" + std::string(name) + "' requires parameter '" + key + "'");
    return it->second;
  };
  auto check_exact = [&](std::initializer_list<const char*> keys) {
    if (params.size() != keys.size())
      for (const auto& [k, v] : params) {
        bool known = false;
        for (const char* key : keys)
          if (k == key) known = true;
        if (!known)
          fail(Errc::BadParameter,
               "builtin '" + std::string(name) + "' does not take parameter '" + k + "'");
      }
  };
  if (name == "zero") {
    check_exact({});
    return builtins::zero();
  }
  if (name == "constant") {
    check_exact({"c"});
    return builtins::constant(need("c"));
  }
  if (name == "pd") {
    check_exact({"k_p", "k_d", "q_ref"});
    return builtins::pd(need("k_p"), need("k_d"), need("q_ref"));
  }
  if (name == "energy_swingup") {
    check_exact({"k", "U"});
    return builtins::energy_swingup(need("k"), need("U"));
  }
  if (name == "periodic_forcing") {
    check_exact({"A", "omega"});
    return builtins::periodic_forcing(need("A"), need("omega"));
  }
  if (name == "saturated_pd") {
    check_exact({"k_p", "k_d", "q_ref", "U"});
    return builtins::saturated_pd(need("k_p"), need("k_d"), need("q_ref"), need("U"));
  }
  throw Error(Errc::UnknownBuiltin, "unknown builtin controller '" + std::string(name) + "'");
}

}  // namespace pendwit
