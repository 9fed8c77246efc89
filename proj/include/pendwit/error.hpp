#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pendwit {

// Every failure condition named by an API contract gets its own code so
// callers can dispatch without matching message strings.
enum class Errc {
  // expression language
  Syntax,
  UnknownIdentifier,
  ArityMismatch,
  Domain,
  MissingVariable,
  UnknownBuiltin,
  BadParameter,
  BoundViolated,
  // models
  Singular,
  NotAnEquilibrium,
  TorqueInadmissible,
  // integrator
  StepBudgetExceeded,
  StepUnderflow,
  OutOfSpan,
  // lyapunov
  NotHurwitz,
  IllConditioned,
  NoConvergence,
  VerificationFailed,
  // fate / finders
  PreconditionViolated,
  SameFateEndpoints,
  InconclusiveEncountered,
  NoRootFound,
  // orchestration
  Config,
  Io,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::string expected, const std::string& message)
      : Error(Errc::Syntax, message), offset_(offset), expected_(std::move(expected)) {}
  // byte offset into the source text where parsing failed
  std::size_t offset() const { return offset_; }
  // human-readable set of tokens that would have been accepted
  const std::string& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pendwit
