#pragma once

#include <stdexcept>
#include <string>

namespace tmsf {

// Failure categories. The CLI maps these onto exit codes.
enum class ErrorKind {
  parse,             // malformed input file or parameter
  precondition,      // generic violated precondition
  not_mixing,        // operation requires a topologically mixing shift
  not_transitive,
  stranded_state,    // a state lost its incoming or outgoing transitions
  window_underflow,  // word too short for the potential window
  inadmissible,      // word or wrap-around uses a forbidden transition
  not_regular,       // regularity certificate missing for a reduction
  non_convergence,   // iterative solver exhausted its budget
  cap_exceeded,      // enumeration would exceed the configured budget
  invariant          // internal invariant violated (a bug)
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::not_mixing: return "not_mixing";
    case ErrorKind::not_transitive: return "not_transitive";
    case ErrorKind::stranded_state: return "stranded_state";
    case ErrorKind::window_underflow: return "window_underflow";
    case ErrorKind::inadmissible: return "inadmissible";
    case ErrorKind::not_regular: return "not_regular";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::cap_exceeded: return "cap_exceeded";
    case ErrorKind::invariant: return "invariant";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tmsf
