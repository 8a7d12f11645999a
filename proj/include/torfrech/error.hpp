#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace torfrech {

//! Failure categories surfaced by the library. The CLI maps these onto exit
//! codes: validation-type kinds give 2, numerical kinds give 3.
enum class ErrorKind {
  InvalidArgument,
  PayloadViolation,
  DegenerateWeights,
  Convergence,
  UnsupportedOracle,
  EmptyNeighborhood,
  SingularDesign,
  DegenerateVariance,
  Parse,
  EmptyDataset,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::InvalidArgument: return "invalid-argument";
  case ErrorKind::PayloadViolation: return "payload-violation";
  case ErrorKind::DegenerateWeights: return "degenerate-weights";
  case ErrorKind::Convergence: return "convergence";
  case ErrorKind::UnsupportedOracle: return "unsupported-oracle";
  case ErrorKind::EmptyNeighborhood: return "empty-neighborhood";
  case ErrorKind::SingularDesign: return "singular-design";
  case ErrorKind::DegenerateVariance: return "degenerate-variance";
  case ErrorKind::Parse: return "parse-error";
  case ErrorKind::EmptyDataset: return "empty-dataset";
  }
  return "unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  //! True for failures caused by the data/bandwidth combination rather than
  //! by malformed input.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::Convergence || kind_ == ErrorKind::EmptyNeighborhood ||
           kind_ == ErrorKind::SingularDesign || kind_ == ErrorKind::DegenerateVariance ||
           kind_ == ErrorKind::DegenerateWeights;
  }

private:
  ErrorKind kind_;
};

//! Thrown when an iterative Fréchet-mean solver exhausts its iteration budget.
//! Carries the best iterate seen so callers may still use it.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, std::vector<double> best, double objective)
    : Error(ErrorKind::Convergence, what), best_(std::move(best)), objective_(objective) {}

  const std::vector<double>& best_iterate() const noexcept { return best_; }
  double best_objective() const noexcept { return objective_; }

private:
  std::vector<double> best_;
  double objective_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) {
    fail(ErrorKind::InvalidArgument, what);
  }
}

} // namespace torfrech
