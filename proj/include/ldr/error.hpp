#pragma once

#include <stdexcept>
#include <string>

namespace ldr {

/// Base class of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI for its single-line failure report.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class IllConditionedBasis : public Error {
 public:
  IllConditionedBasis(const std::string& what, double condition)
      : Error("ill-conditioned-basis", what), condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error("capacity", what) {}
};

class DegenerateSegment : public Error {
 public:
  explicit DegenerateSegment(const std::string& what)
      : Error("degenerate-segment", what) {}
};

class NoIsolatedIntersection : public Error {
 public:
  explicit NoIsolatedIntersection(const std::string& what)
      : Error("no-isolated-ci", what) {}
};

class AssemblyError : public Error {
 public:
  explicit AssemblyError(const std::string& what) : Error("assembly", what) {}
};

class CoverageError : public Error {
 public:
  CoverageError(const std::string& what, double captured)
      : Error("insufficient-coverage", what), captured_(captured) {}

  double captured() const noexcept { return captured_; }

 private:
  double captured_;
};

class NumericalBlowup : public Error {
 public:
  explicit NumericalBlowup(const std::string& what)
      : Error("numerical-blowup", what) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& what) : Error("alignment", what) {}
};

}  // namespace ldr
