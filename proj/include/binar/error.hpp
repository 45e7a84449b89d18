#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace binar {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// All observations sit at 0 or all at n; the partial likelihood has no
/// finite maximizer.
class SeparationError : public Error {
 public:
  using Error::Error;
};

class SingularHessianError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

class CholeskyError : public Error {
 public:
  using Error::Error;
};

class MonitorTerminatedError : public Error {
 public:
  using Error::Error;
};

class ThresholdUnavailableError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; `path()` names the offending field
/// (JSON-pointer style, e.g. "/exo/sd").
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Raised when a (state, week-of-year) pair has no baseline mean.
class MissingBaselineError : public Error {
 public:
  using Missing = std::vector<std::pair<std::string, int>>;
  explicit MissingBaselineError(Missing missing);
  const Missing& missing() const noexcept { return missing_; }

 private:
  Missing missing_;
};

/// Raised when a (state, iso_year, week) inside the evaluation window has
/// no panel row.
class CoverageError : public Error {
 public:
  struct Gap {
    std::string state;
    int iso_year;
    int week;
  };
  explicit CoverageError(std::vector<Gap> gaps);
  const std::vector<Gap>& gaps() const noexcept { return gaps_; }

 private:
  std::vector<Gap> gaps_;
};

}  // namespace binar
