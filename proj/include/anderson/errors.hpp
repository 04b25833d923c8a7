#pragma once

#include <stdexcept>
#include <string>

namespace anderson {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Unfolding window carrying (numerically) no spectral mass.
class DegenerateWindowError : public Error {
 public:
  using Error::Error;
};

class DegenerateDensityError : public Error {
 public:
  using Error::Error;
};

class InfeasibleWindowError : public Error {
 public:
  InfeasibleWindowError(const std::string& what, int failed_condition)
      : Error(what), failed_condition_(failed_condition) {}
  /// 1: mass-vs-width lower bound, 2: mass-vs-volume growth threshold.
  [[nodiscard]] int failed_condition() const noexcept { return failed_condition_; }

 private:
  int failed_condition_;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class InsufficientProfileError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0, std::string field = {})
      : Error(what), line_(line), field_(std::move(field)) {}
  [[nodiscard]] int line() const noexcept { return line_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

class StageError : public Error {
 public:
  StageError(const std::string& stage, long realization, const std::string& what)
      : Error("stage '" + stage + "' failed" +
              (realization >= 0 ? " at realization " + std::to_string(realization) : std::string{}) +
              ": " + what),
        stage_(stage),
        realization_(realization) {}
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
  [[nodiscard]] long realization() const noexcept { return realization_; }

 private:
  std::string stage_;
  long realization_;
};

/// A report or plot needs a stage that the run did not execute.
class StageMissingError : public Error {
 public:
  explicit StageMissingError(const std::string& toggle)
      : Error("stage output missing; enable '" + toggle + " = true' and rerun"), toggle_(toggle) {}
  [[nodiscard]] const std::string& toggle() const noexcept { return toggle_; }

 private:
  std::string toggle_;
};

}  // namespace anderson
