#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ncs {

/// Base class for all simulator errors.
class SimError : public std::runtime_error {
public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid scenario, model, or solver configuration.
class ConfigError : public SimError {
public:
  using SimError::SimError;
};

/// A state or cost became NaN/Inf; carries the step at which it happened.
class NumericsError : public SimError {
public:
  NumericsError(const std::string& what, std::int64_t step)
      : SimError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::int64_t step() const { return step_; }

private:
  std::int64_t step_;
};

/// The actuator ran out of buffered control values.
class StarvationError : public SimError {
public:
  explicit StarvationError(std::int64_t time)
      : SimError("actuator buffer starved at time " + std::to_string(time)),
        time_(time) {}
  std::int64_t time() const { return time_; }

private:
  std::int64_t time_;
};

/// Asked for the newest measurement of an empty collection.
class NoMeasurementError : public SimError {
public:
  NoMeasurementError() : SimError("no measurement available") {}
};

/// The prediction input record disagrees with the applied inputs.
class ConsistencyError : public SimError {
public:
  ConsistencyError(const std::string& what, std::int64_t time)
      : SimError(what + " (time " + std::to_string(time) + ")"), time_(time) {}
  std::int64_t time() const { return time_; }

private:
  std::int64_t time_;
};

/// Stage cost evaluated too close to its singular set.
class SingularityError : public SimError {
public:
  using SimError::SimError;
};

/// Hard failure inside the optimal control solver.
class SolverError : public SimError {
public:
  using SimError::SimError;
};

/// File I/O failure; message carries the path.
class IoError : public SimError {
public:
  using SimError::SimError;
};

}  // namespace ncs
