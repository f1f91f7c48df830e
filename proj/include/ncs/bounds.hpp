#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ncs/compensation.hpp"
#include "ncs/dynamics.hpp"
#include "ncs/numerics.hpp"
#include "ncs/transport.hpp"

namespace ncs {

enum class GrowthMode { Exponential, Linear };

/// Prediction-error and disturbance-propagation bounds as functions of the
/// number of elapsed steps k and an error magnitude r.
///
/// Exponential mode (open-loop unstable plants):
///   prediction(k, r)  = (e^{Lk} - 1) K h^p + e^{Lk} r
///   disturbance(k, r) = (e^{Lk} - 1) rho(r) / L
/// Linear mode (open-loop stable plants):
///   prediction(k, r)  = k K h^p + r
///   disturbance(k, r) = k rho(r)
/// with rho(r) = disturbance_gain * r. Parameters are supplied per scenario.
struct ErrorBound {
  double lipschitz = 0.0;        // L, per-step exponent
  double step_error_coeff = 0.0; // K
  double step_size = 0.0;        // h
  int order = 1;                 // p
  GrowthMode growth = GrowthMode::Exponential;
  double disturbance_gain = 1.0; // rho(r) = gain * r

  void validate() const;
  double prediction(std::int64_t k, double r) const;
  double disturbance(std::int64_t k, double r) const;
};

/// Per-time difference between the predicted closed-loop state and the real
/// state, stored as exact two-double values so the delay-free replay can
/// reconstruct the predicted state bit for bit.
struct MismatchEntry {
  std::int64_t time = 0;
  Vec hi;
  Vec lo;
  double norm = 0.0;  // Euclidean norm of hi
};

struct PredictionErrorSeries {
  std::int64_t begin_time = -1;  // first switch time; -1 when no switch happened
  std::vector<MismatchEntry> entries;
  double sup_norm = 0.0;

  const MismatchEntry* at(std::int64_t t) const;
};

/// v(t) = prediction(t) - state(t) for every applied time from the first
/// switch to end_time, using the packet active at t.
PredictionErrorSeries extract_prediction_errors(std::span<const SentPacket> sent,
                                                std::span<const SwitchRecord> switches,
                                                std::span<const Vec> states,
                                                std::int64_t end_time);

struct BoundReport {
  std::int64_t max_prediction_age = 0;
  std::int64_t max_switch_gap = 0;
  double w_sup = 0.0;
  double v_bound = 0.0;
  double v_observed = 0.0;
  bool satisfied = false;
};

/// Evaluate the composite bound prediction(k,0) + disturbance(k, ||w||) with
/// k = max_prediction_age + max_switch_gap against the observed sup norm.
BoundReport check_error_bound(const PredictionErrorSeries& series, const DelayStats& stats,
                              std::span<const Vec> w_log, const ErrorBound& bound);

/// Simulate the delay-free loop in which the per-switch prediction errors are
/// injected as measurement errors: at each switch the generator is re-invoked
/// from state + v(switch) (reconstructed exactly), between switches the
/// resulting sequence plays out, and the same disturbances apply. With v
/// extracted from a delayed run this reproduces that run bit for bit.
Trajectory replay_without_delays(const PlantModel& model, const GeneratorConfig& gen,
                                 const Vec& x0, const PredictionErrorSeries& series,
                                 std::span<const SwitchRecord> switches,
                                 std::span<const SentPacket> sent, std::span<const Vec> w_log,
                                 const Vec& default_input, std::int64_t steps);

}  // namespace ncs
