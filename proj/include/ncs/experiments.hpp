#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncs/bounds.hpp"
#include "ncs/compensation.hpp"
#include "ncs/dynamics.hpp"
#include "ncs/transport.hpp"

namespace ncs {

enum class PlantKind { DoubleIntegrator, Scalar };

/// Channel description at scenario level. track_tau_max makes the delay a
/// constant equal to the scenario's current tau_max (useful in sweeps).
struct ChannelSpec {
  ChannelConfig config;
  bool track_tau_max = false;
};

/// Orbit-deviation metric settings. settle_steps extra steps after the first
/// switch are excluded from the reported maximum so startup re-entrainment
/// does not mask the steady regime.
struct MetricConfig {
  int settle_steps = 0;
  double radius = 6.0;
  double speed = 10.0;
};

struct Scenario {
  std::string name = "scenario";

  PlantKind plant_kind = PlantKind::DoubleIntegrator;
  double plant_a = 1.0;  // scalar plant: xdot = a x + u
  double sample_time = 0.1;
  Predictor predictor = Predictor::Exact;

  Vec x0;
  std::int64_t steps = 100;
  std::uint64_t seed = 1;
  double disturbance_bound = 0.0;

  std::int64_t tau_max = 0;
  int sequence_length = 2;
  Vec default_input;

  GeneratorConfig generator;
  ChannelSpec sensor;
  ChannelSpec actuator;

  ErrorBound bounds;
  MetricConfig metric;
};

PlantModel build_plant(const Scenario& s);
void validate_scenario(const Scenario& s);

/// Parse the flat key = value scenario format (see README for the schema).
Scenario scenario_from_file(const std::string& path);
Scenario scenario_from_string(const std::string& text, const std::string& origin = "<string>");

enum class RunStatus { Ok, Starvation, SolverFailure, NumericalBlowup };
const char* to_string(RunStatus s);

struct RunRecord {
  Scenario scenario;
  RunStatus status = RunStatus::Ok;
  std::string error;

  std::vector<Vec> states;        // steps + 1 on success
  std::vector<Vec> inputs;        // steps
  std::vector<Vec> disturbances;  // steps

  std::vector<SwitchRecord> switches;
  DelayStats delays;
  std::vector<SentPacket> packets;
  LedgerTables ledger;
  ConsistencyReport consistency;
  PredictionErrorSeries mismatch;
  BoundReport bound;
  bool bound_valid = false;

  std::vector<double> deviation;  // per state node, NaN for non-orbit plants
  double max_deviation = 0.0;     // over the metric window
  std::int64_t first_switch = -1;
  int unconverged_solves = 0;
  double wall_seconds = 0.0;
};

/// Full deterministic simulation of one scenario: per step the sensor
/// samples and sends, deliveries reach the controller, the controller
/// computes and sends, deliveries reach the actuator, and the plant applies
/// the active buffered input. Post-run: consistency audit, prediction-error
/// extraction, bound check, deviation metric.
RunRecord run_scenario(const Scenario& s);

struct SweepRow {
  std::int64_t tau_max = 0;
  RunStatus status = RunStatus::Ok;
  std::int64_t tau_inf = 0;
  std::int64_t delta_sigma_inf = 0;
  double max_deviation = 0.0;
  double v_bound = 0.0;
  double v_observed = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RunRecord> records;
};

/// One run per tau_max value with the identical disturbance realization
/// (same seed). Per-run failures are recorded and the sweep continues.
SweepResult sweep_tau_max(const Scenario& base, std::span<const std::int64_t> taus);

/// Orbit-tracking MPC scenario: two double integrators, every-third sensor
/// transmission successful, disturbance bound 0.1. Basis of the tau_max sweep.
Scenario make_circle_scenario();

/// Deterministic randomized scenario for the invariant/bound suites: random
/// delays and loss patterns on both channels, both generator kinds, all three
/// predictors.
Scenario make_random_scenario(std::uint64_t base_seed, int index);

double orbit_deviation(const Vec& x, double radius, double speed);

// --- report emission ------------------------------------------------------

std::string format_double(double v);  // shortest round-trip-stable decimal

void write_run_csv(const std::string& path, const RunRecord& rec);
void write_ledger_csv(const std::string& path, const RunRecord& rec);
void write_bounds_csv(const std::string& path, std::span<const RunRecord> recs);
void write_sweep_csv(const std::string& path, const SweepResult& sweep);
void write_summary(const std::string& path, std::span<const RunRecord> recs,
                   const SweepResult* sweep);

/// Write runs.csv / ledger.csv (first record), bounds.csv, sweep.csv (when a
/// sweep is given), and summary.txt into out_dir.
void emit_report(const std::string& out_dir, std::span<const RunRecord> recs,
                 const SweepResult* sweep);

}  // namespace ncs
