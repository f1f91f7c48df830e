#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ncs/dynamics.hpp"
#include "ncs/mpc.hpp"
#include "ncs/numerics.hpp"
#include "ncs/transport.hpp"

namespace ncs {

/// u = sat(G x); saturation <= 0 disables the clamp.
struct StaticFeedback {
  Mat gain;
  double saturation = 0.0;
};

struct GeneratorConfig {
  enum class Kind { Static, Mpc };
  Kind kind = Kind::Static;
  StaticFeedback feedback;
  MpcConfig mpc;
};

struct CompensatorConfig {
  std::int64_t tau_max = 0;  // upper bound on computation + actuation delay
  int sequence_length = 2;   // m, controls per packet; must be > 1
  Vec default_input;         // applied before the first sequence activates
  GeneratorConfig generator;
};

/// Controller-side record of one computed sequence. `prediction[q]` is the
/// predicted state at time stamp + q, rolled with the approximate model under
/// the packet's own controls, so entry 0 is the state the generator ran from.
struct SentPacket {
  std::int64_t stamp = 0;
  std::int64_t meas_stamp = 0;
  std::vector<Vec> sequence;    // sequence_length controls
  std::vector<Vec> prediction;  // sequence_length states
  std::vector<Vec> warm_start;  // MPC warm start used (empty for static)
  bool delivered = false;
  int solver_iterations = 0;
  bool solver_converged = true;
};

struct GeneratedSequence {
  std::vector<Vec> controls;
  std::vector<Vec> prediction;
  std::vector<Vec> full_solution;  // MPC only: all horizon controls
  int solver_iterations = 0;
  bool solver_converged = true;
};

/// Produce the buffered control sequence from a predicted state: static case
/// iterates the feedback along the predictor, MPC case solves the
/// finite-horizon problem and emits the first `m` controls.
GeneratedSequence generate_sequence(const GeneratorConfig& gen, const PlantModel& model,
                                    const Vec& x0, int m, std::span<const Vec> warm_start = {});

/// The controller: keeps the newest measurement, predicts forward with the
/// recorded prediction inputs, generates and stamps sequences, and maintains
/// the send log that realizes prediction consistency. Delivery outcomes are
/// reported back on a lossless logical channel (on_send_outcome); entries of
/// lost packets never take part in input resolution.
class Compensator {
public:
  Compensator(CompensatorConfig config, PlantModel model);

  void on_measurement(const MeasurementPacket& pkt);

  /// One controller cycle at time `now`. Returns the packet to transmit, or
  /// nothing while no measurement has ever arrived.
  std::optional<ControlSequencePacket> step(std::int64_t now);

  void on_send_outcome(std::int64_t stamp, bool delivered);

  /// Prediction input at time t: the delivered packet with the maximal stamp
  /// <= t supplies element t - stamp; before the first delivered stamp the
  /// startup default applies. Mirrors the actuator's selection rule exactly.
  Vec resolved_input(std::int64_t t) const;

  /// Predicted state at target_n from a measurement, using the resolved
  /// prediction inputs. target_n == stamp returns the measurement itself.
  Vec predict_state(const MeasurementPacket& meas, std::int64_t target_n) const;

  const std::vector<SentPacket>& sent() const { return sent_; }
  const CompensatorConfig& config() const { return config_; }
  std::optional<MeasurementPacket> newest_measurement() const { return newest_; }

private:
  CompensatorConfig config_;
  PlantModel model_;
  std::optional<MeasurementPacket> newest_;
  std::vector<SentPacket> sent_;  // stamps strictly increasing
  std::vector<Vec> last_solution_;
};

/// Per-time tables of the unique prediction inputs and predicted states that
/// determined the applied inputs, materialized from the send log.
struct LedgerTables {
  std::map<std::int64_t, Vec> inputs;       // time -> prediction input
  std::map<std::int64_t, Vec> predictions;  // time -> predicted closed-loop state
};

LedgerTables materialize_ledger(std::span<const SentPacket> sent, const Vec& default_input,
                                std::int64_t t_begin, std::int64_t t_end);

struct ConsistencyReport {
  std::int64_t checked = 0;
  std::int64_t violations = 0;
  std::int64_t first_violation = -1;
  bool ok = true;
};

/// Post-run audit: every applied input must equal the recorded prediction
/// input bit for bit, and must equal the active packet's sequence element
/// according to the switch log. Report-only.
ConsistencyReport audit_consistency(const LedgerTables& ledger, std::span<const Vec> applied,
                                    std::span<const SwitchRecord> switches,
                                    std::span<const SentPacket> sent, const Vec& default_input);

}  // namespace ncs
