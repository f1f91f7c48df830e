#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ncs/numerics.hpp"
#include "ncs/rng.hpp"

namespace ncs {

/// Sensor sample, stamped with the time it was taken.
struct MeasurementPacket {
  std::int64_t stamp = 0;
  Vec state;
};

/// Buffered control sequence, stamped with its intended first application
/// time. meas_stamp records which measurement the sequence was computed from
/// so the actuator side can log prediction ages.
struct ControlSequencePacket {
  std::int64_t stamp = 0;
  std::int64_t meas_stamp = 0;
  std::vector<Vec> sequence;
};

enum class DelayKind { Constant, UniformInt };
enum class LossKind { None, EveryKth, Bernoulli };

/// Lossy channel with a bounded, possibly time-varying delay.
///   EveryKth: a send at time t succeeds iff t % period == 0.
struct ChannelConfig {
  DelayKind delay_kind = DelayKind::Constant;
  std::int64_t delay_value = 0;  // Constant
  std::int64_t delay_lo = 0;     // UniformInt
  std::int64_t delay_hi = 0;
  LossKind loss_kind = LossKind::None;
  std::int64_t period = 1;   // EveryKth
  double loss_prob = 0.0;    // Bernoulli
};

std::int64_t channel_delay_bound(const ChannelConfig& ch);

struct SendOutcome {
  bool delivered = false;
  std::int64_t delivery_time = -1;
};

/// Decide loss and delay for one send. Loss is drawn first; lost packets do
/// not consume a delay draw.
SendOutcome channel_send(const ChannelConfig& ch, std::int64_t send_time, Rng& rng);

/// Packet with the most recent stamp. Order independent; throws
/// NoMeasurementError when empty.
const MeasurementPacket& latest_measurement(std::span<const MeasurementPacket> packets);

/// One actuator switch to a newer control sequence.
struct SwitchRecord {
  std::int64_t time = 0;            // when the sequence was first applied
  std::int64_t stamp = 0;           // the sequence's application stamp
  std::int64_t meas_stamp = 0;      // measurement the sequence was computed from
  std::int64_t prediction_age = 0;  // time - meas_stamp
};

/// Worst-case prediction age and switch gap over a finished run.
struct DelayStats {
  std::int64_t max_prediction_age = 0;  // max over switches of (time - meas_stamp)
  std::int64_t max_switch_gap = 0;      // max segment length between switches, incl. the tail
};

DelayStats delay_stats(std::span<const SwitchRecord> switches, std::int64_t last_applied_time);

/// Stores delivered control sequences and serves the active one: the stored
/// packet with the maximal stamp <= now. Before anything has activated, a
/// configured default input is applied.
class ActuatorBuffer {
public:
  ActuatorBuffer(Vec default_input) : default_input_(std::move(default_input)) {}

  void insert(ControlSequencePacket pkt, std::int64_t now);

  /// Input to apply at time `now`. Logs a switch when a newer sequence
  /// becomes active; throws StarvationError when the active sequence is
  /// exhausted.
  Vec read(std::int64_t now);

  const std::vector<SwitchRecord>& switches() const { return switches_; }
  std::optional<std::int64_t> active_stamp() const { return active_stamp_; }
  const Vec& default_input() const { return default_input_; }

private:
  std::map<std::int64_t, ControlSequencePacket> stored_;
  std::optional<std::int64_t> active_stamp_;
  std::vector<SwitchRecord> switches_;
  Vec default_input_;
};

}  // namespace ncs
