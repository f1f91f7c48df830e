#include "ncs/transport.hpp"

#include <algorithm>

#include "ncs/errors.hpp"

namespace ncs {

std::int64_t channel_delay_bound(const ChannelConfig& ch) {
  switch (ch.delay_kind) {
    case DelayKind::Constant:
      return ch.delay_value;
    case DelayKind::UniformInt:
      return ch.delay_hi;
  }
  return 0;
}

SendOutcome channel_send(const ChannelConfig& ch, std::int64_t send_time, Rng& rng) {
  if (send_time < 0) throw ConfigError("channel_send: send_time must be >= 0");
  bool lost = false;
  switch (ch.loss_kind) {
    case LossKind::None:
      break;
    case LossKind::EveryKth:
      if (ch.period < 1) throw ConfigError("channel: period must be >= 1");
      lost = (send_time % ch.period) != 0;
      break;
    case LossKind::Bernoulli:
      lost = rng.bernoulli(ch.loss_prob);
      break;
  }
  if (lost) return {false, -1};

  std::int64_t delay = 0;
  switch (ch.delay_kind) {
    case DelayKind::Constant:
      delay = ch.delay_value;
      break;
    case DelayKind::UniformInt:
      if (ch.delay_lo > ch.delay_hi) throw ConfigError("channel: delay_lo > delay_hi");
      delay = rng.uniform_int(ch.delay_lo, ch.delay_hi);
      break;
  }
  if (delay < 0) throw ConfigError("channel: negative delay");
  return {true, send_time + delay};
}

const MeasurementPacket& latest_measurement(std::span<const MeasurementPacket> packets) {
  if (packets.empty()) throw NoMeasurementError();
  const MeasurementPacket* best = &packets[0];
  for (const auto& p : packets) {
    if (p.stamp > best->stamp) best = &p;
  }
  return *best;
}

DelayStats delay_stats(std::span<const SwitchRecord> switches, std::int64_t last_applied_time) {
  DelayStats s;
  for (std::size_t i = 0; i < switches.size(); ++i) {
    s.max_prediction_age = std::max(s.max_prediction_age, switches[i].prediction_age);
    if (i + 1 < switches.size())
      s.max_switch_gap = std::max(s.max_switch_gap, switches[i + 1].time - switches[i].time);
  }
  if (!switches.empty())
    s.max_switch_gap = std::max(s.max_switch_gap, last_applied_time - switches.back().time + 1);
  return s;
}

void ActuatorBuffer::insert(ControlSequencePacket pkt, std::int64_t now) {
  (void)now;  // delivery time only matters for when the packet is inserted
  if (pkt.sequence.empty()) throw ConfigError("buffer: empty control sequence");
  stored_.insert_or_assign(pkt.stamp, std::move(pkt));
}

Vec ActuatorBuffer::read(std::int64_t now) {
  auto it = stored_.upper_bound(now);
  if (it == stored_.begin()) {
    // nothing eligible yet: startup phase
    return default_input_;
  }
  --it;
  const ControlSequencePacket& pkt = it->second;
  if (!active_stamp_ || pkt.stamp > *active_stamp_) {
    switches_.push_back({now, pkt.stamp, pkt.meas_stamp, now - pkt.meas_stamp});
    active_stamp_ = pkt.stamp;
  }
  const std::int64_t idx = now - switches_.back().time;
  if (idx < 0 || idx >= static_cast<std::int64_t>(pkt.sequence.size()))
    throw StarvationError(now);
  return pkt.sequence[static_cast<std::size_t>(idx)];
}

}  // namespace ncs
