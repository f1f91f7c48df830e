#include "ncs/compensation.hpp"

#include <algorithm>
#include <cstring>

#include "ncs/errors.hpp"

namespace ncs {

namespace {

bool bits_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

/// Delivered packet with the maximal stamp <= t, or nullptr.
const SentPacket* active_packet_at(std::span<const SentPacket> sent, std::int64_t t) {
  const SentPacket* best = nullptr;
  for (auto it = sent.rbegin(); it != sent.rend(); ++it) {
    if (it->delivered && it->stamp <= t) {
      best = &*it;
      break;  // stamps are increasing, the first hit from the back is maximal
    }
  }
  return best;
}

Vec resolved_from(std::span<const SentPacket> sent, const Vec& default_input, std::int64_t t) {
  const SentPacket* pkt = active_packet_at(sent, t);
  if (!pkt) return default_input;
  const std::int64_t idx = t - pkt->stamp;
  if (idx >= static_cast<std::int64_t>(pkt->sequence.size())) throw StarvationError(t);
  return pkt->sequence[static_cast<std::size_t>(idx)];
}

}  // namespace

GeneratedSequence generate_sequence(const GeneratorConfig& gen, const PlantModel& model,
                                    const Vec& x0, int m, std::span<const Vec> warm_start) {
  if (m < 1) throw ConfigError("generate_sequence: m must be >= 1");
  if (!all_finite(x0)) throw ConfigError("generate_sequence: non-finite state");
  GeneratedSequence out;
  if (gen.kind == GeneratorConfig::Kind::Static) {
    Vec x = x0;
    out.prediction.push_back(x);
    for (int q = 0; q < m; ++q) {
      Vec u = mat_vec(gen.feedback.gain, x);
      project_to_ball(u, gen.feedback.saturation);
      out.controls.push_back(u);
      if (q + 1 < m) {
        x = model.approx_step(x, u);
        if (!all_finite(x)) throw NumericsError("generate_sequence: non-finite prediction", q + 1);
        out.prediction.push_back(x);
      }
    }
  } else {
    if (gen.mpc.horizon < m) throw ConfigError("generate_sequence: horizon < sequence length");
    const OcpSolution sol = solve_ocp(gen.mpc, model, x0, warm_start);
    out.controls.assign(sol.controls.begin(), sol.controls.begin() + m);
    out.prediction.assign(sol.predicted_states.begin(), sol.predicted_states.begin() + m);
    out.full_solution = sol.controls;
    out.solver_iterations = sol.iterations;
    out.solver_converged = sol.converged;
  }
  return out;
}

Compensator::Compensator(CompensatorConfig config, PlantModel model)
    : config_(std::move(config)), model_(std::move(model)) {
  if (config_.tau_max < 0) throw ConfigError("compensator: tau_max must be >= 0");
  if (config_.sequence_length <= 1) throw ConfigError("compensator: sequence length must be > 1");
  if (static_cast<int>(config_.default_input.size()) != model_.input_dim)
    throw ConfigError("compensator: default input dimension");
}

void Compensator::on_measurement(const MeasurementPacket& pkt) {
  if (static_cast<int>(pkt.state.size()) != model_.state_dim)
    throw ConfigError("compensator: measurement dimension");
  if (!newest_ || pkt.stamp > newest_->stamp) newest_ = pkt;
}

Vec Compensator::resolved_input(std::int64_t t) const {
  return resolved_from(sent_, config_.default_input, t);
}

Vec Compensator::predict_state(const MeasurementPacket& meas, std::int64_t target_n) const {
  if (target_n < meas.stamp) throw ConfigError("predict_state: target before measurement");
  if (target_n == meas.stamp) return meas.state;
  std::vector<Vec> inputs;
  inputs.reserve(static_cast<std::size_t>(target_n - meas.stamp));
  for (std::int64_t k = meas.stamp; k < target_n; ++k) inputs.push_back(resolved_input(k));
  const Trajectory tr = iterate_approx(model_, meas.stamp, meas.state, inputs, target_n);
  return tr.states.back();
}

std::optional<ControlSequencePacket> Compensator::step(std::int64_t now) {
  if (!newest_) return std::nullopt;  // idle until the first measurement
  const std::int64_t stamp = now + config_.tau_max;
  const Vec predicted = predict_state(*newest_, stamp);

  SentPacket rec;
  rec.stamp = stamp;
  rec.meas_stamp = newest_->stamp;
  rec.warm_start = last_solution_;
  GeneratedSequence gen = generate_sequence(config_.generator, model_, predicted,
                                            config_.sequence_length, last_solution_);
  rec.sequence = gen.controls;
  rec.prediction = std::move(gen.prediction);
  rec.solver_iterations = gen.solver_iterations;
  rec.solver_converged = gen.solver_converged;

  if (config_.generator.kind == GeneratorConfig::Kind::Mpc) {
    // warm start for the next cycle: shift by one step, repeat the last entry
    last_solution_ = std::move(gen.full_solution);
    if (!last_solution_.empty()) {
      last_solution_.erase(last_solution_.begin());
      last_solution_.push_back(last_solution_.back());
    }
  }

  if (!sent_.empty() && sent_.back().stamp >= stamp)
    throw ConfigError("compensator: stamps must increase");
  sent_.push_back(std::move(rec));
  return ControlSequencePacket{stamp, sent_.back().meas_stamp, sent_.back().sequence};
}

void Compensator::on_send_outcome(std::int64_t stamp, bool delivered) {
  for (auto it = sent_.rbegin(); it != sent_.rend(); ++it) {
    if (it->stamp == stamp) {
      it->delivered = delivered;
      return;
    }
  }
  throw ConfigError("compensator: outcome for unknown stamp");
}

LedgerTables materialize_ledger(std::span<const SentPacket> sent, const Vec& default_input,
                                std::int64_t t_begin, std::int64_t t_end) {
  LedgerTables out;
  for (std::int64_t t = t_begin; t <= t_end; ++t) {
    const SentPacket* pkt = active_packet_at(sent, t);
    if (!pkt) {
      out.inputs.emplace(t, default_input);
      continue;
    }
    const std::int64_t idx = t - pkt->stamp;
    if (idx >= static_cast<std::int64_t>(pkt->sequence.size())) throw StarvationError(t);
    out.inputs.emplace(t, pkt->sequence[static_cast<std::size_t>(idx)]);
    out.predictions.emplace(t, pkt->prediction[static_cast<std::size_t>(idx)]);
  }
  return out;
}

ConsistencyReport audit_consistency(const LedgerTables& ledger, std::span<const Vec> applied,
                                    std::span<const SwitchRecord> switches,
                                    std::span<const SentPacket> sent, const Vec& default_input) {
  ConsistencyReport rep;
  auto flag = [&rep](std::int64_t t) {
    ++rep.violations;
    if (rep.first_violation < 0) rep.first_violation = t;
  };

  for (std::int64_t t = 0; t < static_cast<std::int64_t>(applied.size()); ++t) {
    ++rep.checked;
    const auto it = ledger.inputs.find(t);
    if (it == ledger.inputs.end() || !bits_equal(it->second, applied[static_cast<std::size_t>(t)])) {
      flag(t);
      continue;
    }
    // second route: replay the applied value from the switch log directly
    const SwitchRecord* seg = nullptr;
    for (const auto& sw : switches) {
      if (sw.time <= t) seg = &sw;
    }
    Vec expect;
    if (!seg) {
      expect = default_input;
    } else {
      const SentPacket* pkt = nullptr;
      for (const auto& p : sent) {
        if (p.stamp == seg->stamp) pkt = &p;
      }
      if (!pkt) {
        flag(t);
        continue;
      }
      const std::int64_t idx = t - seg->time;
      if (idx < 0 || idx >= static_cast<std::int64_t>(pkt->sequence.size())) {
        flag(t);
        continue;
      }
      expect = pkt->sequence[static_cast<std::size_t>(idx)];
    }
    if (!bits_equal(expect, applied[static_cast<std::size_t>(t)])) flag(t);
  }
  rep.ok = rep.violations == 0;
  return rep;
}

}  // namespace ncs
