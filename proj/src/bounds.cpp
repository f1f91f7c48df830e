#include "ncs/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "ncs/errors.hpp"

namespace ncs {

void ErrorBound::validate() const {
  if (growth == GrowthMode::Exponential && lipschitz <= 0.0)
    throw ConfigError("error bound: exponential growth needs lipschitz > 0");
  if (lipschitz < 0.0) throw ConfigError("error bound: lipschitz must be >= 0");
  if (step_error_coeff < 0.0) throw ConfigError("error bound: step_error_coeff must be >= 0");
  if (step_size <= 0.0) throw ConfigError("error bound: step_size must be > 0");
  if (order < 1) throw ConfigError("error bound: order must be >= 1");
  if (disturbance_gain <= 0.0) throw ConfigError("error bound: disturbance_gain must be > 0");
}

double ErrorBound::prediction(std::int64_t k, double r) const {
  if (k < 0 || r < 0.0) throw ConfigError("error bound: negative argument");
  const double kh = step_error_coeff * std::pow(step_size, order);
  if (growth == GrowthMode::Linear) return static_cast<double>(k) * kh + r;
  const double lk = lipschitz * static_cast<double>(k);
  return std::expm1(lk) * kh + std::exp(lk) * r;
}

double ErrorBound::disturbance(std::int64_t k, double r) const {
  if (k < 0 || r < 0.0) throw ConfigError("error bound: negative argument");
  const double rho = disturbance_gain * r;
  if (growth == GrowthMode::Linear) return static_cast<double>(k) * rho;
  return std::expm1(lipschitz * static_cast<double>(k)) * rho / lipschitz;
}

const MismatchEntry* PredictionErrorSeries::at(std::int64_t t) const {
  if (begin_time < 0 || t < begin_time) return nullptr;
  const auto idx = static_cast<std::size_t>(t - begin_time);
  if (idx >= entries.size()) return nullptr;
  return &entries[idx];
}

PredictionErrorSeries extract_prediction_errors(std::span<const SentPacket> sent,
                                                std::span<const SwitchRecord> switches,
                                                std::span<const Vec> states,
                                                std::int64_t end_time) {
  PredictionErrorSeries out;
  if (switches.empty()) return out;
  out.begin_time = switches.front().time;

  auto packet_by_stamp = [&](std::int64_t stamp) -> const SentPacket& {
    for (const auto& p : sent) {
      if (p.stamp == stamp) return p;
    }
    throw ConsistencyError("prediction record missing for switch", stamp);
  };

  for (std::size_t i = 0; i < switches.size(); ++i) {
    const SwitchRecord& sw = switches[i];
    const std::int64_t seg_end =
        (i + 1 < switches.size()) ? switches[i + 1].time - 1 : end_time;
    const SentPacket& pkt = packet_by_stamp(sw.stamp);
    for (std::int64_t t = sw.time; t <= std::min(seg_end, end_time); ++t) {
      const std::int64_t idx = t - sw.time;
      if (idx >= static_cast<std::int64_t>(pkt.prediction.size()))
        throw ConsistencyError("prediction record shorter than applied segment", t);
      const Vec& pred = pkt.prediction[static_cast<std::size_t>(idx)];
      const Vec& real = states[static_cast<std::size_t>(t)];
      MismatchEntry e;
      e.time = t;
      e.hi.resize(pred.size());
      e.lo.resize(pred.size());
      for (std::size_t c = 0; c < pred.size(); ++c) {
        const DoublePair d = exact_diff(pred[c], real[c]);
        e.hi[c] = d.hi;
        e.lo[c] = d.lo;
      }
      e.norm = norm2(e.hi);
      out.sup_norm = std::max(out.sup_norm, e.norm);
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

BoundReport check_error_bound(const PredictionErrorSeries& series, const DelayStats& stats,
                              std::span<const Vec> w_log, const ErrorBound& bound) {
  bound.validate();
  BoundReport rep;
  rep.max_prediction_age = stats.max_prediction_age;
  rep.max_switch_gap = stats.max_switch_gap;
  for (const Vec& w : w_log) rep.w_sup = std::max(rep.w_sup, norm2(w));
  const std::int64_t k = stats.max_prediction_age + stats.max_switch_gap;
  rep.v_bound = bound.prediction(k, 0.0) + bound.disturbance(k, rep.w_sup);
  rep.v_observed = series.sup_norm;
  rep.satisfied = rep.v_observed <= rep.v_bound;
  return rep;
}

Trajectory replay_without_delays(const PlantModel& model, const GeneratorConfig& gen,
                                 const Vec& x0, const PredictionErrorSeries& series,
                                 std::span<const SwitchRecord> switches,
                                 std::span<const SentPacket> sent, std::span<const Vec> w_log,
                                 const Vec& default_input, std::int64_t steps) {
  Trajectory tr;
  tr.start_time = 0;
  tr.states.push_back(x0);
  Vec x = x0;

  auto packet_by_stamp = [&](std::int64_t stamp) -> const SentPacket& {
    for (const auto& p : sent) {
      if (p.stamp == stamp) return p;
    }
    throw ConsistencyError("replay: missing packet for switch", stamp);
  };

  std::size_t next_switch = 0;
  std::vector<Vec> current;
  std::int64_t current_start = -1;

  for (std::int64_t n = 0; n < steps; ++n) {
    if (next_switch < switches.size() && switches[next_switch].time == n) {
      const SwitchRecord& sw = switches[next_switch];
      const SentPacket& pkt = packet_by_stamp(sw.stamp);
      const MismatchEntry* v = series.at(n);
      if (!v) throw ConsistencyError("replay: no mismatch entry at switch", n);
      Vec arg(x.size());
      for (std::size_t c = 0; c < x.size(); ++c)
        arg[c] = recombine(x[c], {v->hi[c], v->lo[c]});
      const GeneratedSequence g =
          generate_sequence(gen, model, arg, static_cast<int>(pkt.sequence.size()),
                            pkt.warm_start);
      current = g.controls;
      current_start = n;
      ++next_switch;
    }
    Vec u;
    if (current_start < 0) {
      u = default_input;
    } else {
      const std::int64_t idx = n - current_start;
      if (idx >= static_cast<std::int64_t>(current.size())) throw StarvationError(n);
      u = current[static_cast<std::size_t>(idx)];
    }
    x = model.exact_step(x, u, w_log[static_cast<std::size_t>(n)]);
    if (!all_finite(x)) throw NumericsError("replay: non-finite state", n + 1);
    tr.states.push_back(x);
    tr.inputs.push_back(std::move(u));
  }
  return tr;
}

}  // namespace ncs
