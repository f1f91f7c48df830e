#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncs/errors.hpp"
#include "ncs/experiments.hpp"

namespace ncs {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  return out;
}

void write_header(std::ostream& out, int dim_x, int dim_u) {
  out << "n";
  for (int i = 1; i <= dim_x; ++i) out << ",x" << i;
  for (int i = 1; i <= dim_u; ++i) out << ",u" << i;
  for (int i = 1; i <= dim_x; ++i) out << ",w" << i;
  out << ",sigma_active,tau_active,v_norm,deviation\n";
}

}  // namespace

void write_run_csv(const std::string& path, const RunRecord& rec) {
  auto out = open_out(path);
  const int dim_x = static_cast<int>(rec.scenario.x0.size());
  const int dim_u = static_cast<int>(rec.scenario.default_input.size());
  write_header(out, dim_x, dim_u);

  std::size_t sw = 0;
  for (std::size_t n = 0; n < rec.states.size(); ++n) {
    out << n;
    for (double v : rec.states[n]) out << ',' << format_double(v);
    const bool applied = n < rec.inputs.size();
    for (int i = 0; i < dim_u; ++i)
      out << ',' << (applied ? format_double(rec.inputs[n][static_cast<std::size_t>(i)]) : "");
    for (int i = 0; i < dim_x; ++i)
      out << ','
          << (applied ? format_double(rec.disturbances[n][static_cast<std::size_t>(i)]) : "");

    while (sw + 1 < rec.switches.size() &&
           rec.switches[sw + 1].time <= static_cast<std::int64_t>(n))
      ++sw;
    const bool active = !rec.switches.empty() &&
                        rec.switches[0].time <= static_cast<std::int64_t>(n) && applied;
    out << ',' << (active ? std::to_string(rec.switches[sw].time) : "");
    out << ',' << (active ? std::to_string(rec.switches[sw].prediction_age) : "");
    const MismatchEntry* m = rec.mismatch.at(static_cast<std::int64_t>(n));
    out << ',' << (m ? format_double(m->norm) : "");
    out << ',' << format_double(rec.deviation[n]);
    out << '\n';
  }
}

void write_ledger_csv(const std::string& path, const RunRecord& rec) {
  auto out = open_out(path);
  const int dim_x = static_cast<int>(rec.scenario.x0.size());
  const int dim_u = static_cast<int>(rec.scenario.default_input.size());
  out << "n";
  for (int i = 1; i <= dim_u; ++i) out << ",u_applied" << i;
  for (int i = 1; i <= dim_u; ++i) out << ",u_pred" << i;
  for (int i = 1; i <= dim_x; ++i) out << ",x_pred" << i;
  out << ",consistent\n";
  for (std::size_t n = 0; n < rec.inputs.size(); ++n) {
    out << n;
    for (double v : rec.inputs[n]) out << ',' << format_double(v);
    const auto ui = rec.ledger.inputs.find(static_cast<std::int64_t>(n));
    for (int i = 0; i < dim_u; ++i)
      out << ','
          << (ui != rec.ledger.inputs.end() ? format_double(ui->second[static_cast<std::size_t>(i)])
                                            : "");
    const auto xi = rec.ledger.predictions.find(static_cast<std::int64_t>(n));
    for (int i = 0; i < dim_x; ++i)
      out << ','
          << (xi != rec.ledger.predictions.end()
                  ? format_double(xi->second[static_cast<std::size_t>(i)])
                  : "");
    const bool consistent =
        ui != rec.ledger.inputs.end() && ui->second == rec.inputs[n];
    out << ',' << (consistent ? 1 : 0) << '\n';
  }
}

void write_bounds_csv(const std::string& path, std::span<const RunRecord> recs) {
  auto out = open_out(path);
  out << "seed,tau_max,tau_inf,delta_sigma_inf,w_sup,v_bound,v_observed,satisfied\n";
  for (const RunRecord& r : recs) {
    if (!r.bound_valid) continue;
    out << r.scenario.seed << ',' << r.scenario.tau_max << ',' << r.bound.max_prediction_age
        << ',' << r.bound.max_switch_gap << ',' << format_double(r.bound.w_sup) << ','
        << format_double(r.bound.v_bound) << ',' << format_double(r.bound.v_observed) << ','
        << (r.bound.satisfied ? 1 : 0) << '\n';
  }
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  auto out = open_out(path);
  out << "tau_max,tau_inf,delta_sigma_inf,max_deviation,v_bound,v_observed,status\n";
  for (const SweepRow& r : sweep.rows) {
    out << r.tau_max << ',' << r.tau_inf << ',' << r.delta_sigma_inf << ','
        << format_double(r.max_deviation) << ',' << format_double(r.v_bound) << ','
        << format_double(r.v_observed) << ',' << to_string(r.status) << '\n';
  }
}

void write_summary(const std::string& path, std::span<const RunRecord> recs,
                   const SweepResult* sweep) {
  auto out = open_out(path);
  out << "runs: " << recs.size() << '\n';
  for (const RunRecord& r : recs) {
    out << "- " << r.scenario.name << " seed=" << r.scenario.seed
        << " tau_max=" << r.scenario.tau_max << " status=" << to_string(r.status);
    if (r.status != RunStatus::Ok) out << " error=\"" << r.error << '"';
    out << " consistency_violations=" << r.consistency.violations
        << " max_deviation=" << format_double(r.max_deviation);
    if (r.bound_valid)
      out << " v_observed=" << format_double(r.bound.v_observed)
          << " v_bound=" << format_double(r.bound.v_bound)
          << " satisfied=" << (r.bound.satisfied ? 1 : 0);
    if (r.unconverged_solves > 0) out << " unconverged_solves=" << r.unconverged_solves;
    out << " wall_s=" << r.wall_seconds << '\n';
  }
  if (sweep) {
    out << "sweep rows: " << sweep->rows.size() << '\n';
    for (const SweepRow& r : sweep->rows)
      out << "- tau_max=" << r.tau_max << " max_deviation=" << format_double(r.max_deviation)
          << " status=" << to_string(r.status) << '\n';
  }
}

void emit_report(const std::string& out_dir, std::span<const RunRecord> recs,
                 const SweepResult* sweep) {
  std::filesystem::create_directories(out_dir);
  const auto p = [&](const char* name) { return (std::filesystem::path(out_dir) / name).string(); };
  if (!recs.empty()) {
    write_run_csv(p("runs.csv"), recs.front());
    write_ledger_csv(p("ledger.csv"), recs.front());
  } else {
    auto out = open_out(p("runs.csv"));
    write_header(out, 0, 0);
  }
  write_bounds_csv(p("bounds.csv"), recs);
  if (sweep) write_sweep_csv(p("sweep.csv"), *sweep);
  write_summary(p("summary.txt"), recs, sweep);
}

}  // namespace ncs
