// ncsim command line: run one scenario, sweep tau_max, or run the randomized
// invariant/bound check suite. Exit code 0 iff all runs finished ok and every
// bound check was satisfied.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ncs/errors.hpp"
#include "ncs/experiments.hpp"

namespace {

struct Overrides {
  std::int64_t seed = -1;
  std::int64_t steps = -1;
  std::int64_t tau_max = -1;
  std::string predictor;
};

void apply(ncs::Scenario& s, const Overrides& o) {
  if (o.seed >= 0) s.seed = static_cast<std::uint64_t>(o.seed);
  if (o.steps >= 0) s.steps = o.steps;
  if (o.tau_max >= 0) s.tau_max = o.tau_max;
  if (!o.predictor.empty()) {
    if (o.predictor == "exact") s.predictor = ncs::Predictor::Exact;
    else if (o.predictor == "euler") s.predictor = ncs::Predictor::Euler;
    else if (o.predictor == "rk4") s.predictor = ncs::Predictor::Rk4;
    else throw ncs::ConfigError("unknown predictor: " + o.predictor);
  }
}

std::vector<std::int64_t> parse_tau_list(const std::string& list) {
  std::vector<std::int64_t> taus;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) taus.push_back(std::stoll(tok));
  }
  if (taus.empty()) throw ncs::ConfigError("--tau-max list is empty");
  return taus;
}

bool record_ok(const ncs::RunRecord& r) {
  return r.status == ncs::RunStatus::Ok && r.consistency.ok &&
         (!r.bound_valid || r.bound.satisfied);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic simulator for prediction-based delay compensation"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  std::string tau_list;
  Overrides ov;
  int check_runs = 100;
  std::int64_t check_seed = 1;

  auto add_common = [&](CLI::App* cmd, bool need_scenario) {
    if (need_scenario)
      cmd->add_option("--scenario", scenario_path, "scenario file")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", ov.seed, "override the scenario seed");
    cmd->add_option("--steps", ov.steps, "override the number of steps");
    cmd->add_option("--predictor", ov.predictor, "override the predictor (exact|euler|rk4)");
  };

  CLI::App* run = app.add_subcommand("run", "simulate one scenario");
  add_common(run, true);
  run->add_option("--tau-max", ov.tau_max, "override tau_max");

  CLI::App* sweep = app.add_subcommand("sweep", "one run per tau_max value");
  add_common(sweep, true);
  sweep->add_option("--tau-max", tau_list, "comma-separated tau_max list")->required();

  CLI::App* check = app.add_subcommand("check", "randomized invariant/bound suite");
  check->add_option("--runs", check_runs, "number of randomized scenarios");
  check->add_option("--seed", check_seed, "base seed for the suite");
  check->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ncs::Scenario s = ncs::scenario_from_file(scenario_path);
      apply(s, ov);
      const ncs::RunRecord rec = ncs::run_scenario(s);
      std::vector<ncs::RunRecord> recs;
      recs.push_back(rec);
      ncs::emit_report(out_dir, recs, nullptr);
      std::cout << s.name << ": status=" << ncs::to_string(rec.status)
                << " consistency_violations=" << rec.consistency.violations;
      if (rec.bound_valid)
        std::cout << " v_observed=" << ncs::format_double(rec.bound.v_observed)
                  << " v_bound=" << ncs::format_double(rec.bound.v_bound);
      std::cout << " max_deviation=" << ncs::format_double(rec.max_deviation) << "\n";
      return record_ok(rec) ? 0 : 1;
    }

    if (sweep->parsed()) {
      ncs::Scenario s = ncs::scenario_from_file(scenario_path);
      apply(s, ov);
      const auto taus = parse_tau_list(tau_list);
      const ncs::SweepResult res = ncs::sweep_tau_max(s, taus);
      ncs::emit_report(out_dir, res.records, &res);
      bool ok = true;
      for (const auto& row : res.rows) {
        std::cout << "tau_max=" << row.tau_max << " status=" << ncs::to_string(row.status)
                  << " max_deviation=" << ncs::format_double(row.max_deviation)
                  << " v_observed=" << ncs::format_double(row.v_observed)
                  << " v_bound=" << ncs::format_double(row.v_bound) << "\n";
      }
      for (const auto& rec : res.records) ok = ok && record_ok(rec);
      return ok ? 0 : 1;
    }

    // check: randomized suite
    std::vector<ncs::RunRecord> recs;
    recs.reserve(static_cast<std::size_t>(check_runs));
    int failures = 0;
    for (int i = 0; i < check_runs; ++i) {
      const ncs::Scenario s =
          ncs::make_random_scenario(static_cast<std::uint64_t>(check_seed), i);
      ncs::RunRecord rec = ncs::run_scenario(s);
      if (!record_ok(rec)) {
        ++failures;
        std::cout << "FAIL " << s.name << ": status=" << ncs::to_string(rec.status)
                  << " violations=" << rec.consistency.violations
                  << (rec.bound_valid && !rec.bound.satisfied ? " bound-violated" : "") << "\n";
      }
      recs.push_back(std::move(rec));
    }
    ncs::emit_report(out_dir, recs, nullptr);
    std::cout << "check: " << (check_runs - failures) << "/" << check_runs << " runs clean\n";
    return failures == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
