#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "ncs/errors.hpp"
#include "ncs/experiments.hpp"

namespace ncs {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

class KeyValues {
public:
  KeyValues(const std::string& text, std::string origin) : origin_(std::move(origin)) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin_ + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin_ + ": empty key");
      kv_[key] = value;
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string raw(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
    return it->second;
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
  }

  double num(const std::string& key) const { return parse_num(key, raw(key)); }
  double num(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
  }

  std::int64_t integer(const std::string& key) const {
    const double v = num(key);
    const auto i = static_cast<std::int64_t>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError(origin_ + ": key '" + key + "' must be an integer");
    return i;
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  Vec vec(const std::string& key) const {
    std::istringstream in(raw(key));
    Vec out;
    std::string tok;
    while (in >> tok) out.push_back(parse_num(key, tok));
    if (out.empty()) throw ConfigError(origin_ + ": key '" + key + "' has no values");
    return out;
  }

  std::vector<std::string> tokens(const std::string& key) const {
    std::istringstream in(raw(key));
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
  }

  const std::string& origin() const { return origin_; }

private:
  double parse_num(const std::string& key, const std::string& tok) const {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key '" + key + "': bad number '" + tok + "'");
    }
    if (pos != tok.size())
      throw ConfigError(origin_ + ": key '" + key + "': bad number '" + tok + "'");
    return v;
  }

  std::string origin_;
  std::map<std::string, std::string> kv_;
};

ChannelSpec parse_channel(const KeyValues& kv, const std::string& prefix) {
  ChannelSpec spec;
  const auto delay_toks = kv.tokens(prefix + ".delay");
  if (delay_toks.empty()) throw ConfigError(kv.origin() + ": " + prefix + ".delay empty");
  if (delay_toks[0] == "tau_max") {
    spec.track_tau_max = true;
    spec.config.delay_kind = DelayKind::Constant;
  } else if (delay_toks[0] == "constant" && delay_toks.size() == 2) {
    spec.config.delay_kind = DelayKind::Constant;
    spec.config.delay_value = std::stoll(delay_toks[1]);
  } else if (delay_toks[0] == "uniform" && delay_toks.size() == 3) {
    spec.config.delay_kind = DelayKind::UniformInt;
    spec.config.delay_lo = std::stoll(delay_toks[1]);
    spec.config.delay_hi = std::stoll(delay_toks[2]);
  } else {
    throw ConfigError(kv.origin() + ": " + prefix +
                      ".delay must be 'constant D', 'uniform LO HI', or 'tau_max'");
  }

  const auto loss_toks = kv.tokens(prefix + ".loss");
  if (loss_toks.empty()) throw ConfigError(kv.origin() + ": " + prefix + ".loss empty");
  if (loss_toks[0] == "none") {
    spec.config.loss_kind = LossKind::None;
  } else if (loss_toks[0] == "every_kth" && loss_toks.size() == 2) {
    spec.config.loss_kind = LossKind::EveryKth;
    spec.config.period = std::stoll(loss_toks[1]);
  } else if (loss_toks[0] == "bernoulli" && loss_toks.size() == 2) {
    spec.config.loss_kind = LossKind::Bernoulli;
    spec.config.loss_prob = std::stod(loss_toks[1]);
  } else {
    throw ConfigError(kv.origin() + ": " + prefix +
                      ".loss must be 'none', 'every_kth K', or 'bernoulli P'");
  }
  return spec;
}

Scenario parse(const KeyValues& kv) {
  if (kv.integer("version") != 1)
    throw ConfigError(kv.origin() + ": unsupported scenario version");

  Scenario s;
  s.name = kv.str("name", "scenario");

  const std::string plant = kv.str("plant", "double_integrator");
  if (plant == "double_integrator") {
    s.plant_kind = PlantKind::DoubleIntegrator;
  } else if (plant == "scalar") {
    s.plant_kind = PlantKind::Scalar;
    s.plant_a = kv.num("plant.a");
  } else {
    throw ConfigError(kv.origin() + ": unknown plant '" + plant + "'");
  }
  s.sample_time = kv.num("plant.sample_time", 0.1);

  const std::string pred = kv.str("predictor", "exact");
  if (pred == "exact") s.predictor = Predictor::Exact;
  else if (pred == "euler") s.predictor = Predictor::Euler;
  else if (pred == "rk4") s.predictor = Predictor::Rk4;
  else throw ConfigError(kv.origin() + ": unknown predictor '" + pred + "'");

  s.x0 = kv.vec("x0");
  s.steps = kv.integer("steps");
  s.seed = static_cast<std::uint64_t>(kv.integer("seed"));
  s.disturbance_bound = kv.num("disturbance_bound", 0.0);
  s.tau_max = kv.integer("tau_max");
  s.sequence_length = static_cast<int>(kv.integer("sequence_length"));
  s.default_input = kv.vec("default_input");

  const std::string gen = kv.str("generator", "static");
  const int dim_x = (s.plant_kind == PlantKind::DoubleIntegrator) ? 4 : 1;
  const int dim_u = (s.plant_kind == PlantKind::DoubleIntegrator) ? 2 : 1;
  if (gen == "static") {
    s.generator.kind = GeneratorConfig::Kind::Static;
    const Vec flat = kv.vec("static.gain");
    if (static_cast<int>(flat.size()) != dim_u * dim_x)
      throw ConfigError(kv.origin() + ": static.gain needs " + std::to_string(dim_u * dim_x) +
                        " entries");
    Mat g(dim_u, dim_x);
    g.data = flat;
    s.generator.feedback.gain = std::move(g);
    s.generator.feedback.saturation = kv.num("static.saturation", 0.0);
  } else if (gen == "mpc") {
    s.generator.kind = GeneratorConfig::Kind::Mpc;
    MpcConfig& m = s.generator.mpc;
    m.horizon = static_cast<int>(kv.integer("mpc.horizon", 10));
    m.sample_time = s.sample_time;
    m.terminal_weight = kv.num("mpc.terminal_weight", 20.0);
    m.input_radius = kv.num("mpc.input_radius", 10.0);
    const std::string sc = kv.str("mpc.state_constraint", "on");
    m.state_constraint.enabled = (sc == "on");
    if (sc != "on" && sc != "off")
      throw ConfigError(kv.origin() + ": mpc.state_constraint must be on/off");
    m.state_constraint.bound = kv.num("mpc.state_constraint_bound", 30.0);
    if (kv.has("mpc.state_constraint_indices")) {
      m.state_constraint.indices.clear();
      for (double v : kv.vec("mpc.state_constraint_indices"))
        m.state_constraint.indices.push_back(static_cast<int>(v) - 1);  // file is 1-based
    } else {
      m.state_constraint.indices = {1, 3};
    }
    m.state_constraint.penalty_weight = kv.num("mpc.penalty_weight", 1000.0);
    m.solver.max_iterations = static_cast<int>(kv.integer("mpc.max_iterations", 500));
    m.solver.tolerance = kv.num("mpc.tolerance", 1e-6);
    m.quad_substeps = static_cast<int>(kv.integer("mpc.quad_substeps", 1));
    m.cost = make_circle_tracking_cost(kv.num("mpc.circle_radius", 6.0),
                                       kv.num("mpc.circle_speed", 10.0),
                                       kv.num("mpc.radial_weight", 100.0),
                                       kv.num("mpc.tangential_weight", 0.05));
  } else {
    throw ConfigError(kv.origin() + ": unknown generator '" + gen + "'");
  }

  s.sensor = parse_channel(kv, "sensor");
  s.actuator = parse_channel(kv, "actuator");

  const std::string growth = kv.str("bounds.growth", "exponential");
  if (growth == "exponential") s.bounds.growth = GrowthMode::Exponential;
  else if (growth == "linear") s.bounds.growth = GrowthMode::Linear;
  else throw ConfigError(kv.origin() + ": bounds.growth must be exponential/linear");
  s.bounds.lipschitz = kv.num("bounds.lipschitz");
  s.bounds.step_error_coeff = kv.num("bounds.step_error_coeff");
  s.bounds.step_size = kv.num("bounds.step_size", s.sample_time);
  s.bounds.order = static_cast<int>(kv.integer("bounds.order", 1));
  s.bounds.disturbance_gain = kv.num("bounds.disturbance_gain", 1.0);

  s.metric.settle_steps = static_cast<int>(kv.integer("metric.settle_steps", 0));
  s.metric.radius = kv.num("metric.radius", 6.0);
  s.metric.speed = kv.num("metric.speed", 10.0);

  validate_scenario(s);
  return s;
}

}  // namespace

Scenario scenario_from_string(const std::string& text, const std::string& origin) {
  return parse(KeyValues(text, origin));
}

Scenario scenario_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_string(buf.str(), path);
}

PlantModel build_plant(const Scenario& s) {
  switch (s.plant_kind) {
    case PlantKind::DoubleIntegrator:
      return make_double_integrator_plant(s.sample_time, s.predictor);
    case PlantKind::Scalar:
      return make_scalar_plant(s.plant_a, s.sample_time, s.predictor);
  }
  throw ConfigError("unknown plant kind");
}

void validate_scenario(const Scenario& s) {
  const int dim_x = (s.plant_kind == PlantKind::DoubleIntegrator) ? 4 : 1;
  const int dim_u = (s.plant_kind == PlantKind::DoubleIntegrator) ? 2 : 1;
  if (static_cast<int>(s.x0.size()) != dim_x) throw ConfigError("scenario: x0 dimension");
  if (static_cast<int>(s.default_input.size()) != dim_u)
    throw ConfigError("scenario: default_input dimension");
  if (s.steps < 1) throw ConfigError("scenario: steps must be >= 1");
  if (s.tau_max < 0) throw ConfigError("scenario: tau_max must be >= 0");
  if (s.sequence_length <= 1) throw ConfigError("scenario: sequence_length must be > 1");
  if (s.disturbance_bound < 0.0) throw ConfigError("scenario: disturbance_bound must be >= 0");
  if (s.generator.kind == GeneratorConfig::Kind::Mpc &&
      s.generator.mpc.horizon < s.sequence_length)
    throw ConfigError("scenario: mpc horizon < sequence_length");
  if (!s.actuator.track_tau_max && channel_delay_bound(s.actuator.config) > s.tau_max)
    throw ConfigError("scenario: actuator delay bound exceeds tau_max");
  s.bounds.validate();
}

}  // namespace ncs
