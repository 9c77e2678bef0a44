#pragma once

// Reading and writing game configurations. The on-disk format is JSON; see
// README.md for the key reference.

#include "sbgame/model.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbgame {

/// Parse or schema error; key() is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Thrown by load_config when the document parses but breaks an invariant.
class ValidationError : public ConfigError {
 public:
  explicit ValidationError(ValidationReport report)
      : ConfigError(report.violations.front().key, report.violations.front().message),
        report_(std::move(report)) {}

  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

namespace detail {

using nlohmann::json;

inline std::string join_key(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline const json& require(const json& obj, const std::string& parent, const std::string& key) {
  if (!obj.is_object()) throw ConfigError(parent, "object expected");
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw ConfigError(join_key(parent, key), "required field missing");
  return *it;
}

inline const json* optional_field(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

inline double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "number expected");
  return v.get<double>();
}

inline long as_long(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key, "integer expected");
  return v.get<long>();
}

/// Scalar broadcast to n entries, or an explicit array of length n.
inline std::vector<double> as_vector(const json& v, const std::string& key, std::size_t n) {
  if (v.is_number()) return std::vector<double>(n, v.get<double>());
  if (!v.is_array()) throw ConfigError(key, "number or array expected");
  if (v.size() != n)
    throw ConfigError(key, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(as_double(v[i], indexed(key, i)));
  return out;
}

inline double get_double(const json& obj, const std::string& parent, const std::string& key) {
  return as_double(require(obj, parent, key), join_key(parent, key));
}

inline double get_double_or(const json& obj, const std::string& parent, const std::string& key, double fallback) {
  const json* v = optional_field(obj, key);
  return v ? as_double(*v, join_key(parent, key)) : fallback;
}

/// Profile of bounded variables: {"mean": [...], "deviation": d} or
/// {"mean": [...], "lower": [...], "upper": [...]}. The deviation is
/// relative: the support is mean * (1 -+ d).
inline std::vector<BoundedRV> parse_profile(const json& obj, const std::string& key, std::size_t horizon) {
  if (!obj.is_object()) throw ConfigError(key, "object expected");
  const auto mean = as_vector(require(obj, key, "mean"), join_key(key, "mean"), horizon);
  std::vector<BoundedRV> out(horizon);
  if (const json* dev = optional_field(obj, "deviation")) {
    if (optional_field(obj, "lower") || optional_field(obj, "upper"))
      throw ConfigError(join_key(key, "deviation"), "give either deviation or lower/upper, not both");
    const double d = as_double(*dev, join_key(key, "deviation"));
    if (!(d >= 0.0)) throw ConfigError(join_key(key, "deviation"), "deviation >= 0 required");
    for (std::size_t t = 0; t < horizon; ++t) out[t] = BoundedRV::around(mean[t], d);
    return out;
  }
  const auto lower = as_vector(require(obj, key, "lower"), join_key(key, "lower"), horizon);
  const auto upper = as_vector(require(obj, key, "upper"), join_key(key, "upper"), horizon);
  for (std::size_t t = 0; t < horizon; ++t) out[t] = {lower[t], upper[t], mean[t]};
  return out;
}

inline DependencyGraph parse_edges(const json* v, const std::string& key, int nodes) {
  DependencyGraph g = DependencyGraph::edgeless(nodes);
  if (!v) return g;
  if (!v->is_array()) throw ConfigError(key, "array of [i, j] pairs expected");
  for (std::size_t e = 0; e < v->size(); ++e) {
    const auto& pair = (*v)[e];
    const auto k = indexed(key, e);
    if (!pair.is_array() || pair.size() != 2) throw ConfigError(k, "[i, j] pair expected");
    g.edges.emplace_back(static_cast<int>(as_long(pair[0], k)), static_cast<int>(as_long(pair[1], k)));
  }
  return g;
}

inline Variant parse_variant(const std::string& s, const std::string& key) {
  if (s == "consistent") return Variant::consistent;
  if (s == "literal") return Variant::literal;
  throw ConfigError(key, "expected 'consistent' or 'literal'");
}

inline Algorithm parse_algorithm(const std::string& s, const std::string& key) {
  if (s == "semi") return Algorithm::semi;
  if (s == "central") return Algorithm::central;
  throw ConfigError(key, "expected 'semi' or 'central'");
}

inline void parse_solver(const json* node, SolverSettings& s, std::size_t n_agents) {
  if (!node) return;
  const std::string p = "solver";
  if (!node->is_object()) throw ConfigError(p, "object expected");
  if (const json* v = optional_field(*node, "zeta")) s.zeta = as_double(*v, "solver.zeta");
  s.zeta_fraction = get_double_or(*node, p, "zeta_fraction", s.zeta_fraction);
  if (const json* v = optional_field(*node, "alpha")) s.alpha = as_vector(*v, "solver.alpha", n_agents);
  s.alpha_fraction = get_double_or(*node, p, "alpha_fraction", s.alpha_fraction);
  if (const json* v = optional_field(*node, "gamma")) s.gamma = as_double(*v, "solver.gamma");
  s.gamma_fraction = get_double_or(*node, p, "gamma_fraction", s.gamma_fraction);
  s.eps_u = get_double_or(*node, p, "eps_u", s.eps_u);
  s.eps_lambda = get_double_or(*node, p, "eps_lambda", s.eps_lambda);
  if (const json* v = optional_field(*node, "max_iters")) s.max_iters = as_long(*v, "solver.max_iters");
  if (const json* v = optional_field(*node, "log_stride")) s.log_stride = as_long(*v, "solver.log_stride");
  if (const json* v = optional_field(*node, "variant")) {
    if (!v->is_string()) throw ConfigError("solver.variant", "string expected");
    s.variant = parse_variant(v->get<std::string>(), "solver.variant");
  }
  if (const json* v = optional_field(*node, "algorithm")) {
    if (!v->is_string()) throw ConfigError("solver.algorithm", "string expected");
    s.algorithm = parse_algorithm(v->get<std::string>(), "solver.algorithm");
  }
}

inline void parse_experiment(const json* node, ExperimentSettings& e) {
  if (!node) return;
  if (!node->is_object()) throw ConfigError("experiment", "object expected");
  if (const json* v = optional_field(*node, "seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("experiment.seed", "non-negative integer expected");
    e.seed = v->get<std::uint64_t>();
  }
  if (const json* v = optional_field(*node, "validation_samples"))
    e.validation_samples = as_long(*v, "experiment.validation_samples");
  if (const json* v = optional_field(*node, "cost_samples")) e.cost_samples = as_long(*v, "experiment.cost_samples");
}

inline MicrogridConfig parse_config(const json& root) {
  if (!root.is_object()) throw ConfigError("", "top-level object expected");
  MicrogridConfig c;
  c.n_agents = static_cast<int>(as_long(require(root, "", "agents"), "agents"));
  c.horizon = static_cast<int>(as_long(require(root, "", "horizon"), "horizon"));
  if (c.n_agents < 1) throw ConfigError("agents", "agents >= 1 required");
  if (c.horizon < 1) throw ConfigError("horizon", "horizon >= 1 required");
  const auto N = static_cast<std::size_t>(c.n_agents);
  const auto T = static_cast<std::size_t>(c.horizon);

  const json& bat = require(root, "", "battery");
  auto& b = c.battery;
  b.x0 = get_double(bat, "battery", "x0");
  b.x_min = get_double(bat, "battery", "x_min");
  b.x_max = get_double(bat, "battery", "x_max");
  b.capacity = get_double(bat, "battery", "capacity");
  b.dt = get_double_or(bat, "battery", "dt", 1.0);
  b.eta = get_double_or(bat, "battery", "eta", 1.0 / b.capacity);
  if (const json* v = optional_field(bat, "u_max"))
    b.u_max = as_vector(*v, "battery.u_max", N);
  else
    b.u_max.assign(N, b.capacity / (static_cast<double>(N) * b.dt));

  const json& ch = require(root, "", "chance");
  auto& cs = c.chance;
  cs.delta_x = as_vector(require(ch, "chance", "delta_x"), "chance.delta_x", T);
  cs.delta_x_tilde = as_vector(require(ch, "chance", "delta_x_tilde"), "chance.delta_x_tilde", T);
  cs.delta_final = get_double(ch, "chance", "delta_final");
  cs.delta_final_tilde = get_double(ch, "chance", "delta_final_tilde");
  cs.delta_g = as_vector(require(ch, "chance", "delta_g"), "chance.delta_g", T);
  cs.delta_g_tilde = as_vector(require(ch, "chance", "delta_g_tilde"), "chance.delta_g_tilde", T);
  cs.r_target = get_double(ch, "chance", "r_target");
  cs.epsilon = get_double(ch, "chance", "epsilon");
  cs.g_max = get_double(ch, "chance", "g_max");

  const json& tf = require(root, "", "tariff");
  c.tariff.k_tou = as_vector(require(tf, "tariff", "k_tou"), "tariff.k_tou", T);
  c.tariff.k_c = get_double(tf, "tariff", "k_c");
  c.tariff.alpha_dch = get_double(tf, "tariff", "alpha_dch");
  c.tariff.beta_dch = get_double(tf, "tariff", "beta_dch");

  c.renewable = parse_profile(require(root, "", "renewable"), "renewable", T);

  const json& dem = require(root, "", "demand");
  if (!dem.is_array()) throw ConfigError("demand", "array of per-agent profiles expected");
  if (dem.empty()) throw ConfigError("demand", "at least one demand profile required");
  if (dem.size() != 1 && dem.size() != N)
    throw ConfigError("demand", "expected 1 (shared) or " + std::to_string(N) + " profiles, got " +
                                    std::to_string(dem.size()));
  c.demand.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t src = dem.size() == 1 ? 0 : i;
    c.demand.push_back(parse_profile(dem[src], indexed("demand", src), T));
  }

  const json* deps = optional_field(root, "dependencies");
  if (deps && !deps->is_object()) throw ConfigError("dependencies", "object expected");
  static const json empty = json::object();
  const json& d = deps ? *deps : empty;
  if (const json* v = optional_field(d, "nu_r")) cs.nu_r = as_vector(*v, "dependencies.nu_r", T);
  if (const json* v = optional_field(d, "nu_d")) cs.nu_d = as_vector(*v, "dependencies.nu_d", T);
  c.renewable_dependency =
      parse_edges(optional_field(d, "renewable_edges"), "dependencies.renewable_edges", c.horizon);
  c.demand_dependency = parse_edges(optional_field(d, "demand_edges"), "dependencies.demand_edges", c.n_agents);

  parse_solver(optional_field(root, "solver"), c.solver, N);
  parse_experiment(optional_field(root, "experiment"), c.experiment);
  return c;
}

inline json profile_json(const std::vector<BoundedRV>& p) {
  json lower = json::array(), upper = json::array(), mean = json::array();
  for (const auto& rv : p) {
    lower.push_back(rv.lower);
    upper.push_back(rv.upper);
    mean.push_back(rv.mean);
  }
  return json{{"mean", mean}, {"lower", lower}, {"upper", upper}};
}

inline json edges_json(const DependencyGraph& g) {
  json e = json::array();
  for (auto [a, b] : g.edges) e.push_back(json::array({a, b}));
  return e;
}

}  // namespace detail

/// Parses a configuration document. With check = true the result is also
/// validated and a ValidationError carries every violated invariant.
inline MicrogridConfig load_config_text(const std::string& text, bool check = true) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("parse error: ") + e.what());
  }
  MicrogridConfig c = detail::parse_config(root);
  if (check) {
    auto report = validate(c);
    if (!report.ok()) throw ValidationError(std::move(report));
  }
  return c;
}

inline MicrogridConfig load_config(const std::string& path, bool check = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str(), check);
}

/// Fully explicit document: every default is written out, so reloading it
/// yields an identical config.
inline nlohmann::json config_to_json(const MicrogridConfig& c) {
  using nlohmann::json;
  json root;
  root["agents"] = c.n_agents;
  root["horizon"] = c.horizon;
  const auto& b = c.battery;
  root["battery"] = {{"x0", b.x0}, {"x_min", b.x_min}, {"x_max", b.x_max}, {"capacity", b.capacity},
                     {"eta", b.eta}, {"dt", b.dt},       {"u_max", b.u_max}};
  const auto& ch = c.chance;
  root["chance"] = {{"delta_x", ch.delta_x},
                    {"delta_x_tilde", ch.delta_x_tilde},
                    {"delta_final", ch.delta_final},
                    {"delta_final_tilde", ch.delta_final_tilde},
                    {"delta_g", ch.delta_g},
                    {"delta_g_tilde", ch.delta_g_tilde},
                    {"r_target", ch.r_target},
                    {"epsilon", ch.epsilon},
                    {"g_max", ch.g_max}};
  root["tariff"] = {{"k_tou", c.tariff.k_tou},
                    {"k_c", c.tariff.k_c},
                    {"alpha_dch", c.tariff.alpha_dch},
                    {"beta_dch", c.tariff.beta_dch}};
  root["renewable"] = detail::profile_json(c.renewable);
  root["demand"] = json::array();
  for (const auto& p : c.demand) root["demand"].push_back(detail::profile_json(p));
  json deps = json::object();
  if (!ch.nu_r.empty()) deps["nu_r"] = ch.nu_r;
  if (!ch.nu_d.empty()) deps["nu_d"] = ch.nu_d;
  deps["renewable_edges"] = detail::edges_json(c.renewable_dependency);
  deps["demand_edges"] = detail::edges_json(c.demand_dependency);
  root["dependencies"] = deps;
  const auto& s = c.solver;
  json solver = {{"zeta_fraction", s.zeta_fraction},
                 {"alpha_fraction", s.alpha_fraction},
                 {"gamma_fraction", s.gamma_fraction},
                 {"eps_u", s.eps_u},
                 {"eps_lambda", s.eps_lambda},
                 {"max_iters", s.max_iters},
                 {"log_stride", s.log_stride},
                 {"variant", to_string(s.variant)},
                 {"algorithm", to_string(s.algorithm)}};
  if (s.zeta) solver["zeta"] = *s.zeta;
  if (s.gamma) solver["gamma"] = *s.gamma;
  if (!s.alpha.empty()) solver["alpha"] = s.alpha;
  root["solver"] = solver;
  root["experiment"] = {{"seed", c.experiment.seed},
                        {"validation_samples", c.experiment.validation_samples},
                        {"cost_samples", c.experiment.cost_samples}};
  return root;
}

inline std::string export_config(const MicrogridConfig& c) { return config_to_json(c).dump(2); }

}  // namespace sbgame
