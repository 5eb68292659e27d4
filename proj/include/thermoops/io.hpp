#pragma once

// JSON and CSV serialization for states, channels, walks, protocol configs and
// reports. Readers reject unknown fields; malformed text reports line:column.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "thermoops/channels.hpp"
#include "thermoops/classical.hpp"
#include "thermoops/protocol.hpp"
#include "thermoops/randomwalk.hpp"

namespace thermoops {

using json = nlohmann::ordered_json;

/// Malformed or schema-violating input. The CLI maps it to a usage error.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

inline const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get_as<T>(j.at(key), where + "." + key) : fallback;
}

}  // namespace detail

inline json parse_json_text(const std::string& text, const std::string& source = "<input>") {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// Energies and Hamiltonians

inline json energy_to_json(const EnergyVector& e) {
  json a = json::array();
  for (const auto& c : e.coeffs()) a.push_back(format_rational(c));
  return a;
}

inline EnergyVector energy_from_json(const json& j, const BasisPtr& basis, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": energy must be an array of \"p/q\" strings");
  std::vector<Rational> c;
  for (const auto& x : j) {
    try {
      c.push_back(x.is_number_integer() ? Rational(x.get<std::int64_t>()) : parse_rational(detail::get_as<std::string>(x, where)));
    } catch (const ArgumentError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (c.size() != basis->size()) throw ConfigError(where + ": energy has " + std::to_string(c.size()) + " coefficients, basis has " +
                                                   std::to_string(basis->size()));
  return EnergyVector(basis, std::move(c));
}

inline json basis_to_json(const BasisPtr& b) {
  json a = json::array();
  for (std::size_t k = 0; k < b->size(); ++k) a.push_back({{"name", b->names[k]}, {"value", b->values[k]}});
  return a;
}

inline BasisPtr basis_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": basis must be a nonempty array");
  std::vector<std::string> names;
  std::vector<double> values;
  for (const auto& f : j) {
    detail::check_keys(f, {"name", "value"}, where);
    names.push_back(detail::get_as<std::string>(detail::need(f, "name", where), where + ".name"));
    values.push_back(detail::get_as<double>(detail::need(f, "value", where), where + ".value"));
  }
  try {
    return make_basis(std::move(names), std::move(values));
  } catch (const ArgumentError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline json hamiltonian_to_json(const HamiltonianSpec& h) {
  json levels = json::array();
  for (const auto& lv : h.levels()) levels.push_back({{"energy", energy_to_json(lv.energy)}, {"degeneracy", lv.degeneracy}});
  return {{"basis", basis_to_json(h.basis())}, {"levels", levels}};
}

inline HamiltonianSpec hamiltonian_from_json(const json& j, const std::string& where = "hamiltonian",
                                             const BasisPtr& shared = nullptr) {
  detail::check_keys(j, {"basis", "levels"}, where);
  BasisPtr basis = basis_from_json(detail::need(j, "basis", where), where + ".basis");
  if (shared && compatible(shared, basis)) basis = shared;
  std::vector<HamiltonianSpec::Level> levels;
  const json& lv = detail::need(j, "levels", where);
  if (!lv.is_array()) throw ConfigError(where + ".levels: expected an array");
  for (std::size_t k = 0; k < lv.size(); ++k) {
    const std::string w = where + ".levels[" + std::to_string(k) + "]";
    detail::check_keys(lv[k], {"energy", "degeneracy"}, w);
    levels.push_back({energy_from_json(detail::need(lv[k], "energy", w), basis, w + ".energy"),
                      detail::get_or<int>(lv[k], "degeneracy", 1, w)});
  }
  try {
    return HamiltonianSpec(basis, std::move(levels));
  } catch (const ArgumentError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Matrices and states

inline json matrix_to_json(const MatrixXcd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) a.push_back({m(i, k).real(), m(i, k).imag()});
  }
  return a;
}

inline MatrixXcd matrix_from_json(const json& entries, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
  if (!entries.is_array() || static_cast<Eigen::Index>(entries.size()) != rows * cols) {
    throw ConfigError(where + ": expected " + std::to_string(rows * cols) + " [re, im] entries");
  }
  MatrixXcd m(rows, cols);
  for (Eigen::Index i = 0; i < rows * cols; ++i) {
    const json& e = entries[static_cast<std::size_t>(i)];
    if (e.is_number()) {
      m(i / cols, i % cols) = Complex(e.get<double>(), 0.0);
    } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
      m(i / cols, i % cols) = Complex(e[0].get<double>(), e[1].get<double>());
    } else {
      throw ConfigError(where + ": entry " + std::to_string(i) + " is not a number or [re, im] pair");
    }
  }
  return m;
}

inline json state_to_json(const DensityOperator& rho) {
  if (rho.layout().size() != 1) throw ArgumentError("state_to_json: only single-subsystem states are serialized");
  return {{"dim", rho.dim()},
          {"entries", matrix_to_json(rho.matrix())},
          {"hamiltonian", hamiltonian_to_json(rho.layout().front().hamiltonian)},
          {"label", rho.layout().front().label}};
}

inline DensityOperator state_from_json(const json& j, const std::string& where = "state", const BasisPtr& shared = nullptr) {
  detail::check_keys(j, {"dim", "entries", "hamiltonian", "label"}, where);
  const auto dim = detail::get_as<Eigen::Index>(detail::need(j, "dim", where), where + ".dim");
  if (dim < 1) throw ConfigError(where + ".dim must be >= 1");
  const HamiltonianSpec h = hamiltonian_from_json(detail::need(j, "hamiltonian", where), where + ".hamiltonian", shared);
  if (static_cast<Eigen::Index>(h.dimension()) != dim) throw ConfigError(where + ": dim does not match the Hamiltonian");
  const std::string label = detail::get_or<std::string>(j, "label", "S", where);
  MatrixXcd m = matrix_from_json(detail::need(j, "entries", where), dim, dim, where + ".entries");
  return DensityOperator(std::move(m), {{label, h}});
}

inline DensityOperator read_state(const std::string& path) { return state_from_json(read_json_file(path), path); }

// ---------------------------------------------------------------------------
// Thermal operations

/// {env: Hamiltonian, beta, unitary: entries, system?: Hamiltonian}. Without "system" the state's layout is used.
inline ThermalOperationSpec thermal_from_json(const json& j, const SystemLayout& state_layout, const std::string& where = "channel") {
  detail::check_keys(j, {"env", "beta", "unitary", "system"}, where);
  const BasisPtr basis = state_layout.front().hamiltonian.basis();
  SystemLayout sys = state_layout;
  if (j.contains("system")) sys = {{state_layout.front().label, hamiltonian_from_json(j.at("system"), where + ".system", basis)}};
  const Subsystem env{"E", hamiltonian_from_json(detail::need(j, "env", where), where + ".env", basis)};
  const auto d = static_cast<Eigen::Index>(layout_dimension(sys) * env.hamiltonian.dimension());
  const MatrixXcd v = matrix_from_json(detail::need(j, "unitary", where), d, d, where + ".unitary");
  return ThermalOperationSpec(sys, env, detail::get_as<double>(detail::need(j, "beta", where), where + ".beta"), v);
}

inline json thermal_to_json(const ThermalOperationSpec& spec) {
  return {{"env", hamiltonian_to_json(spec.environment().hamiltonian)},
          {"beta", spec.beta()},
          {"unitary", matrix_to_json(spec.unitary())},
          {"system", hamiltonian_to_json(spec.input_layout().front().hamiltonian)}};
}

// ---------------------------------------------------------------------------
// Walks

inline WalkSpec walk_from_json(const json& j, const std::string& where = "walk") {
  detail::check_keys(j, {"jumps", "xi"}, where);
  WalkSpec w;
  const json& jumps = detail::need(j, "jumps", where);
  if (!jumps.is_object()) throw ConfigError(where + ".jumps: expected an object {\"step\": probability}");
  for (const auto& [key, value] : jumps.items()) {
    std::size_t used = 0;
    std::int64_t step = 0;
    try {
      step = std::stoll(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size()) throw ConfigError(where + ".jumps: key '" + key + "' is not an integer");
    w.jumps[step] += detail::get_as<double>(value, where + ".jumps." + key);
  }
  w.xi = detail::get_or<std::int64_t>(j, "xi", 1, where);
  try {
    w.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return w;
}

inline json walk_to_json(const WalkSpec& w) {
  json jumps = json::object();
  for (const auto& [c, p] : w.jumps) jumps[std::to_string(c)] = p;
  return {{"jumps", jumps}, {"xi", w.xi}};
}

// ---------------------------------------------------------------------------
// Protocol config and reports

inline ProtocolConfig protocol_config_from_json(const json& j, const std::string& where = "config") {
  detail::check_keys(j, {"rho", "rho_prime", "beta", "mu", "nu", "L", "M", "seed", "mag_threshold", "margin", "delta",
                         "enforce_preconditions", "stage"},
                     where);
  DensityOperator rho = state_from_json(detail::need(j, "rho", where), where + ".rho");
  DensityOperator rho_prime = state_from_json(detail::need(j, "rho_prime", where), where + ".rho_prime", rho.basis());
  ProtocolConfig cfg{std::move(rho), std::move(rho_prime)};
  cfg.beta = detail::get_or<double>(j, "beta", cfg.beta, where);
  cfg.mu = detail::get_or<int>(j, "mu", cfg.mu, where);
  cfg.nu = detail::get_or<int>(j, "nu", cfg.nu, where);
  cfg.L = detail::get_or<int>(j, "L", cfg.L, where);
  cfg.M = detail::get_or<int>(j, "M", cfg.M, where);
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed, where);
  cfg.mag_threshold = detail::get_or<double>(j, "mag_threshold", cfg.mag_threshold, where);
  cfg.margin = detail::get_or<int>(j, "margin", cfg.margin, where);
  cfg.delta = detail::get_or<double>(j, "delta", cfg.delta, where);
  cfg.enforce_preconditions = detail::get_or<bool>(j, "enforce_preconditions", cfg.enforce_preconditions, where);
  const std::string stage = detail::get_or<std::string>(j, "stage", "full", where);
  if (stage == "full") {
    cfg.stage = ProtocolStage::full;
  } else if (stage == "rotation_only") {
    cfg.stage = ProtocolStage::rotation_only;
  } else {
    throw ConfigError(where + ".stage: expected \"full\" or \"rotation_only\"");
  }
  return cfg;
}

inline json protocol_config_to_json(const ProtocolConfig& cfg) {
  return {{"rho", state_to_json(cfg.rho)},
          {"rho_prime", state_to_json(cfg.rho_prime)},
          {"beta", cfg.beta},
          {"mu", cfg.mu},
          {"nu", cfg.nu},
          {"L", cfg.L},
          {"M", cfg.M},
          {"seed", cfg.seed},
          {"mag_threshold", cfg.mag_threshold},
          {"margin", cfg.margin},
          {"delta", cfg.delta},
          {"enforce_preconditions", cfg.enforce_preconditions},
          {"stage", cfg.stage == ProtocolStage::full ? "full" : "rotation_only"}};
}

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace detail

inline json report_to_json(const ConversionReport& r) {
  json walks = json::array();
  for (const auto& w : r.walks) {
    json jumps = json::object();
    for (const auto& [c, p] : w.jumps) jumps[std::to_string(c)] = p;
    walks.push_back({{"ladder", w.ladder},
                     {"jumps", jumps},
                     {"drift", w.drift},
                     {"gamma", detail::optional_number(w.gamma)},
                     {"gamma_M", detail::optional_number(w.gamma_M)}});
  }
  json fe = json::array();
  for (const auto& f : r.free_energy) fe.push_back({{"stage", f.stage}, {"per_copy", f.per_copy}});
  return {{"schema", r.schema},
          {"seed", r.seed},
          {"parameters", {{"mu", r.mu}, {"nu", r.nu}, {"L", r.L}, {"M", r.M}, {"truncation", r.truncation}, {"beta", r.beta}, {"stage", r.stage}}},
          {"status", r.status},
          {"short_circuit", r.short_circuit},
          {"ladder_units", r.ladder_units},
          {"pinching_loss_per_copy", r.pinching_loss_per_copy},
          {"classical",
           {{"feasible", r.classical_feasible},
            {"residual", r.classical_residual},
            {"phase_one_value", r.classical_phase_one},
            {"curve_gap", r.classical_curve_gap},
            {"violation", {{"x", r.classical_violation.x}, {"y", r.classical_violation.y}}}}},
          {"marginal_distances", r.marginal_distances},
          {"max_marginal_distance", r.max_marginal_distance},
          {"mean_marginal_distance", r.mean_marginal_distance},
          {"block_distances", r.block_distances},
          {"fresh_block_distance", r.fresh_block_distance},
          {"leaked_mass", r.leaked_mass},
          {"boundary_mass", r.boundary_mass},
          {"walks", walks},
          {"predicted_failure", detail::optional_number(r.predicted_failure)},
          {"achieved_failure", r.achieved_failure},
          {"walk_accounting_holds", r.walk_accounting_holds},
          {"free_energy", fe},
          {"free_energy_monotone", r.free_energy_monotone},
          {"warnings", r.warnings}};
}

inline ConversionReport report_from_json(const json& j) {
  try {
    ConversionReport r;
    r.schema = j.at("schema").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const json& p = j.at("parameters");
    r.mu = p.at("mu").get<int>();
    r.nu = p.at("nu").get<int>();
    r.L = p.at("L").get<int>();
    r.M = p.at("M").get<int>();
    r.truncation = p.at("truncation").get<int>();
    r.beta = p.at("beta").get<double>();
    r.stage = p.at("stage").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.short_circuit = j.at("short_circuit").get<bool>();
    r.ladder_units = j.at("ladder_units").get<std::vector<std::string>>();
    r.pinching_loss_per_copy = j.at("pinching_loss_per_copy").get<double>();
    const json& c = j.at("classical");
    r.classical_feasible = c.at("feasible").get<bool>();
    r.classical_residual = c.at("residual").get<double>();
    r.classical_phase_one = c.at("phase_one_value").get<double>();
    r.classical_curve_gap = c.at("curve_gap").get<double>();
    r.classical_violation = {c.at("violation").at("x").get<double>(), c.at("violation").at("y").get<double>()};
    r.marginal_distances = j.at("marginal_distances").get<std::vector<double>>();
    r.max_marginal_distance = j.at("max_marginal_distance").get<double>();
    r.mean_marginal_distance = j.at("mean_marginal_distance").get<double>();
    r.block_distances = j.at("block_distances").get<std::vector<double>>();
    r.fresh_block_distance = j.at("fresh_block_distance").get<double>();
    r.leaked_mass = j.at("leaked_mass").get<double>();
    r.boundary_mass = j.at("boundary_mass").get<double>();
    for (const auto& w : j.at("walks")) {
      WalkReport wr;
      wr.ladder = w.at("ladder").get<std::string>();
      for (const auto& [k, v] : w.at("jumps").items()) wr.jumps[std::stoll(k)] = v.get<double>();
      wr.drift = w.at("drift").get<double>();
      wr.gamma = detail::read_optional(w, "gamma");
      wr.gamma_M = detail::read_optional(w, "gamma_M");
      r.walks.push_back(std::move(wr));
    }
    r.predicted_failure = detail::read_optional(j, "predicted_failure");
    r.achieved_failure = j.at("achieved_failure").get<double>();
    r.walk_accounting_holds = j.at("walk_accounting_holds").get<bool>();
    for (const auto& f : j.at("free_energy")) r.free_energy.push_back({f.at("stage").get<std::string>(), f.at("per_copy").get<double>()});
    r.free_energy_monotone = j.at("free_energy_monotone").get<bool>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Flat per-copy table: copy, block, marginal distance, block distance.
inline std::string report_to_csv(const ConversionReport& r) {
  std::ostringstream os;
  os << "copy,block,marginal_distance,block_distance\n";
  for (std::size_t i = 0; i < r.marginal_distances.size(); ++i) {
    const std::size_t b = i / static_cast<std::size_t>(std::max(1, r.mu));
    os << i + 1 << ',' << b + 1 << ',' << format_double(r.marginal_distances[i]) << ','
       << (b < r.block_distances.size() ? format_double(r.block_distances[b]) : "") << '\n';
  }
  return os.str();
}

inline json catalytic_step_to_json(const CatalyticStepResult& s, const PaddedConversion& pc) {
  return {{"schema", "thermoops.catalyst_report/1"},
          {"n", pc.n},
          {"padding", pc.padding},
          {"delta_effective", static_cast<double>(pc.padding) / pc.n},
          {"catalyst_residual", s.catalyst_residual},
          {"system_distance", s.system_distance},
          {"mean_marginal_distance", s.mean_marginal_distance},
          {"mixture_residual", s.mixture_residual},
          {"bookkeeping", s.bookkeeping},
          {"bookkeeping_bound", s.bookkeeping_bound},
          {"joint_residual", detail::optional_number(s.joint_residual)},
          {"mutual_information", detail::optional_number(s.mutual_information)},
          {"system", state_to_json(s.system_out)},
          {"conversion", report_to_json(pc.run.report)}};
}

}  // namespace thermoops
