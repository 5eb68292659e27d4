// thermoops command-line front end.
//
// Exit codes: 0 success, 1 domain failure (infeasible map, refused conversion,
// resource limits), 2 usage error (bad flags, malformed or unknown JSON).

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "thermoops/io.hpp"

using namespace thermoops;

namespace {

enum ExitCode { kOk = 0, kDomain = 1, kUsage = 2 };

struct Output {
  std::string path;
  std::string format = "json";

  void emit(const std::string& text) const {
    if (path.empty()) {
      std::cout << text;
    } else {
      write_text(path, text);
    }
  }
  void emit(const json& j) const { emit(j.dump(2) + "\n"); }
};

void add_output(CLI::App* cmd, Output& out, bool with_format) {
  cmd->add_option("--out", out.path, "Write the result here instead of stdout");
  if (with_format) cmd->add_option("--format", out.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

json modes_json(const DensityOperator& rho, double threshold) {
  const ModeSet modes = coherent_modes(rho, threshold);
  const IntegerBasis basis = independent_basis(modes);
  json m = json::array();
  for (const auto& e : modes.modes) m.push_back(e.to_string());
  json b = json::array();
  for (const auto& e : basis.elements) b.push_back(e.to_string());
  json coeffs = json::array();
  for (const auto& e : basis.elements) coeffs.push_back(energy_to_json(e));
  return {{"modes", m}, {"basis", b}, {"basis_coefficients", coeffs}};
}

json plan_json(const ClassicalTargetPlan& plan) {
  json units = json::array();
  for (const auto& e : plan.modes.elements) units.push_back(e.to_string());
  json slots = json::array();
  for (std::size_t j = 0; j < plan.size(); ++j) {
    json f = json::array();
    for (Eigen::Index c = 0; c < plan.eigenvectors.rows(); ++c) {
      const Complex z = plan.eigenvectors(c, static_cast<Eigen::Index>(j));
      f.push_back({z.real(), z.imag()});
    }
    slots.push_back({{"eigenvalue", plan.eigenvalues[j]},
                     {"energy", plan.target_energies[j].to_string()},
                     {"energy_coefficients", energy_to_json(plan.target_energies[j])},
                     {"eigenvector", f},
                     {"window", plan.window[j]}});
  }
  return {{"mu", plan.mu}, {"ladder_units", units}, {"levels", slots}, {"energy_excess", plan.energy_excess}};
}

int run_walk_sim(const WalkSpec& w, std::uint64_t n, std::uint64_t seed, std::uint64_t horizon, unsigned threads,
                 const Output& out) {
  const HittingBound hb = hitting_bound(w);
  const HittingEstimate est = simulate_hitting(w, n, horizon ? horizon : default_horizon(w), seed, threads);
  out.emit(json{{"gamma", hb.gamma},
                {"bound", hb.bound},
                {"estimate", est.estimate},
                {"stderr", est.std_error},
                {"escaped_mass", est.escaped_mass},
                {"hits", est.hits},
                {"trajectories", est.trajectories},
                {"horizon", est.horizon},
                {"seed", seed}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermoops: thermal operations, coherent modes and catalytic protocols at desk scale"};
  app.require_subcommand(1);
  Output out;

  // modes
  std::string state_path;
  double threshold = kDefaultModeThreshold;
  auto* modes = app.add_subcommand("modes", "Coherent modes of a state and an integer-independent basis");
  modes->add_option("--state", state_path, "State JSON")->required();
  modes->add_option("--threshold", threshold, "Magnitude threshold for off-diagonal entries");
  add_output(modes, out, false);

  // channel
  std::string channel_path;
  auto* channel = app.add_subcommand("channel", "Thermal operations");
  channel->require_subcommand(1);
  auto* ch_apply = channel->add_subcommand("apply", "Apply a thermal operation to a state");
  ch_apply->add_option("--state", state_path, "State JSON")->required();
  ch_apply->add_option("--channel", channel_path, "Thermal operation JSON")->required();
  add_output(ch_apply, out, false);
  auto* ch_check = channel->add_subcommand("check", "Check energy conservation, Gibbs preservation and covariance");
  ch_check->add_option("--state", state_path, "State JSON fixing the system layout")->required();
  ch_check->add_option("--channel", channel_path, "Thermal operation JSON")->required();
  add_output(ch_check, out, false);

  // classical
  std::string input_path;
  std::string reference_path;
  int mu = 1;
  auto* classical = app.add_subcommand("classical", "Classical convertibility");
  classical->require_subcommand(1);
  auto* cl_feasible = classical->add_subcommand("feasible", "Gibbs-stochastic map from p to q, with the curve test");
  cl_feasible->add_option("--input", input_path, "JSON {hamiltonian, beta, p, q}")->required();
  add_output(cl_feasible, out, false);
  auto* cl_target = classical->add_subcommand("target", "Classical target levels for a coherent state");
  cl_target->add_option("--state", state_path, "Target state JSON")->required();
  cl_target->add_option("--reference", reference_path, "State whose coherent modes give the ladder units (default: the target)");
  cl_target->add_option("--mu", mu, "Copies per block")->check(CLI::PositiveNumber);
  add_output(cl_target, out, false);

  // catcoh
  int L = 32;
  int M = 40;
  int nu = 20;
  auto* catcoh = app.add_subcommand("catcoh", "Catalytic coherence");
  catcoh->require_subcommand(1);
  auto* hadamard = catcoh->add_subcommand("demo-hadamard", "Hadamard with a ladder resource, reused nu times");
  hadamard->add_option("--L", L, "Resource width")->check(CLI::PositiveNumber);
  hadamard->add_option("--M", M, "Resource offset")->check(CLI::NonNegativeNumber);
  hadamard->add_option("--nu", nu, "Reuse count")->check(CLI::PositiveNumber);
  add_output(hadamard, out, true);

  // walk
  std::string spec_path;
  std::uint64_t trajectories = 100000;
  std::uint64_t seed = 0;
  std::uint64_t horizon = 0;
  unsigned threads = 0;
  auto* walk = app.add_subcommand("walk", "Random-walk hitting bounds");
  walk->require_subcommand(1);
  auto* wb = walk->add_subcommand("bound", "gamma root and hitting bound");
  wb->add_option("--spec", spec_path, "Walk JSON {jumps, xi}")->required();
  add_output(wb, out, false);
  auto* ws = walk->add_subcommand("sim", "Seeded Monte Carlo hitting estimate");
  ws->add_option("--spec", spec_path, "Walk JSON {jumps, xi}")->required();
  ws->add_option("--n", trajectories, "Trajectories");
  ws->add_option("--seed", seed, "Master seed");
  ws->add_option("--horizon", horizon, "Steps per trajectory (default from the drift)");
  ws->add_option("--threads", threads, "Worker threads (0: hardware)");
  add_output(ws, out, false);

  // protocol
  std::string config_path;
  auto* protocol = app.add_subcommand("protocol", "Marginal conversion and correlated catalyst");
  protocol->require_subcommand(1);
  auto* pr_run = protocol->add_subcommand("run", "Run the conversion and emit a report");
  pr_run->add_option("--config", config_path, "Protocol config JSON")->required();
  add_output(pr_run, out, true);
  auto* pr_cat = protocol->add_subcommand("catalyst", "Build the catalyst and run one catalytic step");
  pr_cat->add_option("--config", config_path, "Protocol config JSON")->required();
  add_output(pr_cat, out, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*modes) {
      out.emit(modes_json(read_state(state_path), threshold));
      return kOk;
    }
    if (*ch_apply || *ch_check) {
      const DensityOperator rho = read_state(state_path);
      const ThermalOperationSpec spec = thermal_from_json(read_json_file(channel_path), rho.layout());
      if (*ch_apply) {
        const DensityOperator result = apply_thermal(spec, rho);
        out.emit(json{{"state", state_to_json(result)},
                      {"free_energy_in", free_energy(rho, spec.beta())},
                      {"free_energy_out", free_energy(result, spec.beta())}});
      } else {
        const Channel c = as_channel(spec);
        out.emit(json{{"intertwining_residual", spec.intertwining_residual()},
                      {"gibbs_preserving_residual", check_gibbs_preserving(c, spec.input_layout(), spec.beta())},
                      {"covariance_residual", check_covariant(c, spec.input_layout())}});
      }
      return kOk;
    }
    if (*cl_feasible) {
      const json j = read_json_file(input_path);
      detail::check_keys(j, {"hamiltonian", "beta", "p", "q"}, input_path);
      const HamiltonianSpec h = hamiltonian_from_json(detail::need(j, "hamiltonian", input_path));
      const auto energies = layout_energies({{"S", h}});
      const auto pv = detail::get_as<std::vector<double>>(detail::need(j, "p", input_path), "p");
      const auto qv = detail::get_as<std::vector<double>>(detail::need(j, "q", input_path), "q");
      const double beta = detail::get_as<double>(detail::need(j, "beta", input_path), "beta");
      const ClassicalState p(Eigen::Map<const VectorXd>(pv.data(), static_cast<Eigen::Index>(pv.size())), energies);
      const ClassicalState q(Eigen::Map<const VectorXd>(qv.data(), static_cast<Eigen::Index>(qv.size())), energies);
      const GibbsStochasticResult r = solve_gibbs_stochastic(p, q, beta);
      json map = json::array();
      if (r.feasible) {
        for (Eigen::Index i = 0; i < r.map.rows(); ++i) {
          json row = json::array();
          for (Eigen::Index k = 0; k < r.map.cols(); ++k) row.push_back(r.map(i, k));
          map.push_back(row);
        }
      }
      out.emit(json{{"feasible", r.feasible},
                    {"curve_holds", r.curve.holds},
                    {"curve_gap", r.curve.worst_gap},
                    {"violation", {{"x", r.curve.violation.x}, {"y", r.curve.violation.y}}},
                    {"residual", r.residual},
                    {"map", r.feasible ? map : json(nullptr)}});
      return r.feasible ? kOk : kDomain;
    }
    if (*cl_target) {
      const DensityOperator target = read_state(state_path);
      const DensityOperator ref = reference_path.empty() ? target : state_from_json(read_json_file(reference_path), reference_path, target.basis());
      out.emit(plan_json(build_classical_target(target, mu, independent_basis(coherent_modes(ref)))));
      return kOk;
    }
    if (*hadamard) {
      const auto basis = make_basis({"w"}, {1.0});
      const EnergyVector unit = EnergyVector::unit(basis, 0);
      const int truncation = M + L + nu + 8;
      const ShiftCompensatedUnitary u = hadamard_shift_unitary(unit, truncation);
      VectorXd ground(2);
      ground << 1.0, 0.0;
      const DensityOperator sys = DensityOperator::diagonal(ground, u.system_layout());
      const ReuseResult rr = reuse_sequence(u, std::vector<DensityOperator>(static_cast<std::size_t>(nu), sys),
                                            make_resource(L, M, unit, truncation));
      if (out.format == "csv") {
        std::ostringstream os;
        os << "step,error,boundary_mass\n";
        for (std::size_t k = 0; k < rr.steps.size(); ++k) {
          os << k + 1 << ',' << format_double(rr.steps[k].error_to_target) << ',' << format_double(rr.steps[k].boundary_mass) << '\n';
        }
        out.emit(os.str());
      } else {
        json errors = json::array();
        for (const auto& s : rr.steps) errors.push_back(s.error_to_target);
        json hist = json::array();
        const MatrixXcd& r = rr.final_resource.matrix();
        for (Eigen::Index k = 0; k < r.rows(); ++k) {
          if (r(k, k).real() > 1e-15) hist.push_back({{"level", k}, {"probability", r(k, k).real()}});
        }
        out.emit(json{{"L", L}, {"M", M}, {"nu", nu}, {"truncation", truncation}, {"errors", errors}, {"resource_levels", hist}});
      }
      return kOk;
    }
    if (*wb) {
      const WalkSpec w = walk_from_json(read_json_file(spec_path), spec_path);
      const HittingBound hb = hitting_bound(w);
      out.emit(json{{"gamma", hb.gamma}, {"bound", hb.bound}, {"loose", hb.loose}, {"drift", w.drift()}});
      return kOk;
    }
    if (*ws) return run_walk_sim(walk_from_json(read_json_file(spec_path), spec_path), trajectories, seed, horizon, threads, out);
    if (*pr_run) {
      const ProtocolConfig cfg = protocol_config_from_json(read_json_file(config_path), config_path);
      const ConversionResult r = run_marginal_conversion(cfg);
      if (out.format == "csv") {
        out.emit(report_to_csv(r.report));
      } else {
        out.emit(report_to_json(r.report));
      }
      return r.xi ? kOk : kDomain;
    }
    if (*pr_cat) {
      const ProtocolConfig cfg = protocol_config_from_json(read_json_file(config_path), config_path);
      const PaddedConversion pc = make_padded_conversion(cfg);
      const CatalystState cat = build_catalyst(cfg.rho, pc.map, pc.n, pc.padding);
      const CatalyticStepResult step = run_catalytic_step(cat, pc.map, cfg.rho_prime, cfg.beta);
      out.emit(catalytic_step_to_json(step, pc));
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomain;
  }
  return kUsage;
}
