#pragma once

// End-to-end marginal conversion at desk scale, and the correlated catalyst
// built from it.
//
// Pipeline per block of mu copies:
//   pinch, then rotate inside degenerate energy blocks to a diagonal state p;
//   move p by a Gibbs-stochastic map onto classical levels E_{c[j]} holding the
//   eigenvalues of the target block (these levels live in a work space X that
//   extends the block by one extra level per eigenvector);
//   rotate each level onto its eigenvector with a shift-compensated unitary,
//   the ladders being shared by all nu blocks in sequence;
//   read out: project X back onto the block, replacing any leaked weight with
//   the Gibbs state.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "thermoops/catcoherence.hpp"
#include "thermoops/channels.hpp"
#include "thermoops/classical.hpp"
#include "thermoops/modes.hpp"
#include "thermoops/qstate.hpp"
#include "thermoops/randomwalk.hpp"

namespace thermoops {

enum class ProtocolStage {
  full,           // pinching, classical map, rotation
  rotation_only,  // start from the designed classical state; skip the first two stages
};

struct ProtocolConfig {
  DensityOperator rho;
  DensityOperator rho_prime;
  double beta = 1.0;
  int mu = 1;
  int nu = 1;
  int L = 128;
  int M = 16;
  std::uint64_t seed = 0;
  double mag_threshold = kDefaultModeThreshold;
  int margin = 8;
  double delta = 0.125;  // Gibbs padding fraction for the catalyst
  bool enforce_preconditions = true;
  ProtocolStage stage = ProtocolStage::full;
};

struct FreeEnergyEntry {
  std::string stage;
  double per_copy = 0;
};

struct WalkReport {
  std::string ladder;
  std::map<std::int64_t, double> jumps;
  double drift = 0;
  std::optional<double> gamma;   // absent when the drift is not positive
  std::optional<double> gamma_M;  // gamma^M
};

struct ConversionReport {
  std::string schema = "thermoops.conversion_report/1";
  std::uint64_t seed = 0;
  int mu = 1;
  int nu = 1;
  int L = 0;
  int M = 0;
  int truncation = 0;
  double beta = 1;
  std::string stage = "full";
  std::string status = "ok";  // ok | classical_infeasible
  bool short_circuit = false;
  std::vector<std::string> ladder_units;

  double pinching_loss_per_copy = 0;
  bool classical_feasible = false;
  double classical_residual = 0;      // of the returned map, when feasible
  double classical_phase_one = 0;     // LP phase-one objective; positive when infeasible
  double classical_curve_gap = 0;
  CurvePoint classical_violation{};

  std::vector<double> marginal_distances;
  double max_marginal_distance = 0;
  double mean_marginal_distance = 0;
  std::vector<double> block_distances;
  double fresh_block_distance = 0;
  double leaked_mass = 0;
  double boundary_mass = 0;

  std::vector<WalkReport> walks;
  std::optional<double> predicted_failure;
  double achieved_failure = 0;
  bool walk_accounting_holds = true;

  std::vector<FreeEnergyEntry> free_energy;
  bool free_energy_monotone = true;
  std::vector<std::string> warnings;
};

struct ProtocolArtifacts {
  ClassicalTargetPlan plan;
  SystemLayout work_layout;                // X
  std::vector<Eigen::Index> block_index;   // block state -> X index
  std::vector<Eigen::Index> slot_index;    // eigenvector j -> X index
  VectorXd work_state;                     // classical state fed to the rotation, on X
  std::optional<ShiftCompensatedUnitary> unitary;
  VectorXcd resource;
};

struct ConversionResult {
  std::optional<DensityOperator> xi;  // on mu*nu copies, when the run completes
  ConversionReport report;
  std::optional<ProtocolArtifacts> artifacts;
};

inline void validate_config(const ProtocolConfig& cfg) {
  if (cfg.mu < 1 || cfg.nu < 1) throw ArgumentError("protocol: mu and nu must be >= 1");
  if (cfg.L < 1 || cfg.M < 0) throw ArgumentError("protocol: need L >= 1 and M >= 0");
  if (!std::isfinite(cfg.beta) || cfg.beta <= 0.0) throw ArgumentError("protocol: beta must be finite and > 0");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ArgumentError("protocol: delta must lie in (0, 1)");
  if (!same_hamiltonians(cfg.rho.layout(), cfg.rho_prime.layout())) {
    throw ArgumentError("protocol: rho and rho' must share the same Hamiltonian");
  }
  if (!condition_holds(cfg.rho, cfg.rho_prime, cfg.mag_threshold)) {
    throw ArgumentError("protocol: the coherent modes of rho' are not integer combinations of those of rho");
  }
  // The free-energy order is a premise of the classical stage, which rotation_only skips.
  if (cfg.enforce_preconditions && cfg.stage == ProtocolStage::full) {
    const double f = free_energy(cfg.rho, cfg.beta);
    const double fp = free_energy(cfg.rho_prime, cfg.beta);
    if (!(f > fp)) {
      throw ArgumentError("protocol: requires F(rho) > F(rho'); got " + std::to_string(f) + " <= " + std::to_string(fp));
    }
  }
}

/// Per-copy free-energy loss of pinching mu copies: (F(rho^mu) - F(P(rho^mu))) / mu.
inline double pinching_gap_per_copy(const DensityOperator& rho, int mu, double beta) {
  const DensityOperator block = tensor_power(rho, mu);
  return (free_energy(block, beta) - free_energy(pinching(block), beta)) / mu;
}

namespace detail {

/// Eigenvalues of a block-diagonal (pinched) state, listed on the basis states of each energy block.
/// The rotation that achieves this is energy conserving.
inline VectorXd diagonalize_in_energy_blocks(const DensityOperator& pinched) {
  VectorXd p(static_cast<Eigen::Index>(pinched.dim()));
  for (const auto& [energy, idx] : energy_blocks(pinched.energies())) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    MatrixXcd sub(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = pinched.matrix()(idx[a], idx[b]);
    }
    const VectorXd ev = spectrum(sub);
    for (Eigen::Index a = 0; a < k; ++a) p(idx[a]) = std::max(0.0, ev(k - 1 - a));
  }
  return p / p.sum();
}

struct WorkSpace {
  SystemLayout layout;
  std::vector<Eigen::Index> block_index;
  std::vector<Eigen::Index> slot_index;
  std::vector<EnergyVector> energies;  // in X order
};

/// X = block states (+) one level per eigenvector, sorted by energy.
inline WorkSpace make_work_space(const ClassicalTargetPlan& plan) {
  std::vector<EnergyVector> all = plan.block_energies;
  all.insert(all.end(), plan.target_energies.begin(), plan.target_energies.end());
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return all[a].value() < all[b].value(); });
  WorkSpace ws;
  const std::size_t d = plan.block_energies.size();
  ws.block_index.resize(d);
  ws.slot_index.resize(plan.target_energies.size());
  std::vector<HamiltonianSpec::Level> levels;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t src = order[pos];
    if (src < d) {
      ws.block_index[src] = static_cast<Eigen::Index>(pos);
    } else {
      ws.slot_index[src - d] = static_cast<Eigen::Index>(pos);
    }
    levels.push_back({all[src], 1});
    ws.energies.push_back(all[src]);
  }
  ws.layout = {{"X", HamiltonianSpec(plan.block_energies.front().basis(), std::move(levels))}};
  ws.energies = layout_energies(ws.layout);
  return ws;
}

/// Pure-state trajectories of nu sequential rotations on X^nu (x) Q, one per configuration of classical
/// input levels. Returns the block-projected state, the leaked weight, and the input weight that met completed
/// columns of U.
struct BlockSimulation {
  MatrixXcd block_state;
  double leaked = 0;
  double boundary = 0;
};

inline BlockSimulation simulate_blocks(const ShiftCompensatedUnitary& u, const std::vector<Eigen::Index>& block_index,
                                       const VectorXd& work_state, const VectorXcd& resource, int nu) {
  const Eigen::Index xd = u.system_dim();
  const Eigen::Index nq = u.ladder_dim();
  const auto d = static_cast<Eigen::Index>(block_index.size());
  Eigen::Index xpow = 1;
  Eigen::Index dpow = 1;
  for (int k = 0; k < nu; ++k) {
    xpow *= xd;
    dpow *= d;
  }
  constexpr Eigen::Index kMaxVector = Eigen::Index{1} << 24;
  if (xpow > kMaxVector / nq) {
    throw ResourceLimitError("protocol: trajectory vector of length " + std::to_string(xpow) + "*" + std::to_string(nq) +
                             " exceeds " + std::to_string(kMaxVector));
  }
  require_dimension(static_cast<std::size_t>(dpow), "protocol output");
  std::vector<Eigen::Index> support;
  for (Eigen::Index x = 0; x < xd; ++x) {
    if (work_state(x) > 1e-15) support.push_back(x);
  }
  BlockSimulation out;
  out.block_state = MatrixXcd::Zero(dpow, dpow);
  std::vector<std::size_t> cfg(static_cast<std::size_t>(nu), 0);
  VectorXcd phi(xpow * nq);
  VectorXcd buf(xd * nq);
  while (true) {
    double w = 1;
    Eigen::Index xin = 0;
    for (int k = 0; k < nu; ++k) {
      const Eigen::Index x = support[cfg[static_cast<std::size_t>(k)]];
      w *= work_state(x);
      xin = xin * xd + x;
    }
    phi.setZero();
    phi.segment(xin * nq, nq) = resource;
    Eigen::Index outer = 1;
    Eigen::Index inner = xpow / xd;
    for (int k = 0; k < nu; ++k) {
      for (Eigen::Index o = 0; o < outer; ++o) {
        for (Eigen::Index i = 0; i < inner; ++i) {
          bool any = false;
          for (Eigen::Index x = 0; x < xd; ++x) {
            const Eigen::Index base = ((o * xd + x) * inner + i) * nq;
            buf.segment(x * nq, nq) = phi.segment(base, nq);
            any = any || buf.segment(x * nq, nq).squaredNorm() > 0.0;
          }
          if (!any) continue;
          for (Eigen::Index j = 0; j < buf.size(); ++j) {
            if (!u.column_defined(j)) out.boundary += w * std::norm(buf(j));
          }
          const VectorXcd res = u.op() * buf;
          for (Eigen::Index x = 0; x < xd; ++x) {
            const Eigen::Index base = ((o * xd + x) * inner + i) * nq;
            phi.segment(base, nq) = res.segment(x * nq, nq);
          }
        }
      }
      outer *= xd;
      inner /= std::max<Eigen::Index>(1, xd);
    }
    MatrixXcd pb(dpow, nq);
    for (Eigen::Index r = 0; r < dpow; ++r) {
      Eigen::Index rem = r;
      Eigen::Index xi = 0;
      Eigen::Index scale = 1;
      for (int k = nu - 1; k >= 0; --k) {
        const Eigen::Index c = rem % d;
        rem /= d;
        xi += block_index[static_cast<std::size_t>(c)] * scale;
        scale *= xd;
      }
      pb.row(r) = phi.segment(xi * nq, nq).transpose();
    }
    out.block_state.noalias() += w * (pb * pb.adjoint());
    out.leaked += w * std::max(0.0, 1.0 - pb.squaredNorm());
    // Advance the configuration odometer.
    int k = nu - 1;
    while (k >= 0 && ++cfg[static_cast<std::size_t>(k)] == support.size()) {
      cfg[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) break;
  }
  return out;
}

inline std::set<std::string> copy_labels(int first, int count, const std::string& prefix = "S") {
  std::set<std::string> s;
  for (int k = 0; k < count; ++k) s.insert(prefix + std::to_string(first + k));
  return s;
}

inline void finish_report(ConversionReport& rep, const DensityOperator& xi, const ProtocolConfig& cfg) {
  const int n = cfg.mu * cfg.nu;
  const DensityOperator block_target = tensor_power(cfg.rho_prime, cfg.mu);
  if (cfg.rho_prime.layout().size() != 1) throw ArgumentError("protocol: states must live on a single subsystem");
  for (int i = 1; i <= n; ++i) {
    const DensityOperator m = partial_trace(xi, {"S" + std::to_string(i)});
    rep.marginal_distances.push_back(trace_distance(m.matrix(), cfg.rho_prime.matrix()));
  }
  for (int k = 0; k < cfg.nu; ++k) {
    const DensityOperator m = partial_trace(xi, copy_labels(k * cfg.mu + 1, cfg.mu));
    rep.block_distances.push_back(trace_distance(m.matrix(), block_target.matrix()));
  }
  rep.max_marginal_distance = *std::max_element(rep.marginal_distances.begin(), rep.marginal_distances.end());
  rep.mean_marginal_distance =
      std::accumulate(rep.marginal_distances.begin(), rep.marginal_distances.end(), 0.0) / rep.marginal_distances.size();
  rep.achieved_failure = *std::max_element(rep.block_distances.begin(), rep.block_distances.end());
  // Joint output first: correlations only raise F, so the mean marginal F sits below it.
  rep.free_energy.push_back({"output", free_energy(xi, cfg.beta) / n});
  double marginal = 0;
  for (int i = 1; i <= n; ++i) marginal += free_energy(partial_trace(xi, {"S" + std::to_string(i)}), cfg.beta);
  rep.free_energy.push_back({"marginal_mean", marginal / n});
  for (std::size_t k = 1; k < rep.free_energy.size(); ++k) {
    if (rep.free_energy[k].per_copy > rep.free_energy[k - 1].per_copy + 1e-8) rep.free_energy_monotone = false;
  }
}

}  // namespace detail

/// Runs the pipeline on mu*nu copies of rho. On an infeasible classical stage the result carries the report only.
inline ConversionResult run_marginal_conversion(const ProtocolConfig& cfg) {
  validate_config(cfg);
  if (cfg.rho.layout().size() != 1) throw ArgumentError("protocol: states must live on a single subsystem");
  ConversionResult result;
  ConversionReport& rep = result.report;
  rep.seed = cfg.seed;
  rep.mu = cfg.mu;
  rep.nu = cfg.nu;
  rep.L = cfg.L;
  rep.M = cfg.M;
  rep.beta = cfg.beta;
  rep.stage = cfg.stage == ProtocolStage::full ? "full" : "rotation_only";
  const int n = cfg.mu * cfg.nu;

  const IntegerBasis modes = independent_basis(coherent_modes(cfg.rho, cfg.mag_threshold));
  rep.short_circuit = coherent_modes(cfg.rho_prime, cfg.mag_threshold).incoherent();
  const IntegerBasis used = rep.short_circuit ? IntegerBasis{} : modes;
  for (const auto& e : used.elements) rep.ladder_units.push_back(e.to_string());

  const DensityOperator block = tensor_power(cfg.rho, cfg.mu);
  VectorXd p_block;
  if (cfg.stage == ProtocolStage::full) {
    rep.free_energy.push_back({"input", free_energy(cfg.rho, cfg.beta)});
    const DensityOperator pinched = pinching(block);
    const double fp = free_energy(pinched, cfg.beta) / cfg.mu;
    rep.pinching_loss_per_copy = rep.free_energy.front().per_copy - fp;
    rep.free_energy.push_back({"pinched", fp});
    p_block = detail::diagonalize_in_energy_blocks(pinched);
  }

  ClassicalTargetPlan plan = build_classical_target(cfg.rho_prime, cfg.mu, used);
  const auto d = static_cast<Eigen::Index>(plan.block_energies.size());
  const DensityOperator tau_out = gibbs_state(tensor_power(cfg.rho_prime, n).layout(), cfg.beta);

  if (rep.short_circuit) {
    // Energy-definite eigenvectors: pair each with a block basis state of the same energy.
    std::map<EnergyVector, std::vector<Eigen::Index>> free_states = energy_blocks(plan.block_energies);
    std::vector<Eigen::Index> assigned(plan.size());
    for (std::size_t j = 0; j < plan.size(); ++j) {
      auto& pool = free_states[plan.target_energies[j]];
      if (pool.empty()) throw ConstructionError("protocol: eigenvectors of the target do not match its energy blocks");
      assigned[j] = pool.front();
      pool.erase(pool.begin());
    }
    VectorXd q = VectorXd::Zero(d);
    MatrixXcd v = MatrixXcd::Zero(d, d);
    for (std::size_t j = 0; j < plan.size(); ++j) {
      q(assigned[j]) = plan.eigenvalues[j];
      v.col(assigned[j]) = plan.eigenvectors.col(static_cast<Eigen::Index>(j));
    }
    const double ec = check_energy_conserving(v, layout_numeric_energies(plan.block_layout),
                                              layout_numeric_energies(plan.block_layout));
    if (ec > 1e-9) throw ConstructionError("protocol: block rotation is not energy conserving (" + std::to_string(ec) + ")");
    VectorXd q_actual = q;
    if (cfg.stage == ProtocolStage::full) {
      const ClassicalState pc(p_block, plan.block_energies);
      const ClassicalState qc(q, plan.block_energies);
      const auto lp = solve_gibbs_stochastic(pc, qc, cfg.beta);
      rep.classical_feasible = lp.feasible;
      rep.classical_residual = lp.residual;
      rep.classical_phase_one = lp.phase_one_value;
      rep.classical_curve_gap = lp.curve.worst_gap;
      rep.classical_violation = lp.curve.violation;
      if (!lp.feasible) {
        rep.status = "classical_infeasible";
        return result;
      }
      q_actual = apply_classical_map(lp.map, pc).probs;
    } else {
      rep.classical_feasible = true;
    }
    rep.free_energy.push_back({"classical_target",
                               classical_free_energy(ClassicalState(q_actual, plan.block_energies), cfg.beta) / cfg.mu});
    MatrixXcd out = v * q_actual.cast<Complex>().asDiagonal() * v.adjoint();
    out = 0.5 * (out + out.adjoint());
    MatrixXcd joint = out;
    for (int k = 1; k < cfg.nu; ++k) joint = kroneckerProduct(joint, out).eval();
    joint = 0.5 * (joint + joint.adjoint());
    DensityOperator xi(joint, tau_out.layout(), Tolerances{1e-9, 1e-9, 1e-9});
    rep.fresh_block_distance = trace_distance(out, tensor_power(cfg.rho_prime, cfg.mu).matrix());
    detail::finish_report(rep, xi, cfg);
    rep.predicted_failure = rep.fresh_block_distance;
    rep.walk_accounting_holds = rep.achieved_failure <= *rep.predicted_failure + 1e-12;
    result.xi = std::move(xi);
    ProtocolArtifacts art{plan, plan.block_layout, {}, {}, q_actual, std::nullopt, VectorXcd()};
    for (Eigen::Index c = 0; c < d; ++c) art.block_index.push_back(c);
    art.slot_index = assigned;
    result.artifacts = std::move(art);
    return result;
  }

  // Coherent target: work space, classical map, rotation.
  const detail::WorkSpace ws = detail::make_work_space(plan);
  const auto xd = static_cast<Eigen::Index>(ws.energies.size());
  VectorXd q_x = VectorXd::Zero(xd);
  for (std::size_t j = 0; j < plan.size(); ++j) q_x(ws.slot_index[j]) = plan.eigenvalues[j];
  VectorXd work = q_x;
  if (cfg.stage == ProtocolStage::full) {
    VectorXd p_x = VectorXd::Zero(xd);
    for (Eigen::Index c = 0; c < d; ++c) p_x(ws.block_index[static_cast<std::size_t>(c)]) = p_block(c);
    const ClassicalState pc(p_x, ws.energies);
    const ClassicalState qc(q_x, ws.energies);
    const auto lp = solve_gibbs_stochastic(pc, qc, cfg.beta);
    rep.classical_feasible = lp.feasible;
    rep.classical_residual = lp.residual;
    rep.classical_phase_one = lp.phase_one_value;
    rep.classical_curve_gap = lp.curve.worst_gap;
    rep.classical_violation = lp.curve.violation;
    if (!lp.feasible) {
      rep.status = "classical_infeasible";
      return result;
    }
    work = apply_classical_map(lp.map, pc).probs;
  } else {
    rep.classical_feasible = true;
  }
  rep.free_energy.push_back({"classical_target", classical_free_energy(ClassicalState(work, ws.energies), cfg.beta) / cfg.mu});

  MatrixXcd v = MatrixXcd::Zero(xd, xd);
  for (std::size_t j = 0; j < plan.size(); ++j) {
    const Eigen::Index t = ws.slot_index[j];
    for (Eigen::Index c = 0; c < d; ++c) {
      const Complex f = plan.eigenvectors(c, static_cast<Eigen::Index>(j));
      if (std::abs(f) <= 1e-12) continue;
      const Eigen::Index b = ws.block_index[static_cast<std::size_t>(c)];
      v(b, t) = f;
      v(t, b) = std::conj(f);
    }
  }
  std::int64_t lmax = 0;
  for (const auto& row : plan.shifts) {
    for (const auto& s : row) {
      for (auto x : s) lmax = std::max<std::int64_t>(lmax, std::llabs(x));
    }
  }
  const int truncation = cfg.M + cfg.L + cfg.nu * static_cast<int>(lmax) + cfg.margin;
  rep.truncation = truncation;
  std::vector<Ladder> ladders;
  for (std::size_t l = 0; l < used.size(); ++l) ladders.push_back({"Q" + std::to_string(l + 1), used.elements[l], truncation});
  ShiftCompensatedUnitary u = build_shift_unitary(v, ws.layout, ladders);
  VectorXcd eta = resource_vector(cfg.L, cfg.M, truncation);
  VectorXcd resource = VectorXcd::Ones(1);
  for (std::size_t l = 0; l < ladders.size(); ++l) resource = kroneckerProduct(resource, eta).eval();

  const auto sim = detail::simulate_blocks(u, ws.block_index, work, resource, cfg.nu);
  const auto fresh = detail::simulate_blocks(u, ws.block_index, work, resource, 1);
  rep.leaked_mass = sim.leaked;
  rep.boundary_mass = sim.boundary;
  if (sim.boundary > 1e-6) {
    rep.warnings.push_back("input weight " + std::to_string(sim.boundary) + " met the ladder truncation");
  }
  MatrixXcd joint = sim.block_state + sim.leaked * tau_out.matrix();
  joint = 0.5 * (joint + joint.adjoint());
  DensityOperator xi(joint, tau_out.layout(), Tolerances{1e-9, 1e-9, 1e-9});
  const DensityOperator tau_block = gibbs_state(plan.block_layout, cfg.beta);
  MatrixXcd fresh_out = fresh.block_state + fresh.leaked * tau_block.matrix();
  fresh_out = 0.5 * (fresh_out + fresh_out.adjoint());
  rep.fresh_block_distance = trace_distance(fresh_out, tensor_power(cfg.rho_prime, cfg.mu).matrix());

  double failure_bound = rep.fresh_block_distance;
  bool bound_applies = true;
  for (std::size_t l = 0; l < ladders.size(); ++l) {
    const WalkSpec w = walk_from_unitary(u, work, l, std::max<std::int64_t>(1, cfg.M));
    WalkReport wr;
    wr.ladder = ladders[l].label;
    wr.jumps = w.jumps;
    wr.drift = w.drift();
    if (wr.drift > 0.0) {
      wr.gamma = solve_gamma(w).gamma;
      wr.gamma_M = std::pow(*wr.gamma, cfg.M);
      failure_bound += *wr.gamma_M;
    } else {
      bound_applies = false;
    }
    rep.walks.push_back(std::move(wr));
  }
  detail::finish_report(rep, xi, cfg);
  if (bound_applies) {
    rep.predicted_failure = failure_bound;
    rep.walk_accounting_holds = rep.achieved_failure <= failure_bound + 1e-12;
  }
  result.xi = std::move(xi);
  result.artifacts = ProtocolArtifacts{std::move(plan), ws.layout, ws.block_index, ws.slot_index, work, std::move(u), resource};
  return result;
}

// ---------------------------------------------------------------------------
// Correlated catalyst

using ConversionMap = std::function<DensityOperator(const DensityOperator&)>;

/// Catalyst state (1/n) sum_k rho^{k-1} (x) Xi'_{n-k} (x) |k><k| on S^{n-1} (x) R, kept per label.
/// Xi'_i is the marginal of Xi' on its first i copies.
struct CatalystState {
  int n = 0;
  int padding = 0;
  DensityOperator rho;
  std::vector<MatrixXcd> xi_marginals;  // index i holds Xi'_i, i = 0..n (Xi'_0 is the 1x1 unit)
  SystemLayout copy_layout;             // single copy

  double delta() const { return static_cast<double>(padding) / n; }

  /// rho^{k-1} (x) Xi'_{n-k} as a matrix on n-1 copies, k = 1..n.
  MatrixXcd component(int k) const {
    MatrixXcd m = MatrixXcd::Ones(1, 1);
    for (int c = 1; c < k; ++c) m = kroneckerProduct(m, rho.matrix()).eval();
    return kroneckerProduct(m, xi_marginals[static_cast<std::size_t>(n - k)]).eval();
  }

  SystemLayout catalyst_layout() const {
    SystemLayout l;
    for (int c = 1; c < n; ++c) l.push_back({"S" + std::to_string(c), copy_layout.front().hamiltonian});
    l.push_back({"R", HamiltonianSpec::flat(copy_layout.front().hamiltonian.basis(), n)});
    return l;
  }

  /// Full catalyst state; only for small instances.
  DensityOperator materialize() const {
    const SystemLayout layout = catalyst_layout();
    require_dimension(layout_dimension(layout), "catalyst");
    const auto dim = static_cast<Eigen::Index>(layout_dimension(layout));
    MatrixXcd c = MatrixXcd::Zero(dim, dim);
    for (int k = 1; k <= n; ++k) {
      MatrixXcd label = MatrixXcd::Zero(n, n);
      label(k - 1, k - 1) = 1.0;
      c += kroneckerProduct(component(k), label).eval() / static_cast<double>(n);
    }
    return DensityOperator(c, layout, Tolerances{1e-9, 1e-9, 1e-9});
  }

  VectorXd register_marginal() const { return VectorXd::Constant(n, 1.0 / n); }
};

namespace detail {

inline MatrixXcd trace_last_copy(const MatrixXcd& m, Eigen::Index d) {
  const Eigen::Index outer = m.rows() / d;
  MatrixXcd out = MatrixXcd::Zero(outer, outer);
  for (Eigen::Index a = 0; a < outer; ++a) {
    for (Eigen::Index b = 0; b < outer; ++b) {
      Complex s = 0;
      for (Eigen::Index k = 0; k < d; ++k) s += m(a * d + k, b * d + k);
      out(a, b) = s;
    }
  }
  return out;
}

inline MatrixXcd last_copy_marginal(const MatrixXcd& m, Eigen::Index d) {
  const Eigen::Index outer = m.rows() / d;
  MatrixXcd out = MatrixXcd::Zero(d, d);
  for (Eigen::Index a = 0; a < outer; ++a) out += m.block(a * d, a * d, d, d);
  return out;
}

inline std::vector<MatrixXcd> nested_marginals(const MatrixXcd& full, Eigen::Index d, int n) {
  std::vector<MatrixXcd> m(static_cast<std::size_t>(n) + 1);
  m[static_cast<std::size_t>(n)] = full;
  for (int i = n; i > 0; --i) m[static_cast<std::size_t>(i) - 1] = trace_last_copy(m[static_cast<std::size_t>(i)], d);
  return m;
}

}  // namespace detail

inline int catalyst_padding(int copies, double delta) {
  return std::max(1, static_cast<int>(std::ceil(delta * copies / (1.0 - delta) - 1e-12)));
}

/// Builds the catalyst from the n-copy map Lambda' (output Xi' = Lambda'(rho^n)).
inline CatalystState build_catalyst(const DensityOperator& rho, const ConversionMap& lambda_prime, int n, int padding) {
  if (n < 2) throw ArgumentError("catalyst: n must be >= 2");
  if (rho.layout().size() != 1) throw ArgumentError("catalyst: rho must live on a single subsystem");
  const auto d = static_cast<Eigen::Index>(rho.dim());
  double full = 1;
  for (int k = 0; k < n; ++k) full *= static_cast<double>(d);
  if (full > static_cast<double>(max_dimension())) {
    double factored = 0;
    double p = 1;
    for (int i = 0; i <= n; ++i) {
      factored += p * p;
      p *= static_cast<double>(d);
    }
    throw ResourceLimitError("catalyst: Xi' needs dimension " + std::to_string(full) + " (factored storage " +
                             std::to_string(factored) + " entries) beyond the limit " + std::to_string(max_dimension()));
  }
  const DensityOperator input = tensor_power(rho, n);
  const DensityOperator xi = lambda_prime(input);
  if (static_cast<Eigen::Index>(xi.dim()) != input.matrix().rows()) throw ArgumentError("catalyst: Lambda' changes the dimension");
  CatalystState c{n, padding, rho, detail::nested_marginals(xi.matrix(), d, n), rho.layout()};
  return c;
}

struct CatalyticStepResult {
  DensityOperator system_out;
  CatalystState catalyst_out;
  double catalyst_residual = 0;  // max entry deviation between returned and original catalyst components
  double system_distance = 0;    // trace distance of the system to rho'
  double mean_marginal_distance = 0;  // over the first n - padding copies of Xi'
  double mixture_residual = 0;   // system vs (1-delta) mean(marginals) + delta tau
  double bookkeeping = 0;        // (1-delta) * mean distance + delta * d(tau, rho')
  double bookkeeping_bound = 0;  // (1-delta) * mean distance + 2 delta, as a 1-norm bound
  std::optional<double> joint_residual;      // Tr_S(pi) vs c, materialized (n <= 3)
  std::optional<double> mutual_information;  // I(S:C) in pi (n <= 3)
};

/// Applies Lambda' on the label-n branch, relabels k -> k+1 and n -> 1, and assigns the last copy to the system.
inline CatalyticStepResult run_catalytic_step(const CatalystState& cat, const ConversionMap& lambda_prime,
                                              const DensityOperator& rho_prime, double beta) {
  const int n = cat.n;
  const auto d = static_cast<Eigen::Index>(cat.rho.dim());
  const DensityOperator fresh = lambda_prime(tensor_power(cat.rho, n));
  // After relabeling, label 1 holds Xi'_n and label k >= 2 holds rho^{k-1} (x) Xi'_{n-k+1}.
  std::vector<MatrixXcd> xi_parts(static_cast<std::size_t>(n) + 1);
  xi_parts[1] = fresh.matrix();
  for (int k = 2; k <= n; ++k) xi_parts[static_cast<std::size_t>(k)] = cat.xi_marginals[static_cast<std::size_t>(n - k + 1)];

  CatalyticStepResult r{cat.rho, cat, 0, 0, 0, 0, 0, 0, std::nullopt, std::nullopt};
  MatrixXcd system = MatrixXcd::Zero(d, d);
  for (int k = 1; k <= n; ++k) {
    const MatrixXcd& part = xi_parts[static_cast<std::size_t>(k)];
    const MatrixXcd returned = detail::trace_last_copy(part, d);
    const MatrixXcd& original = cat.xi_marginals[static_cast<std::size_t>(n - k)];
    r.catalyst_residual = std::max(r.catalyst_residual, (returned - original).cwiseAbs().maxCoeff());
    r.catalyst_out.xi_marginals[static_cast<std::size_t>(n - k)] = returned;
    system += detail::last_copy_marginal(part, d) / static_cast<double>(n);
  }
  if (r.catalyst_residual > 1e-12) {
    throw ConstructionError("catalyst: returned catalyst deviates by " + std::to_string(r.catalyst_residual));
  }
  system = 0.5 * (system + system.adjoint());
  r.system_out = DensityOperator(system, cat.copy_layout, Tolerances{1e-9, 1e-9, 1e-9});
  r.system_distance = trace_distance(system, rho_prime.matrix());

  const int m = n - cat.padding;
  const DensityOperator tau = gibbs_state(cat.copy_layout, beta);
  MatrixXcd mean = MatrixXcd::Zero(d, d);
  for (int i = 1; i <= m; ++i) {
    const MatrixXcd mi = detail::last_copy_marginal(cat.xi_marginals[static_cast<std::size_t>(i)], d);
    r.mean_marginal_distance += trace_distance(mi, rho_prime.matrix()) / m;
    mean += mi / static_cast<double>(m);
  }
  const double delta = cat.delta();
  r.mixture_residual = (system - ((1.0 - delta) * mean + delta * tau.matrix())).cwiseAbs().maxCoeff();
  r.bookkeeping = (1.0 - delta) * r.mean_marginal_distance + delta * trace_distance(tau.matrix(), rho_prime.matrix());
  r.bookkeeping_bound = (1.0 - delta) * 2.0 * r.mean_marginal_distance + 2.0 * delta;

  if (n <= 3) {
    SystemLayout layout;
    for (int c = 1; c <= n; ++c) layout.push_back({"S" + std::to_string(c), cat.copy_layout.front().hamiltonian});
    layout.push_back({"R", HamiltonianSpec::flat(cat.copy_layout.front().hamiltonian.basis(), n)});
    require_dimension(layout_dimension(layout), "catalyst joint state");
    const auto dim = static_cast<Eigen::Index>(layout_dimension(layout));
    MatrixXcd pi = MatrixXcd::Zero(dim, dim);
    for (int k = 1; k <= n; ++k) {
      MatrixXcd comp = MatrixXcd::Ones(1, 1);
      for (int c = 1; c < k; ++c) comp = kroneckerProduct(comp, cat.rho.matrix()).eval();
      comp = kroneckerProduct(comp, xi_parts[static_cast<std::size_t>(k)]).eval();
      MatrixXcd label = MatrixXcd::Zero(n, n);
      label(k - 1, k - 1) = 1.0;
      pi += kroneckerProduct(comp, label).eval() / static_cast<double>(n);
    }
    pi = 0.5 * (pi + pi.adjoint());
    const DensityOperator joint(pi, layout, Tolerances{1e-9, 1e-9, 1e-9});
    std::set<std::string> keep;
    for (int c = 1; c < n; ++c) keep.insert("S" + std::to_string(c));
    keep.insert("R");
    const DensityOperator back = partial_trace(joint, keep);
    r.joint_residual = (back.matrix() - cat.materialize().matrix()).cwiseAbs().maxCoeff();
    r.mutual_information = mutual_information(joint, {"S" + std::to_string(n)});
  }
  return r;
}

struct PaddedConversion {
  ConversionMap map;
  int n = 0;
  int padding = 0;
  ConversionResult run;
};

/// Lambda' from the marginal protocol: Xi (x) tau^{padding} on n = mu*nu + padding copies. The map is only
/// defined on the i.i.d. input rho^n, which is all the catalyst construction feeds it.
inline PaddedConversion make_padded_conversion(const ProtocolConfig& cfg) {
  PaddedConversion pc;
  pc.run = run_marginal_conversion(cfg);
  if (!pc.run.xi) throw ArgumentError("catalyst: the marginal conversion did not complete (" + pc.run.report.status + ")");
  const int m = cfg.mu * cfg.nu;
  pc.padding = catalyst_padding(m, cfg.delta);
  pc.n = m + pc.padding;
  MatrixXcd out = pc.run.xi->matrix();
  const MatrixXcd tau = gibbs_state(cfg.rho.layout(), cfg.beta).matrix();
  for (int k = 0; k < pc.padding; ++k) out = kroneckerProduct(out, tau).eval();
  const DensityOperator expected_input = tensor_power(cfg.rho, pc.n);
  const DensityOperator output(out, expected_input.layout(), Tolerances{1e-9, 1e-9, 1e-9});
  pc.map = [expected_input, output](const DensityOperator& in) {
    if (in.dim() != expected_input.dim() ||
        (in.matrix() - expected_input.matrix()).cwiseAbs().maxCoeff() > 1e-12) {
      throw ArgumentError("conversion map: defined only on the i.i.d. input it was built for");
    }
    return output;
  };
  return pc;
}

}  // namespace thermoops
