#pragma once

// Thermal operations, pinching, and structural checks on channels
// (energy conservation, Gibbs preservation, covariance).

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

#include "thermoops/qstate.hpp"
#include "thermoops/random.hpp"

namespace thermoops {

using Channel = std::function<DensityOperator(const DensityOperator&)>;

/// max_ij |V_ij| * |E_in[j] - E_out[i]|, i.e. the max-norm of V H_in - H_out V for diagonal H.
inline double check_energy_conserving(const MatrixXcd& v, const VectorXd& e_in, const VectorXd& e_out) {
  if (v.cols() != e_in.size() || v.rows() != e_out.size()) {
    throw ArgumentError("check_energy_conserving: operator is " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + ", energies give " + std::to_string(e_out.size()) + "x" +
                        std::to_string(e_in.size()));
  }
  double r = 0.0;
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    for (Eigen::Index i = 0; i < v.rows(); ++i) r = std::max(r, std::abs(v(i, j)) * std::abs(e_in(j) - e_out(i)));
  }
  return r;
}

inline double check_energy_conserving(const MatrixXcd& v, const SystemLayout& in, const SystemLayout& out) {
  return check_energy_conserving(v, layout_numeric_energies(in), layout_numeric_energies(out));
}

/// Unitary (or isometry) on system (+) environment, mapping layout `system_in`
/// plus `env` to `system_out` plus `env`, with the environment in its Gibbs state.
class ThermalOperationSpec {
 public:
  ThermalOperationSpec(SystemLayout system_in, SystemLayout system_out, Subsystem env, double beta, MatrixXcd unitary,
                       const Tolerances& tol = {})
      : in_(std::move(system_in)), out_(std::move(system_out)), env_(std::move(env)), beta_(beta),
        v_(std::move(unitary)) {
    if (!std::isfinite(beta_) || beta_ <= 0.0) throw ArgumentError("beta must be finite and > 0");
    check_unique_labels(in_);
    check_unique_labels(out_);
    const auto d_env = static_cast<Eigen::Index>(env_.hamiltonian.dimension());
    const auto d_in = static_cast<Eigen::Index>(layout_dimension(in_)) * d_env;
    const auto d_out = static_cast<Eigen::Index>(layout_dimension(out_)) * d_env;
    if (d_in != d_out) throw ArgumentError("thermal operation: input and output dimensions differ; embed first");
    if (v_.rows() != d_out || v_.cols() != d_in) {
      throw ArgumentError("thermal operation: unitary must be " + std::to_string(d_out) + "x" + std::to_string(d_in));
    }
    const double unitarity = (v_.adjoint() * v_ - MatrixXcd::Identity(d_in, d_in)).cwiseAbs().maxCoeff();
    if (unitarity > tol.energy_conserving) {
      throw ArgumentError("thermal operation: V is not unitary (residual " + std::to_string(unitarity) + ")");
    }
    residual_ = check_energy_conserving(v_, joint(in_), joint(out_));
    if (residual_ > tol.energy_conserving) {
      throw ArgumentError("thermal operation: V is not energy conserving (residual " + std::to_string(residual_) + ")");
    }
    env_state_ = gibbs_state(SystemLayout{env_}, beta_).matrix();
  }

  /// Same layout in and out.
  ThermalOperationSpec(SystemLayout system, Subsystem env, double beta, MatrixXcd unitary, const Tolerances& tol = {})
      : ThermalOperationSpec(system, system, std::move(env), beta, std::move(unitary), tol) {}

  const SystemLayout& input_layout() const { return in_; }
  const SystemLayout& output_layout() const { return out_; }
  const Subsystem& environment() const { return env_; }
  double beta() const { return beta_; }
  const MatrixXcd& unitary() const { return v_; }
  double intertwining_residual() const { return residual_; }

  SystemLayout joint(const SystemLayout& sys) const {
    SystemLayout l = sys;
    l.push_back(env_);
    return l;
  }

  const MatrixXcd& environment_state() const { return env_state_; }

 private:
  SystemLayout in_;
  SystemLayout out_;
  Subsystem env_;
  double beta_;
  MatrixXcd v_;
  double residual_ = 0.0;
  MatrixXcd env_state_;
};

inline bool same_hamiltonians(const SystemLayout& a, const SystemLayout& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!(a[k].hamiltonian == b[k].hamiltonian)) return false;
  }
  return true;
}

/// Tr_E[V (rho (x) tau_E) V^dagger].
inline DensityOperator apply_thermal(const ThermalOperationSpec& spec, const DensityOperator& rho) {
  if (!same_hamiltonians(rho.layout(), spec.input_layout())) {
    throw ArgumentError("apply_thermal: state Hamiltonians do not match the operation's input layout");
  }
  require_dimension(rho.dim() * spec.environment().hamiltonian.dimension(), "apply_thermal");
  const MatrixXcd joint = kroneckerProduct(rho.matrix(), spec.environment_state()).eval();
  const MatrixXcd evolved = spec.unitary() * joint * spec.unitary().adjoint();
  const SystemLayout out_joint = spec.joint(spec.output_layout());
  std::vector<bool> keep(out_joint.size(), true);
  keep.back() = false;
  MatrixXcd reduced = detail::partial_trace_matrix(evolved, out_joint, keep);
  reduced = 0.5 * (reduced + reduced.adjoint());
  return DensityOperator(std::move(reduced), spec.output_layout());
}

inline Channel as_channel(const ThermalOperationSpec& spec) {
  return [spec](const DensityOperator& rho) { return apply_thermal(spec, rho); };
}

/// Groups basis indices by exact energy; groups are ordered by energy (lexicographic on coefficients).
inline std::map<EnergyVector, std::vector<Eigen::Index>> energy_blocks(const std::vector<EnergyVector>& energies) {
  std::map<EnergyVector, std::vector<Eigen::Index>> blocks;
  for (std::size_t i = 0; i < energies.size(); ++i) blocks[energies[i]].push_back(static_cast<Eigen::Index>(i));
  return blocks;
}

inline DensityOperator pinching(const DensityOperator& rho) {
  const auto e = rho.energies();
  MatrixXcd out = MatrixXcd::Zero(rho.matrix().rows(), rho.matrix().cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      if (e[static_cast<std::size_t>(i)] == e[static_cast<std::size_t>(j)]) out(i, j) = rho.matrix()(i, j);
    }
  }
  return DensityOperator(std::move(out), rho.layout());
}

inline double check_gibbs_preserving(const Channel& channel, const SystemLayout& layout, double beta) {
  const DensityOperator tau = gibbs_state(layout, beta);
  const DensityOperator out = channel(tau);
  return trace_distance(out.matrix(), gibbs_state(out.layout(), beta).matrix());
}

/// Haar unitary inside each exact-energy block of the given basis energies.
inline MatrixXcd random_energy_conserving_unitary(const std::vector<EnergyVector>& energies, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(energies.size());
  MatrixXcd u = MatrixXcd::Zero(n, n);
  for (const auto& [energy, idx] : energy_blocks(energies)) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    const MatrixXcd block = haar_unitary(k, rng);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) u(idx[a], idx[b]) = block(a, b);
    }
  }
  return u;
}

namespace detail {

inline MatrixXcd evolve(const MatrixXcd& rho, const VectorXd& energies, double t) {
  const VectorXcd phase = (energies.cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
  return phase.asDiagonal() * rho * phase.conjugate().asDiagonal();
}

inline double smallest_gap(const VectorXd& e) {
  double gap = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    for (Eigen::Index j = 0; j < e.size(); ++j) {
      const double d = std::abs(e(i) - e(j));
      if (d > 1e-12 && (gap == 0.0 || d < gap)) gap = d;
    }
  }
  return gap == 0.0 ? 1.0 : gap;
}

}  // namespace detail

/// Basis states plus the pairwise (|i>+|j>)/sqrt2 and (|i>+i|j>)/sqrt2 for small d; seeded random pure states otherwise.
inline std::vector<DensityOperator> default_probes(const SystemLayout& layout, std::uint64_t seed = 7) {
  const auto d = static_cast<Eigen::Index>(layout_dimension(layout));
  std::vector<DensityOperator> probes;
  for (Eigen::Index i = 0; i < d; ++i) probes.push_back(DensityOperator::pure(VectorXcd::Unit(d, i), layout));
  if (d <= 6) {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = i + 1; j < d; ++j) {
        VectorXcd a = VectorXcd::Unit(d, i) + VectorXcd::Unit(d, j);
        VectorXcd b = VectorXcd::Unit(d, i) + Complex(0.0, 1.0) * VectorXcd::Unit(d, j);
        probes.push_back(DensityOperator::pure(a, layout));
        probes.push_back(DensityOperator::pure(b, layout));
      }
    }
  } else {
    Rng rng(seed);
    for (int k = 0; k < 2 * d; ++k) probes.push_back(DensityOperator::pure(random_pure_vector(d, rng), layout));
  }
  return probes;
}

inline std::vector<double> default_times(const SystemLayout& layout, int count = 16, std::uint64_t seed = 11) {
  const double period = 2.0 * std::numbers::pi / detail::smallest_gap(layout_numeric_energies(layout));
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, period);
  std::vector<double> t(static_cast<std::size_t>(count));
  for (auto& x : t) x = u(rng);
  return t;
}

/// max over times and probes of the trace distance between Lambda(U_t rho U_t^dagger) and U'_t Lambda(rho) U'_t^dagger,
/// where U'_t uses the output state's own Hamiltonian.
inline double check_covariant(const Channel& channel, const SystemLayout& layout, std::vector<double> times = {},
                              std::vector<DensityOperator> probes = {}) {
  if (times.empty()) times = default_times(layout);
  if (probes.empty()) probes = default_probes(layout);
  const VectorXd e_in = layout_numeric_energies(layout);
  double worst = 0.0;
  for (const auto& rho : probes) {
    const DensityOperator out = channel(rho);
    const VectorXd e_out = out.numeric_energies();
    for (double t : times) {
      const DensityOperator evolved(detail::evolve(rho.matrix(), e_in, t), rho.layout(), Tolerances{1e-8, 1e-8, 1e-8});
      const MatrixXcd lhs = channel(evolved).matrix();
      const MatrixXcd rhs = detail::evolve(out.matrix(), e_out, t);
      worst = std::max(worst, trace_distance(lhs, rhs));
    }
  }
  return worst;
}

}  // namespace thermoops
