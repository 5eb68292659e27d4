#pragma once

// States, diagonal Hamiltonians, composition and entropic functionals.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "thermoops/config.hpp"
#include "thermoops/energy.hpp"

namespace thermoops {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Diagonal Hamiltonian given as ordered energy levels with degeneracies.
/// Levels are shifted on construction so the ground energy is exactly zero.
class HamiltonianSpec {
 public:
  struct Level {
    EnergyVector energy;
    int degeneracy = 1;
  };

  HamiltonianSpec() = default;

  HamiltonianSpec(BasisPtr basis, std::vector<Level> levels) : basis_(std::move(basis)), levels_(std::move(levels)) {
    if (!basis_) throw ArgumentError("HamiltonianSpec needs a frequency basis");
    if (levels_.empty()) throw ArgumentError("HamiltonianSpec needs at least one level");
    for (const auto& lv : levels_) {
      if (lv.degeneracy < 1) throw ArgumentError("level degeneracy must be >= 1");
      if (!compatible(lv.energy.basis(), basis_)) throw ArgumentError("level energy uses a different frequency basis");
    }
    for (std::size_t k = 1; k < levels_.size(); ++k) {
      if (levels_[k].energy.value() < levels_[k - 1].energy.value()) {
        throw ArgumentError("HamiltonianSpec levels must be in nondecreasing energy order");
      }
    }
    const EnergyVector ground = levels_.front().energy;
    if (!ground.is_zero()) {
      for (auto& lv : levels_) lv.energy -= ground;
    }
    for (const auto& lv : levels_) dimension_ += static_cast<std::size_t>(lv.degeneracy);
  }

  /// Equally spaced nondegenerate ladder 0, unit, ..., (count-1)*unit.
  static HamiltonianSpec ladder(const EnergyVector& unit, int count) {
    if (count < 1) throw ArgumentError("ladder needs at least one level");
    if (unit.value() <= 0.0) throw ArgumentError("ladder unit must have positive energy");
    std::vector<Level> levels;
    levels.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) levels.push_back({static_cast<std::int64_t>(k) * unit, 1});
    return HamiltonianSpec(unit.basis(), std::move(levels));
  }

  /// Flat Hamiltonian (single level of the given degeneracy).
  static HamiltonianSpec flat(const BasisPtr& basis, int dimension) {
    return HamiltonianSpec(basis, {{EnergyVector::zero(basis), dimension}});
  }

  const BasisPtr& basis() const { return basis_; }
  const std::vector<Level>& levels() const { return levels_; }
  std::size_t dimension() const { return dimension_; }

  /// Per basis-state energies (levels expanded by degeneracy).
  std::vector<EnergyVector> energies() const {
    std::vector<EnergyVector> out;
    out.reserve(dimension_);
    for (const auto& lv : levels_) {
      for (int k = 0; k < lv.degeneracy; ++k) out.push_back(lv.energy);
    }
    return out;
  }

  VectorXd numeric_energies() const {
    VectorXd out(static_cast<Eigen::Index>(dimension_));
    Eigen::Index i = 0;
    for (const auto& lv : levels_) {
      const double v = lv.energy.value();
      for (int k = 0; k < lv.degeneracy; ++k) out(i++) = v;
    }
    return out;
  }

  friend bool operator==(const HamiltonianSpec& a, const HamiltonianSpec& b) {
    if (!compatible(a.basis_, b.basis_) || a.levels_.size() != b.levels_.size()) return false;
    for (std::size_t k = 0; k < a.levels_.size(); ++k) {
      if (!(a.levels_[k].energy == b.levels_[k].energy) || a.levels_[k].degeneracy != b.levels_[k].degeneracy) {
        return false;
      }
    }
    return true;
  }

 private:
  BasisPtr basis_;
  std::vector<Level> levels_;
  std::size_t dimension_ = 0;
};

struct Subsystem {
  std::string label;
  HamiltonianSpec hamiltonian;
};

using SystemLayout = std::vector<Subsystem>;

inline std::size_t layout_dimension(const SystemLayout& layout) {
  std::size_t d = 1;
  for (const auto& s : layout) d *= s.hamiltonian.dimension();
  return d;
}

/// Total energies of a composite layout in Kronecker order (first subsystem
/// is the most significant index).
inline std::vector<EnergyVector> layout_energies(const SystemLayout& layout) {
  if (layout.empty()) throw ArgumentError("empty system layout");
  std::vector<EnergyVector> total = layout.front().hamiltonian.energies();
  for (std::size_t s = 1; s < layout.size(); ++s) {
    if (!compatible(layout[s].hamiltonian.basis(), layout.front().hamiltonian.basis())) {
      throw ArgumentError("subsystems use incompatible frequency bases");
    }
    const auto local = layout[s].hamiltonian.energies();
    std::vector<EnergyVector> next;
    next.reserve(total.size() * local.size());
    for (const auto& a : total) {
      for (const auto& b : local) next.push_back(a + b);
    }
    total = std::move(next);
  }
  return total;
}

inline VectorXd layout_numeric_energies(const SystemLayout& layout) {
  VectorXd total = layout.front().hamiltonian.numeric_energies();
  for (std::size_t s = 1; s < layout.size(); ++s) {
    const VectorXd local = layout[s].hamiltonian.numeric_energies();
    VectorXd next(total.size() * local.size());
    for (Eigen::Index a = 0; a < total.size(); ++a) {
      for (Eigen::Index b = 0; b < local.size(); ++b) next(a * local.size() + b) = total(a) + local(b);
    }
    total = std::move(next);
  }
  return total;
}

inline void check_unique_labels(const SystemLayout& layout) {
  std::set<std::string> seen;
  for (const auto& s : layout) {
    if (!seen.insert(s.label).second) throw ArgumentError("duplicate subsystem label '" + s.label + "'");
  }
}

/// Hermitian, PSD, unit-trace matrix on a labeled composite system.
class DensityOperator {
 public:
  DensityOperator(MatrixXcd matrix, SystemLayout layout, const Tolerances& tol = {})
      : matrix_(std::move(matrix)), layout_(std::move(layout)) {
    if (layout_.empty()) throw ArgumentError("DensityOperator needs at least one subsystem");
    check_unique_labels(layout_);
    const auto dim = static_cast<Eigen::Index>(layout_dimension(layout_));
    if (matrix_.rows() != dim || matrix_.cols() != dim) {
      throw ArgumentError("matrix is " + std::to_string(matrix_.rows()) + "x" + std::to_string(matrix_.cols()) +
                          " but the layout has dimension " + std::to_string(dim));
    }
    for (std::size_t s = 1; s < layout_.size(); ++s) {
      if (!compatible(layout_[s].hamiltonian.basis(), layout_.front().hamiltonian.basis())) {
        throw ArgumentError("subsystems use incompatible frequency bases");
      }
    }
    validate(tol);
  }

  static DensityOperator pure(const VectorXcd& psi, SystemLayout layout) {
    const double n = psi.norm();
    if (n == 0.0) throw ArgumentError("pure state from zero vector");
    const VectorXcd v = psi / n;
    return DensityOperator(v * v.adjoint(), std::move(layout));
  }

  static DensityOperator diagonal(const VectorXd& probs, SystemLayout layout) {
    return DensityOperator(MatrixXcd(probs.cast<Complex>().asDiagonal()), std::move(layout));
  }

  const MatrixXcd& matrix() const { return matrix_; }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const SystemLayout& layout() const { return layout_; }
  const BasisPtr& basis() const { return layout_.front().hamiltonian.basis(); }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& s : layout_) out.push_back(s.label);
    return out;
  }

  std::vector<EnergyVector> energies() const { return layout_energies(layout_); }
  VectorXd numeric_energies() const { return layout_numeric_energies(layout_); }

  /// Same matrix and Hamiltonians under new labels.
  DensityOperator relabeled(const std::vector<std::string>& labels) const {
    if (labels.size() != layout_.size()) throw ArgumentError("relabel: label count mismatch");
    SystemLayout layout = layout_;
    for (std::size_t k = 0; k < labels.size(); ++k) layout[k].label = labels[k];
    return DensityOperator(matrix_, std::move(layout));
  }

 private:
  void validate(const Tolerances& tol) const {
    const double herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
    if (!(herm <= tol.herm)) throw InvalidStateError("matrix is not Hermitian (deviation " + std::to_string(herm) + ")");
    const double tr_err = std::abs(matrix_.trace() - Complex(1.0, 0.0));
    if (!(tr_err <= tol.trace)) throw InvalidStateError("trace deviates from 1 by " + std::to_string(tr_err));
    const MatrixXcd h = 0.5 * (matrix_ + matrix_.adjoint());
    const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXcd>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (!(min_eig >= -tol.psd)) throw InvalidStateError("matrix has eigenvalue " + std::to_string(min_eig) + " < 0");
  }

  MatrixXcd matrix_;
  SystemLayout layout_;
};

/// Numerically hermitized spectrum of rho, ascending.
inline VectorXd spectrum(const MatrixXcd& rho) {
  const MatrixXcd h = 0.5 * (rho + rho.adjoint());
  return Eigen::SelfAdjointEigenSolver<MatrixXcd>(h, Eigen::EigenvaluesOnly).eigenvalues();
}

inline DensityOperator gibbs_state(const SystemLayout& layout, double beta) {
  if (!std::isfinite(beta) || beta <= 0.0) throw ArgumentError("beta must be finite and > 0");
  VectorXd e = layout_numeric_energies(layout);
  e.array() -= e.minCoeff();
  VectorXd w(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double x = beta * e(i);
    if (!std::isfinite(x)) throw NumericRangeError("beta*E is not finite; cannot form Boltzmann weights");
    w(i) = std::exp(-x);
  }
  const double z = w.sum();
  if (!std::isfinite(z) || z <= 0.0) throw NumericRangeError("partition function out of range");
  return DensityOperator::diagonal(w / z, layout);
}

inline DensityOperator gibbs_state(const HamiltonianSpec& h, double beta, const std::string& label = "S") {
  return gibbs_state(SystemLayout{{label, h}}, beta);
}

inline DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  require_dimension(a.dim() * b.dim(), "tensor");
  if (!compatible(a.basis(), b.basis())) throw ArgumentError("tensor: incompatible frequency bases");
  SystemLayout layout = a.layout();
  layout.insert(layout.end(), b.layout().begin(), b.layout().end());
  MatrixXcd m = Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval();
  return DensityOperator(std::move(m), std::move(layout));
}

/// n copies of rho labeled prefix1..prefixn (single-subsystem rho).
inline DensityOperator tensor_power(const DensityOperator& rho, int n, const std::string& prefix = "S") {
  if (n < 1) throw ArgumentError("tensor_power: n must be >= 1");
  if (rho.layout().size() != 1) throw ArgumentError("tensor_power expects a single-subsystem state");
  DensityOperator out = rho.relabeled({prefix + "1"});
  for (int k = 2; k <= n; ++k) out = tensor(out, rho.relabeled({prefix + std::to_string(k)}));
  return out;
}

namespace detail {

/// For each index of the full space, its (kept, traced) component indices.
struct SplitIndex {
  std::vector<Eigen::Index> kept;
  std::vector<Eigen::Index> traced;
  Eigen::Index kept_dim = 1;
  Eigen::Index traced_dim = 1;
};

inline SplitIndex split_index(const SystemLayout& layout, const std::vector<bool>& keep) {
  SplitIndex s;
  std::vector<Eigen::Index> dims;
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto d = static_cast<Eigen::Index>(layout[k].hamiltonian.dimension());
    dims.push_back(d);
    (keep[k] ? s.kept_dim : s.traced_dim) *= d;
  }
  const Eigen::Index total = s.kept_dim * s.traced_dim;
  s.kept.resize(static_cast<std::size_t>(total));
  s.traced.resize(static_cast<std::size_t>(total));
  for (Eigen::Index i = 0; i < total; ++i) {
    Eigen::Index rem = i;
    Eigen::Index kept = 0, traced = 0, kmul = 1, tmul = 1;
    for (std::size_t k = layout.size(); k-- > 0;) {
      const Eigen::Index digit = rem % dims[k];
      rem /= dims[k];
      if (keep[k]) {
        kept += digit * kmul;
        kmul *= dims[k];
      } else {
        traced += digit * tmul;
        tmul *= dims[k];
      }
    }
    s.kept[static_cast<std::size_t>(i)] = kept;
    s.traced[static_cast<std::size_t>(i)] = traced;
  }
  return s;
}

inline MatrixXcd partial_trace_matrix(const MatrixXcd& m, const SystemLayout& layout, const std::vector<bool>& keep) {
  const SplitIndex s = split_index(layout, keep);
  MatrixXcd out = MatrixXcd::Zero(s.kept_dim, s.kept_dim);
  const Eigen::Index total = m.rows();
  // Group full indices by their traced component.
  std::vector<std::vector<Eigen::Index>> by_traced(static_cast<std::size_t>(s.traced_dim));
  for (Eigen::Index i = 0; i < total; ++i) by_traced[static_cast<std::size_t>(s.traced[static_cast<std::size_t>(i)])].push_back(i);
  for (const auto& group : by_traced) {
    for (Eigen::Index i : group) {
      const Eigen::Index a = s.kept[static_cast<std::size_t>(i)];
      for (Eigen::Index j : group) out(a, s.kept[static_cast<std::size_t>(j)]) += m(i, j);
    }
  }
  return out;
}

}  // namespace detail

/// Reduced state on the subsystems named in keep (original order retained).
inline DensityOperator partial_trace(const DensityOperator& rho, const std::set<std::string>& keep) {
  if (keep.empty()) throw ArgumentError("partial_trace: keep set must be nonempty");
  std::vector<bool> mask(rho.layout().size(), false);
  std::size_t found = 0;
  SystemLayout kept_layout;
  for (std::size_t k = 0; k < rho.layout().size(); ++k) {
    if (keep.count(rho.layout()[k].label)) {
      mask[k] = true;
      ++found;
      kept_layout.push_back(rho.layout()[k]);
    }
  }
  if (found != keep.size()) {
    for (const auto& l : keep) {
      const auto labels = rho.labels();
      if (std::find(labels.begin(), labels.end(), l) == labels.end()) {
        throw ArgumentError("partial_trace: unknown subsystem label '" + l + "'");
      }
    }
  }
  if (found == rho.layout().size()) return rho;
  return DensityOperator(detail::partial_trace_matrix(rho.matrix(), rho.layout(), mask), std::move(kept_layout));
}

inline double entropy(const DensityOperator& rho) {
  const VectorXd ev = spectrum(rho.matrix());
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double l = ev(i);
    if (l > 0.0) s -= l * std::log(l);
  }
  return std::max(s, 0.0);
}

inline double purity(const DensityOperator& rho) { return (rho.matrix() * rho.matrix()).trace().real(); }

/// D(rho||sigma) in nats; +infinity when supp(rho) is not inside supp(sigma).
inline double relative_entropy(const DensityOperator& rho, const DensityOperator& sigma, const Tolerances& tol = {}) {
  if (rho.dim() != sigma.dim()) throw ArgumentError("relative_entropy: dimension mismatch");
  const MatrixXcd hr = 0.5 * (rho.matrix() + rho.matrix().adjoint());
  const MatrixXcd hs = 0.5 * (sigma.matrix() + sigma.matrix().adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(hs);
  const VectorXd s_ev = es.eigenvalues();
  const MatrixXcd& vecs = es.eigenvectors();
  double cross = 0.0;
  for (Eigen::Index k = 0; k < s_ev.size(); ++k) {
    const double weight = (vecs.col(k).adjoint() * hr * vecs.col(k))(0, 0).real();
    if (s_ev(k) <= tol.psd) {
      if (weight > tol.psd) return std::numeric_limits<double>::infinity();
      continue;
    }
    cross += weight * std::log(s_ev(k));
  }
  const double d = -entropy(rho) - cross;
  return std::max(d, 0.0);
}

/// Tr(rho H) for the Hamiltonian attached to rho.
inline double mean_energy(const DensityOperator& rho) {
  return (rho.matrix().diagonal().real().array() * rho.numeric_energies().array()).sum();
}

inline double free_energy(const DensityOperator& rho, double beta) {
  if (!std::isfinite(beta) || beta <= 0.0) throw ArgumentError("beta must be finite and > 0");
  return mean_energy(rho) - entropy(rho) / beta;
}

/// Free energy against an explicitly supplied single-system Hamiltonian.
inline double free_energy(const DensityOperator& rho, const HamiltonianSpec& h, double beta) {
  if (h.dimension() != rho.dim()) throw ArgumentError("free_energy: Hamiltonian dimension mismatch");
  if (!std::isfinite(beta) || beta <= 0.0) throw ArgumentError("beta must be finite and > 0");
  const double e = (rho.matrix().diagonal().real().array() * h.numeric_energies().array()).sum();
  return e - entropy(rho) / beta;
}

inline double trace_distance(const MatrixXcd& a, const MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("trace_distance: dimension mismatch");
  return 0.5 * spectrum(a - b).cwiseAbs().sum();
}

inline double trace_distance(const DensityOperator& a, const DensityOperator& b) {
  return trace_distance(a.matrix(), b.matrix());
}

/// S(A) + S(B) - S(AB) for a bipartition given by the labels in part_a.
inline double mutual_information(const DensityOperator& rho, const std::set<std::string>& part_a) {
  std::set<std::string> part_b;
  for (const auto& l : rho.labels()) {
    if (!part_a.count(l)) part_b.insert(l);
  }
  if (part_b.empty()) throw ArgumentError("mutual_information: complement of part A is empty");
  return entropy(partial_trace(rho, part_a)) + entropy(partial_trace(rho, part_b)) - entropy(rho);
}

}  // namespace thermoops
