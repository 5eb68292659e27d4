#pragma once

// Catalytic coherence on truncated half-infinite ladders. A unitary V on a
// system is lifted to an energy-conserving U on system (x) ladders by shifting
// each ladder to pay for the energy change of every matrix element of V. Input
// columns whose shifted indices fall off the truncated ladder are completed
// inside their total-energy eigenspace.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "thermoops/channels.hpp"
#include "thermoops/modes.hpp"
#include "thermoops/qstate.hpp"

namespace thermoops {

using SparseMatrixXcd = Eigen::SparseMatrix<Complex>;

/// Levels 0..truncation of a ladder with spacing `unit`.
struct Ladder {
  std::string label;
  EnergyVector unit;
  int truncation = 0;

  std::size_t levels() const { return static_cast<std::size_t>(truncation) + 1; }
};

inline SystemLayout ladder_layout(const std::vector<Ladder>& ladders) {
  SystemLayout out;
  for (const auto& l : ladders) out.push_back({l.label, HamiltonianSpec::ladder(l.unit, static_cast<int>(l.levels()))});
  return out;
}

inline VectorXcd resource_vector(int width, int offset, int truncation) {
  if (width < 1) throw ArgumentError("resource: width L must be >= 1");
  if (offset < 0) throw ArgumentError("resource: offset M must be >= 0");
  if (offset + width > truncation) {
    throw ArgumentError("resource: M + L = " + std::to_string(offset + width) + " exceeds truncation " +
                        std::to_string(truncation));
  }
  VectorXcd v = VectorXcd::Zero(truncation + 1);
  v.segment(offset, width).setConstant(Complex(1.0 / std::sqrt(static_cast<double>(width)), 0.0));
  return v;
}

/// Uniform superposition of levels M..M+L-1 on a single ladder.
inline DensityOperator make_resource(int width, int offset, const EnergyVector& mode, int truncation,
                                     const std::string& label = "Q") {
  const VectorXcd v = resource_vector(width, offset, truncation);
  return DensityOperator::pure(v, {{label, HamiltonianSpec::ladder(mode, truncation + 1)}});
}

class ShiftCompensatedUnitary {
 public:
  struct Term {
    Eigen::Index out = 0;
    Eigen::Index in = 0;
    Complex amplitude;
    std::vector<std::int64_t> shift;  // per ladder
  };

  const MatrixXcd& target() const { return target_; }
  const SystemLayout& system_layout() const { return system_; }
  const std::vector<Ladder>& ladders() const { return ladders_; }
  const std::vector<Term>& terms() const { return terms_; }
  const SparseMatrixXcd& op() const { return op_; }
  MatrixXcd dense() const { return MatrixXcd(op_); }

  SystemLayout joint_layout() const {
    SystemLayout l = system_;
    for (const auto& s : ladder_layout(ladders_)) l.push_back(s);
    return l;
  }
  Eigen::Index system_dim() const { return target_.rows(); }
  Eigen::Index ladder_dim() const { return ladder_dim_; }
  Eigen::Index dim() const { return system_dim() * ladder_dim_; }

  /// True when every shifted index of this input column stays on the ladders.
  bool column_defined(Eigen::Index joint_col) const { return defined_[static_cast<std::size_t>(joint_col)]; }
  std::size_t completed_columns() const { return completed_; }
  double unitarity_residual() const { return unitarity_residual_; }
  double energy_residual() const { return energy_residual_; }
  std::int64_t max_shift() const { return max_shift_; }

  friend ShiftCompensatedUnitary build_shift_unitary(const MatrixXcd& v, const SystemLayout& system,
                                                     const std::vector<Ladder>& ladders, double drop_tol);

 private:
  MatrixXcd target_;
  SystemLayout system_;
  std::vector<Ladder> ladders_;
  std::vector<Term> terms_;
  SparseMatrixXcd op_;
  std::vector<bool> defined_;
  Eigen::Index ladder_dim_ = 1;
  std::size_t completed_ = 0;
  double unitarity_residual_ = 0;
  double energy_residual_ = 0;
  std::int64_t max_shift_ = 0;
};

namespace detail {

inline std::vector<int> ladder_digits(Eigen::Index q, const std::vector<Ladder>& ladders) {
  std::vector<int> d(ladders.size());
  for (std::size_t l = ladders.size(); l-- > 0;) {
    const auto n = static_cast<Eigen::Index>(ladders[l].levels());
    d[l] = static_cast<int>(q % n);
    q /= n;
  }
  return d;
}

inline Eigen::Index ladder_index(const std::vector<int>& digits, const std::vector<Ladder>& ladders) {
  Eigen::Index q = 0;
  for (std::size_t l = 0; l < ladders.size(); ++l) q = q * static_cast<Eigen::Index>(ladders[l].levels()) + digits[l];
  return q;
}

}  // namespace detail

/// U = sum_{a,b} V_ab |a><b| (x) prod_l S_l^{m_ab,l} + W, with E_b - E_a = sum_l m_ab,l * unit_l and S_l the
/// raising operator of ladder l (negative powers lower). W is fixed blockwise by Gram-Schmidt in each
/// total-energy eigenspace, so U stays energy conserving.
inline ShiftCompensatedUnitary build_shift_unitary(const MatrixXcd& v, const SystemLayout& system,
                                                   const std::vector<Ladder>& ladders, double drop_tol = 1e-12) {
  const auto dx = static_cast<Eigen::Index>(layout_dimension(system));
  if (v.rows() != dx || v.cols() != dx) throw ArgumentError("build_shift_unitary: V does not match the system layout");
  const double vu = (v.adjoint() * v - MatrixXcd::Identity(dx, dx)).cwiseAbs().maxCoeff();
  if (vu > 1e-9) throw ArgumentError("build_shift_unitary: V is not unitary (residual " + std::to_string(vu) + ")");
  ShiftCompensatedUnitary u;
  u.target_ = v;
  u.system_ = system;
  u.ladders_ = ladders;
  IntegerBasis units;
  for (const auto& l : ladders) {
    if (l.truncation < 1) throw ArgumentError("build_shift_unitary: ladder truncation must be >= 1");
    units.elements.push_back(l.unit);
    u.ladder_dim_ *= static_cast<Eigen::Index>(l.levels());
  }
  if (!integer_independent(units.elements)) throw ArgumentError("build_shift_unitary: ladder units are not independent");
  require_dimension(static_cast<std::size_t>(dx * u.ladder_dim_), "build_shift_unitary");

  const auto ex = layout_energies(system);
  std::vector<std::vector<const ShiftCompensatedUnitary::Term*>> by_column(static_cast<std::size_t>(dx));
  for (Eigen::Index b = 0; b < dx; ++b) {
    for (Eigen::Index a = 0; a < dx; ++a) {
      if (std::abs(v(a, b)) <= drop_tol) continue;
      const auto m = in_resonant_span(ex[static_cast<std::size_t>(b)] - ex[static_cast<std::size_t>(a)], units);
      if (!m.member) {
        throw ConstructionError("build_shift_unitary: V(" + std::to_string(a) + "," + std::to_string(b) +
                                ") changes energy by " +
                                (ex[static_cast<std::size_t>(b)] - ex[static_cast<std::size_t>(a)]).to_string() +
                                ", not an integer combination of the ladder units");
      }
      for (auto s : m.coeffs) u.max_shift_ = std::max<std::int64_t>(u.max_shift_, std::llabs(s));
      u.terms_.push_back({a, b, v(a, b), m.coeffs});
    }
  }
  for (const auto& t : u.terms_) by_column[static_cast<std::size_t>(t.in)].push_back(&t);

  const Eigen::Index nq = u.ladder_dim_;
  const Eigen::Index n = dx * nq;
  u.defined_.assign(static_cast<std::size_t>(n), false);
  std::vector<Eigen::Triplet<Complex>> trip;
  // Joint energies, exact.
  std::map<EnergyVector, std::vector<Eigen::Index>> groups;
  std::vector<EnergyVector> joint_energy(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < nq; ++q) {
    const auto digits = detail::ladder_digits(q, ladders);
    EnergyVector eq = EnergyVector::zero(ex.front().basis());
    for (std::size_t l = 0; l < ladders.size(); ++l) eq += static_cast<std::int64_t>(digits[l]) * ladders[l].unit;
    for (Eigen::Index x = 0; x < dx; ++x) {
      const Eigen::Index j = x * nq + q;
      joint_energy[static_cast<std::size_t>(j)] = ex[static_cast<std::size_t>(x)] + eq;
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) groups[joint_energy[static_cast<std::size_t>(j)]].push_back(j);

  // Defined columns.
  std::vector<std::vector<std::pair<Eigen::Index, Complex>>> columns(static_cast<std::size_t>(n));
  for (Eigen::Index b = 0; b < dx; ++b) {
    for (Eigen::Index q = 0; q < nq; ++q) {
      const auto digits = detail::ladder_digits(q, ladders);
      std::vector<std::pair<Eigen::Index, Complex>> col;
      bool ok = true;
      for (const auto* t : by_column[static_cast<std::size_t>(b)]) {
        std::vector<int> shifted(digits);
        for (std::size_t l = 0; l < ladders.size() && ok; ++l) {
          const std::int64_t s = digits[l] + t->shift[l];
          ok = s >= 0 && s <= ladders[l].truncation;
          shifted[l] = static_cast<int>(s);
        }
        if (!ok) break;
        col.emplace_back(t->out * nq + detail::ladder_index(shifted, ladders), t->amplitude);
      }
      const Eigen::Index j = b * nq + q;
      if (ok) {
        u.defined_[static_cast<std::size_t>(j)] = true;
        columns[static_cast<std::size_t>(j)] = std::move(col);
      }
    }
  }

  // Completion inside each energy group.
  for (const auto& [energy, members] : groups) {
    std::vector<Eigen::Index> undefined;
    std::vector<Eigen::Index> defined;
    for (auto j : members) (u.defined_[static_cast<std::size_t>(j)] ? defined : undefined).push_back(j);
    if (undefined.empty()) continue;
    const auto g = static_cast<Eigen::Index>(members.size());
    std::map<Eigen::Index, Eigen::Index> local;
    for (Eigen::Index k = 0; k < g; ++k) local[members[static_cast<std::size_t>(k)]] = k;
    std::vector<VectorXcd> frame;
    for (auto j : defined) {
      VectorXcd c = VectorXcd::Zero(g);
      for (const auto& [row, amp] : columns[static_cast<std::size_t>(j)]) {
        const auto it = local.find(row);
        if (it == local.end()) throw ConstructionError("build_shift_unitary: defined column leaves its energy group");
        c(it->second) += amp;
      }
      frame.push_back(std::move(c));
    }
    const std::size_t n_defined = frame.size();
    std::vector<VectorXcd> candidates;
    for (auto j : undefined) candidates.push_back(VectorXcd::Unit(g, local[j]));
    for (Eigen::Index k = 0; k < g; ++k) candidates.push_back(VectorXcd::Unit(g, k));
    std::vector<VectorXcd> added;
    for (auto cand : candidates) {
      if (added.size() == undefined.size()) break;
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& f : frame) cand -= f * f.dot(cand);
      }
      const double nn = cand.norm();
      if (nn < 1e-8) continue;
      cand /= nn;
      frame.push_back(cand);
      added.push_back(cand);
    }
    if (added.size() != undefined.size()) {
      throw ConstructionError("build_shift_unitary: completion failed in energy group " + energy.to_string() + " (" +
                              std::to_string(n_defined) + " defined columns of " + std::to_string(g) + ")");
    }
    for (std::size_t k = 0; k < undefined.size(); ++k) {
      VectorXcd w = added[k];
      const Complex overlap = w(local[undefined[k]]);
      if (std::abs(overlap) > 1e-12) w *= std::conj(overlap) / std::abs(overlap);
      auto& col = columns[static_cast<std::size_t>(undefined[k])];
      for (Eigen::Index r = 0; r < g; ++r) {
        if (std::abs(w(r)) > 1e-15) col.emplace_back(members[static_cast<std::size_t>(r)], w(r));
      }
      ++u.completed_;
    }
  }

  for (Eigen::Index j = 0; j < n; ++j) {
    for (const auto& [row, amp] : columns[static_cast<std::size_t>(j)]) trip.emplace_back(row, j, amp);
  }
  u.op_.resize(n, n);
  u.op_.setFromTriplets(trip.begin(), trip.end());
  u.op_.makeCompressed();

  SparseMatrixXcd id(n, n);
  id.setIdentity();
  const SparseMatrixXcd gram = SparseMatrixXcd(u.op_.adjoint()) * u.op_ - id;
  double res = 0;
  for (Eigen::Index k = 0; k < gram.outerSize(); ++k) {
    for (SparseMatrixXcd::InnerIterator it(gram, k); it; ++it) res = std::max(res, std::abs(it.value()));
  }
  u.unitarity_residual_ = res;
  if (res > 1e-9) throw ConstructionError("build_shift_unitary: unitarity residual " + std::to_string(res));
  double er = 0;
  for (Eigen::Index k = 0; k < u.op_.outerSize(); ++k) {
    for (SparseMatrixXcd::InnerIterator it(u.op_, k); it; ++it) {
      const auto& e_in = joint_energy[static_cast<std::size_t>(it.col())];
      const auto& e_out = joint_energy[static_cast<std::size_t>(it.row())];
      if (!(e_in == e_out)) er = std::max(er, std::abs(it.value()) * std::abs(e_in.value() - e_out.value()));
    }
  }
  u.energy_residual_ = er;
  if (er > 1e-9) throw ConstructionError("build_shift_unitary: energy residual " + std::to_string(er));
  return u;
}

/// Hadamard on a qubit of gap `unit`, compensated by one ladder of the same spacing.
inline ShiftCompensatedUnitary hadamard_shift_unitary(const EnergyVector& unit, int truncation,
                                                      const std::string& system_label = "S") {
  MatrixXcd h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  const SystemLayout sys{{system_label, HamiltonianSpec::ladder(unit, 2)}};
  return build_shift_unitary(h, sys, {{"Q", unit, truncation}});
}

struct ResourceStepResult {
  DensityOperator system_out;
  DensityOperator resource_out;
  double error_to_target = 0;  // trace distance from V sys V^dagger
  double boundary_mass = 0;    // input weight on completed (undefined) columns
};

/// sys_out = Tr_Q[U (sys (x) res) U^dagger], res_out = Tr_S[...].
inline ResourceStepResult apply_with_resource(const ShiftCompensatedUnitary& u, const DensityOperator& sys,
                                              const DensityOperator& res) {
  if (static_cast<Eigen::Index>(sys.dim()) != u.system_dim() || static_cast<Eigen::Index>(res.dim()) != u.ladder_dim()) {
    throw ArgumentError("apply_with_resource: state dimensions do not match the unitary");
  }
  const MatrixXcd joint = kroneckerProduct(sys.matrix(), res.matrix()).eval();
  double boundary = 0;
  for (Eigen::Index j = 0; j < joint.rows(); ++j) {
    if (!u.column_defined(j)) boundary += joint(j, j).real();
  }
  const MatrixXcd left = u.op() * joint;
  const MatrixXcd out = (u.op() * left.adjoint()).adjoint();
  const SystemLayout layout = u.joint_layout();
  std::vector<bool> keep_sys(layout.size(), false);
  std::vector<bool> keep_res(layout.size(), true);
  for (std::size_t k = 0; k < u.system_layout().size(); ++k) {
    keep_sys[k] = true;
    keep_res[k] = false;
  }
  MatrixXcd ms = detail::partial_trace_matrix(out, layout, keep_sys);
  MatrixXcd mr = detail::partial_trace_matrix(out, layout, keep_res);
  ms = 0.5 * (ms + ms.adjoint());
  mr = 0.5 * (mr + mr.adjoint());
  const MatrixXcd ideal = u.target() * sys.matrix() * u.target().adjoint();
  ResourceStepResult r{DensityOperator(ms, sys.layout()), DensityOperator(mr, res.layout()), 0.0, boundary};
  r.error_to_target = trace_distance(ms, ideal);
  return r;
}

struct ReuseResult {
  std::vector<ResourceStepResult> steps;
  DensityOperator final_resource;
};

/// Applies U to each system in turn, threading the resource through.
inline ReuseResult reuse_sequence(const ShiftCompensatedUnitary& u, const std::vector<DensityOperator>& systems,
                                  const DensityOperator& res) {
  if (systems.empty()) throw ArgumentError("reuse_sequence: need at least one system");
  ReuseResult out{{}, res};
  for (const auto& s : systems) {
    auto step = apply_with_resource(u, s, out.final_resource);
    out.final_resource = step.resource_out;
    out.steps.push_back(std::move(step));
  }
  return out;
}

/// S^c rho S^{c dagger} on a single truncated ladder; weight pushed past either end is dropped.
inline MatrixXcd shift_ladder(const MatrixXcd& rho, std::int64_t c) {
  const Eigen::Index n = rho.rows();
  MatrixXcd out = MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index si = i + c;
    if (si < 0 || si >= n) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index sj = j + c;
      if (sj < 0 || sj >= n) continue;
      out(si, sj) = rho(i, j);
    }
  }
  return out;
}

}  // namespace thermoops
