#pragma once

// Energy-diagonal state conversion: thermomajorization curves, Gibbs-stochastic
// maps found by LP, and the design of a classical intermediate whose levels sit
// just above the eigenvectors of a coherent target.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "thermoops/channels.hpp"
#include "thermoops/lp.hpp"
#include "thermoops/modes.hpp"
#include "thermoops/qstate.hpp"

namespace thermoops {

struct ClassicalState {
  VectorXd probs;
  std::vector<EnergyVector> energies;

  ClassicalState() = default;
  ClassicalState(VectorXd p, std::vector<EnergyVector> e) : probs(std::move(p)), energies(std::move(e)) {
    if (static_cast<std::size_t>(probs.size()) != energies.size()) {
      throw ArgumentError("ClassicalState: probability and energy lists differ in length");
    }
    if (probs.size() == 0) throw ArgumentError("ClassicalState: empty");
    if (probs.minCoeff() < -1e-12) throw InvalidStateError("ClassicalState: negative probability");
    if (std::abs(probs.sum() - 1.0) > 1e-12) throw InvalidStateError("ClassicalState: probabilities do not sum to 1");
  }

  std::size_t size() const { return energies.size(); }

  VectorXd numeric_energies() const {
    VectorXd e(probs.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = energies[static_cast<std::size_t>(i)].value();
    return e;
  }
};

/// Diagonal of rho with the layout's per-index energies.
inline ClassicalState diagonal_part(const DensityOperator& rho) {
  VectorXd p = rho.matrix().diagonal().real().cwiseMax(0.0);
  p /= p.sum();
  return ClassicalState(std::move(p), rho.energies());
}

inline VectorXd gibbs_weights(const VectorXd& energies, double beta) {
  if (!std::isfinite(beta) || beta <= 0.0) throw ArgumentError("beta must be finite and > 0");
  VectorXd w = (-(beta * (energies.array() - energies.minCoeff()))).exp().matrix();
  const double z = w.sum();
  if (!std::isfinite(z) || z <= 0.0) throw NumericRangeError("partition function out of range");
  return w / z;
}

inline VectorXd gibbs_weights(const ClassicalState& p, double beta) { return gibbs_weights(p.numeric_energies(), beta); }

/// D(p || g) in nats; +inf when p has weight where g has none.
inline double classical_relative_entropy(const VectorXd& p, const VectorXd& g) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (g(i) <= 0.0) return std::numeric_limits<double>::infinity();
    d += p(i) * std::log(p(i) / g(i));
  }
  return d;
}

/// Sum p E - H(p)/beta, with energies measured from the lowest listed level.
inline double classical_free_energy(const ClassicalState& p, double beta) {
  const VectorXd e = p.numeric_energies();
  double f = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    f += p.probs(i) * e(i);
    if (p.probs(i) > 0.0) f += p.probs(i) * std::log(p.probs(i)) / beta;
  }
  return f;
}

struct CurvePoint {
  double x = 0;  // cumulative Gibbs weight
  double y = 0;  // cumulative probability
};

/// Vertices of the thermomajorization curve of p relative to g (beta-ordered by p_i / g_i descending).
inline std::vector<CurvePoint> thermo_curve(const VectorXd& p, const VectorXd& g) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    // p_a/g_a > p_b/g_b without division
    return p(a) * g(b) > p(b) * g(a);
  });
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  for (auto i : order) pts.push_back({pts.back().x + g(i), pts.back().y + p(i)});
  return pts;
}

inline double evaluate_curve(const std::vector<CurvePoint>& pts, double x) {
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (x <= pts[k].x || k + 1 == pts.size()) {
      const double dx = pts[k].x - pts[k - 1].x;
      if (dx <= 0.0) return pts[k].y;
      const double t = std::clamp((x - pts[k - 1].x) / dx, 0.0, 1.0);
      return pts[k - 1].y + t * (pts[k].y - pts[k - 1].y);
    }
  }
  return pts.back().y;
}

struct MajorizationResult {
  bool holds = false;
  double worst_gap = 0;          // min over q's vertices of curve_p - curve_q
  CurvePoint violation{};        // q's vertex attaining worst_gap
};

/// The curve of p is concave, so comparing at the vertices of q's curve decides the order.
inline MajorizationResult thermomajorization(const ClassicalState& p, const ClassicalState& q, double beta,
                                             double tol = 1e-9) {
  if (p.size() != q.size()) throw ArgumentError("thermomajorization: states have different dimensions");
  const VectorXd ep = p.numeric_energies();
  const VectorXd eq = q.numeric_energies();
  if ((ep - eq).cwiseAbs().maxCoeff() > 1e-12) throw ArgumentError("thermomajorization: energy lists differ");
  const VectorXd g = gibbs_weights(ep, beta);
  const auto cp = thermo_curve(p.probs, g);
  const auto cq = thermo_curve(q.probs, g);
  MajorizationResult r;
  r.worst_gap = std::numeric_limits<double>::infinity();
  for (const auto& v : cq) {
    const double gap = evaluate_curve(cp, v.x) - v.y;
    if (gap < r.worst_gap) {
      r.worst_gap = gap;
      r.violation = v;
    }
  }
  r.holds = r.worst_gap >= -tol;
  return r;
}

inline bool thermomajorizes(const ClassicalState& p, const ClassicalState& q, double beta) {
  return thermomajorization(p, q, beta).holds;
}

struct GibbsStochasticResult {
  bool feasible = false;
  MatrixXd map;            // column-stochastic, when feasible
  double residual = 0;     // max of |T g - g|, |T p - q|, |column sums - 1|
  double phase_one_value = 0;
  MajorizationResult curve;  // diagnostic for infeasible instances
};

/// Searches a column-stochastic T >= 0 with T g = g and T p = q. Variable T(i,j) sits at index i*d + j.
inline GibbsStochasticResult solve_gibbs_stochastic(const ClassicalState& p, const ClassicalState& q, double beta) {
  if (p.size() != q.size()) throw ArgumentError("gibbs_stochastic_feasible: states have different dimensions");
  const VectorXd ep = p.numeric_energies();
  if ((ep - q.numeric_energies()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ArgumentError("gibbs_stochastic_feasible: energy lists differ");
  }
  const auto d = static_cast<Eigen::Index>(p.size());
  const VectorXd g = gibbs_weights(ep, beta);
  MatrixXd a = MatrixXd::Zero(3 * d, d * d);
  VectorXd b(3 * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      a(j, i * d + j) = 1.0;             // column sums
      a(d + i, i * d + j) = g(j);        // T g = g
      a(2 * d + i, i * d + j) = p.probs(j);  // T p = q
    }
  }
  b << VectorXd::Ones(d), g, q.probs;
  const LpResult lp = find_feasible_point(a, b);
  GibbsStochasticResult r;
  r.phase_one_value = lp.phase_one_value;
  r.curve = thermomajorization(p, q, beta);
  if (!lp.feasible) return r;
  r.map = MatrixXd(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) r.map(i, j) = lp.x(i * d + j);
  }
  r.residual = std::max({(r.map * g - g).cwiseAbs().maxCoeff(), (r.map * p.probs - q.probs).cwiseAbs().maxCoeff(),
                         (r.map.colwise().sum().transpose() - VectorXd::Ones(d)).cwiseAbs().maxCoeff()});
  r.feasible = r.residual <= 1e-8;
  return r;
}

inline std::optional<MatrixXd> gibbs_stochastic_feasible(const ClassicalState& p, const ClassicalState& q, double beta) {
  auto r = solve_gibbs_stochastic(p, q, beta);
  if (!r.feasible) return std::nullopt;
  return std::move(r.map);
}

inline ClassicalState apply_classical_map(const MatrixXd& t, const ClassicalState& p) {
  if (t.rows() != t.cols() || t.cols() != p.probs.size()) throw ArgumentError("apply_classical_map: shape mismatch");
  VectorXd q = (t * p.probs).cwiseMax(0.0);
  q /= q.sum();
  return ClassicalState(std::move(q), p.energies);
}

// ---------------------------------------------------------------------------
// Classical target

struct ClassicalTargetPlan {
  int mu = 1;
  SystemLayout block_layout;               // layout of the mu copies
  std::vector<EnergyVector> block_energies;
  IntegerBasis modes;                      // ladder units
  std::vector<double> eigenvalues;         // lambda_j
  MatrixXcd eigenvectors;                  // column j holds f_{j, c'} in the energy basis
  std::vector<EnergyVector> target_energies;  // E_{c[j]}
  // shifts[j][c'] holds integer coefficients over `modes`; empty when f_{j,c'} is outside the support.
  std::vector<std::vector<std::vector<std::int64_t>>> shifts;
  std::vector<std::vector<double>> window;  // sum_{c'} m_{j c', l} |f_{j c'}|^2, each in (0, 1]
  double energy_excess = 0;                 // sum_j lambda_j sum_l window[j][l] * unit_l

  std::size_t size() const { return eigenvalues.size(); }
};

struct ClassicalTargetOptions {
  double support_threshold = 1e-12;  // |f| below this is treated as zero
  double cluster_tol = 1e-9;         // eigenvalues closer than this are rotated together
  int search_radius = 8;
};

namespace detail {

/// Eigenvectors of rho, rotated inside each near-degenerate eigenvalue cluster so
/// that they diagonalize H there; this makes them as energy-definite as possible.
inline std::pair<VectorXd, MatrixXcd> energy_aligned_eigensystem(const MatrixXcd& rho, const VectorXd& energies,
                                                                 double cluster_tol) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (rho + rho.adjoint()));
  VectorXd vals = es.eigenvalues();
  MatrixXcd vecs = es.eigenvectors();
  const Eigen::Index n = vals.size();
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && vals(end) - vals(end - 1) <= cluster_tol) ++end;
    if (end - start > 1) {
      const MatrixXcd block = vecs.middleCols(start, end - start);
      const MatrixXcd h = block.adjoint() * energies.cast<Complex>().asDiagonal() * block;
      Eigen::SelfAdjointEigenSolver<MatrixXcd> hs(0.5 * (h + h.adjoint()));
      vecs.middleCols(start, end - start) = block * hs.eigenvectors();
    }
    start = end;
  }
  // Fix the global phase of each column: largest entry real and positive.
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index k = 0;
    vecs.col(j).cwiseAbs().maxCoeff(&k);
    const Complex ph = vecs(k, j) / std::abs(vecs(k, j));
    vecs.col(j) *= std::conj(ph);
  }
  // Largest eigenvalue first.
  return {vals.reverse(), vecs.rowwise().reverse()};
}

/// Integer tuples ordered by l1 norm, ties lexicographic (negative before positive).
inline std::vector<std::vector<std::int64_t>> l1_ordered_tuples(std::size_t dim, int radius) {
  std::vector<std::vector<std::int64_t>> out;
  if (dim == 0) {
    out.emplace_back();
    return out;
  }
  for (int r = 0; r <= radius; ++r) {
    std::vector<std::vector<std::int64_t>> shell;
    std::vector<std::int64_t> cur(dim, 0);
    auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
      if (pos + 1 == dim) {
        for (int s : {-remaining, remaining}) {
          cur[pos] = s;
          shell.push_back(cur);
          if (remaining == 0) break;
        }
        return;
      }
      for (int v = -remaining; v <= remaining; ++v) {
        cur[pos] = v;
        self(self, pos + 1, remaining - std::abs(v));
      }
    };
    rec(rec, 0, r);
    std::sort(shell.begin(), shell.end());
    out.insert(out.end(), shell.begin(), shell.end());
  }
  return out;
}

}  // namespace detail

/// Eigendecomposes rho'^{(x) mu} and places each eigenvector psi_j on a classical level E_{c[j]} such that
/// E_{c[j]} - E_{c'} is an integer combination m_{j c'} of `modes` for every c' in the support of psi_j, and
/// 0 < sum_{c'} m_{j c', l} |f_{j c'}|^2 <= 1 for every l.
inline ClassicalTargetPlan build_classical_target(const DensityOperator& rho_prime, int mu, const IntegerBasis& modes,
                                                  const ClassicalTargetOptions& opt = {}) {
  if (mu < 1) throw ArgumentError("build_classical_target: mu must be >= 1");
  const DensityOperator block = tensor_power(rho_prime, mu);
  ClassicalTargetPlan plan;
  plan.mu = mu;
  plan.block_layout = block.layout();
  plan.block_energies = block.energies();
  plan.modes = modes;
  const VectorXd numeric = block.numeric_energies();
  auto [vals, vecs] = detail::energy_aligned_eigensystem(block.matrix(), numeric, opt.cluster_tol);
  const auto d = static_cast<Eigen::Index>(plan.block_energies.size());
  const std::size_t nm = modes.size();
  const auto tuples = detail::l1_ordered_tuples(nm, opt.search_radius);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index c = 0; c < d; ++c) {
      if (std::abs(vecs(c, j)) > opt.support_threshold) support.push_back(c);
    }
    const EnergyVector& ref = plan.block_energies[static_cast<std::size_t>(support.front())];
    // Offsets b_{c'} with E_ref - E_{c'} = b_{c'} . modes.
    std::vector<std::vector<std::int64_t>> offset(static_cast<std::size_t>(d));
    for (auto c : support) {
      const auto m = in_resonant_span(ref - plan.block_energies[static_cast<std::size_t>(c)], modes);
      if (!m.member) {
        throw ConstructionError("build_classical_target: eigenvector " + std::to_string(j) +
                                " mixes energies whose difference is not an integer combination of the modes");
      }
      offset[static_cast<std::size_t>(c)] = m.coeffs;
    }
    std::vector<double> base(nm, 0.0);
    for (auto c : support) {
      const double w = std::norm(vecs(c, j));
      for (std::size_t l = 0; l < nm; ++l) base[l] += w * static_cast<double>(offset[static_cast<std::size_t>(c)][l]);
    }
    const std::vector<std::int64_t>* chosen = nullptr;
    std::vector<double> win(nm);
    for (const auto& a : tuples) {
      bool ok = true;
      for (std::size_t l = 0; l < nm && ok; ++l) {
        win[l] = static_cast<double>(a[l]) + base[l];
        ok = win[l] > 1e-12 && win[l] <= 1.0 + 1e-12;
      }
      if (ok) {
        chosen = &a;
        break;
      }
    }
    if (!chosen) {
      std::string side = "lower";
      for (std::size_t l = 0; l < nm; ++l) {
        if (std::floor(1.0 - base[l]) > opt.search_radius) side = "upper";
      }
      throw ConstructionError("build_classical_target: no integer shift within radius " +
                              std::to_string(opt.search_radius) + " satisfies the " + side +
                              " side of the energy window for eigenvector " + std::to_string(j));
    }
    EnergyVector target = ref;
    for (std::size_t l = 0; l < nm; ++l) target += (*chosen)[l] * modes.elements[l];
    std::vector<std::vector<std::int64_t>> sh(static_cast<std::size_t>(d));
    for (auto c : support) {
      auto& s = sh[static_cast<std::size_t>(c)];
      s.resize(nm);
      for (std::size_t l = 0; l < nm; ++l) s[l] = (*chosen)[l] + offset[static_cast<std::size_t>(c)][l];
    }
    plan.eigenvalues.push_back(std::max(0.0, vals(j)));
    plan.target_energies.push_back(target);
    plan.shifts.push_back(std::move(sh));
    plan.window.push_back(win);
    for (std::size_t l = 0; l < nm; ++l) plan.energy_excess += plan.eigenvalues.back() * win[l] * modes.elements[l].value();
  }
  // Renormalize clipped eigenvalues.
  const double s = std::accumulate(plan.eigenvalues.begin(), plan.eigenvalues.end(), 0.0);
  for (auto& v : plan.eigenvalues) v /= s;
  plan.eigenvectors = std::move(vecs);
  return plan;
}

inline ClassicalState plan_state(const ClassicalTargetPlan& plan) {
  return ClassicalState(Eigen::Map<const VectorXd>(plan.eigenvalues.data(), static_cast<Eigen::Index>(plan.size())),
                        plan.target_energies);
}

}  // namespace thermoops
