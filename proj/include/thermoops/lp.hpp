#pragma once

// Feasibility of { x >= 0 : A x = b } by a dense phase-one simplex with
// artificial variables and Bland's anticycling rule.

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace thermoops {

struct LpResult {
  bool feasible = false;
  Eigen::VectorXd x;           // valid when feasible
  double phase_one_value = 0;  // sum of artificials at the optimum
  double residual = 0;         // max |A x - b| of the returned point
  int iterations = 0;
};

inline LpResult find_feasible_point(const Eigen::MatrixXd& a_in, const Eigen::VectorXd& b_in,
                                    double feasibility_tol = 1e-9, int max_iterations = 100000) {
  const Eigen::Index m = a_in.rows();
  const Eigen::Index n = a_in.cols();
  Eigen::MatrixXd a = a_in;
  Eigen::VectorXd b = b_in;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (b(i) < 0) {
      a.row(i) *= -1.0;
      b(i) = -b(i);
    }
  }
  // Tableau columns: n structural, m artificial, then rhs. Last row holds reduced costs.
  const Eigen::Index cols = n + m;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, cols + 1);
  t.topLeftCorner(m, n) = a;
  t.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
  t.col(cols).head(m) = b;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;
  // Objective: minimize sum of artificials; reduced cost row = -(sum of constraint rows) on structurals.
  for (Eigen::Index i = 0; i < m; ++i) {
    t.row(m).head(n) -= t.row(i).head(n);
    t(m, cols) -= t(i, cols);
  }

  constexpr double kPivotTol = 1e-11;
  LpResult res;
  for (; res.iterations < max_iterations; ++res.iterations) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (t(m, j) < -kPivotTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (t(i, enter) > kPivotTol) {
        const double ratio = t(i, cols) / t(i, enter);
        if (leave < 0 || ratio < best - 1e-14 ||
            (std::abs(ratio - best) <= 1e-14 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          leave = i;
          best = ratio;
        }
      }
    }
    if (leave < 0) break;  // unbounded direction cannot occur in phase one; stop defensively
    t.row(leave) /= t(leave, enter);
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }

  res.phase_one_value = -t(m, cols);
  res.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index j = basis[static_cast<std::size_t>(i)];
    if (j < n) res.x(j) = std::max(0.0, t(i, cols));
  }
  res.residual = m > 0 ? (a_in * res.x - b_in).cwiseAbs().maxCoeff() : 0.0;
  res.feasible = res.phase_one_value <= feasibility_tol;
  return res;
}

}  // namespace thermoops
