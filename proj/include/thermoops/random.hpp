#pragma once

// Seeded random matrices: Haar unitaries and random density matrices.
// Generator: std::mt19937_64; normal deviates from std::normal_distribution.

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "thermoops/qstate.hpp"

namespace thermoops {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds from (master, index).
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline MatrixXcd ginibre(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXcd g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = Complex(n(rng), n(rng));
  }
  return g;
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phase fix of R's diagonal.
inline MatrixXcd haar_unitary(Eigen::Index n, Rng& rng) {
  const MatrixXcd g = ginibre(n, n, rng);
  Eigen::HouseholderQR<MatrixXcd> qr(g);
  MatrixXcd q = qr.householderQ();
  const MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex d = r(k, k);
    const double a = std::abs(d);
    if (a > 0.0) q.col(k) *= d / a;
  }
  return q;
}

inline VectorXcd random_pure_vector(Eigen::Index n, Rng& rng) {
  VectorXcd v = ginibre(n, 1, rng);
  return v / v.norm();
}

/// Random density matrix G G^dagger / Tr with G of shape n x rank (Hilbert-Schmidt when rank = n).
inline MatrixXcd random_density_matrix(Eigen::Index n, Rng& rng, Eigen::Index rank = -1) {
  if (rank <= 0) rank = n;
  const MatrixXcd g = ginibre(n, rank, rng);
  MatrixXcd rho = g * g.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

inline DensityOperator random_state(const SystemLayout& layout, Rng& rng, Eigen::Index rank = -1) {
  return DensityOperator(random_density_matrix(static_cast<Eigen::Index>(layout_dimension(layout)), rng, rank), layout);
}

}  // namespace thermoops
