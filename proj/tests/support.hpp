#pragma once

// Shared fixtures and hand-rolled generators for the unit suites.

#include <cmath>
#include <vector>

#include "thermoops/channels.hpp"
#include "thermoops/classical.hpp"
#include "thermoops/random.hpp"

namespace testing_support {

using namespace thermoops;

inline BasisPtr omega() {
  static const BasisPtr b = make_basis({"w"}, {1.0});
  return b;
}

inline BasisPtr omega_root2() {
  static const BasisPtr b = make_basis({"w", "v"}, {1.0, std::sqrt(2.0)});
  return b;
}

inline EnergyVector e(std::int64_t n, std::int64_t d = 1) { return EnergyVector(omega(), {Rational(n, d)}); }

inline EnergyVector e2(Rational a, Rational b) { return EnergyVector(omega_root2(), {a, b}); }

/// Single subsystem with levels given as integer multiples of w.
inline SystemLayout levels_layout(const std::vector<int>& multiples, const std::string& label = "S") {
  std::vector<HamiltonianSpec::Level> lv;
  for (std::size_t k = 0; k < multiples.size();) {
    std::size_t j = k;
    while (j < multiples.size() && multiples[j] == multiples[k]) ++j;
    lv.push_back({e(multiples[k]), static_cast<int>(j - k)});
    k = j;
  }
  return {{label, HamiltonianSpec(omega(), lv)}};
}

inline SystemLayout qubit(const std::string& label = "S") { return levels_layout({0, 1}, label); }
inline SystemLayout qutrit(const std::string& label = "S") { return levels_layout({0, 1, 2}, label); }

/// Random sorted integer spectrum in {0..max_level}, dimension d; repeated values give degeneracies.
inline SystemLayout random_layout(Rng& rng, int d, int max_level = 3, const std::string& label = "S") {
  std::uniform_int_distribution<int> pick(0, max_level);
  std::vector<int> m(static_cast<std::size_t>(d));
  for (auto& x : m) x = pick(rng);
  m.front() = 0;
  std::sort(m.begin(), m.end());
  return levels_layout(m, label);
}

inline VectorXd random_probability(Rng& rng, Eigen::Index d, double zero_chance = 0.0) {
  std::exponential_distribution<double> ex(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd p(d);
  for (Eigen::Index i = 0; i < d; ++i) p(i) = u(rng) < zero_chance ? 0.0 : ex(rng);
  if (p.sum() <= 0.0) p(0) = 1.0;
  return p / p.sum();
}

inline double random_beta(Rng& rng) { return std::uniform_real_distribution<double>(0.2, 2.0)(rng); }

/// Random thermal operation: Haar blocks on the total-energy eigenspaces of system + random environment.
inline ThermalOperationSpec random_thermal_operation(Rng& rng, const SystemLayout& sys, int env_dim, double beta) {
  const SystemLayout env = random_layout(rng, env_dim, 3, "E");
  SystemLayout joint = sys;
  joint.push_back(env.front());
  const MatrixXcd v = random_energy_conserving_unitary(layout_energies(joint), rng);
  return ThermalOperationSpec(sys, env.front(), beta, v);
}

inline MatrixXcd plus_state() {
  MatrixXcd m(2, 2);
  m << 0.5, 0.5, 0.5, 0.5;
  return m;
}

}  // namespace testing_support
