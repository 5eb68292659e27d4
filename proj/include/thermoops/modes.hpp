#pragma once

// Coherent-mode algebra: the energy differences carried by off-diagonal
// coherence, integer spans of such sets, and a reduction to an
// integer-linearly independent generating set.

#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "thermoops/energy.hpp"
#include "thermoops/qstate.hpp"

namespace thermoops {

inline constexpr double kDefaultModeThreshold = 1e-10;

struct ModeSet {
  std::set<EnergyVector> modes;
  std::size_t source_dim = 0;

  bool contains(const EnergyVector& e) const { return modes.count(e) > 0; }

  /// True when the only mode is zero (or there are none).
  bool incoherent() const {
    return std::all_of(modes.begin(), modes.end(), [](const EnergyVector& e) { return e.is_zero(); });
  }

  std::vector<EnergyVector> as_vector() const { return {modes.begin(), modes.end()}; }
};

/// Integer-linearly independent set of energies.
struct IntegerBasis {
  std::vector<EnergyVector> elements;

  std::size_t size() const { return elements.size(); }
  bool empty() const { return elements.empty(); }
};

inline ModeSet coherent_modes(const DensityOperator& rho, double mag_threshold = kDefaultModeThreshold) {
  const auto energies = rho.energies();
  ModeSet out;
  out.source_dim = rho.dim();
  const MatrixXcd& m = rho.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) > mag_threshold) {
        out.modes.insert(energies[static_cast<std::size_t>(i)] - energies[static_cast<std::size_t>(j)]);
      }
    }
  }
  return out;
}

struct SpanMembership {
  bool member = false;
  std::vector<std::int64_t> coeffs;  // valid when member
};

namespace detail {

inline std::vector<std::vector<Rational>> coefficient_columns(const std::vector<EnergyVector>& v) {
  std::vector<std::vector<Rational>> cols;
  cols.reserve(v.size());
  for (const auto& e : v) cols.push_back(e.coeffs());
  return cols;
}

inline std::optional<std::vector<std::int64_t>> integer_coordinates(const EnergyVector& x,
                                                                    const std::vector<EnergyVector>& basis) {
  if (basis.empty()) {
    if (x.is_zero()) return std::vector<std::int64_t>{};
    return std::nullopt;
  }
  const auto sol = solve_rational(coefficient_columns(basis), x.coeffs());
  if (!sol) return std::nullopt;
  std::vector<std::int64_t> out;
  out.reserve(sol->size());
  for (const auto& r : *sol) {
    if (r.denominator() != 1) return std::nullopt;
    out.push_back(r.numerator());
  }
  return out;
}

}  // namespace detail

/// Decides x in I(basis) and returns the (unique) integer coordinates.
inline SpanMembership in_resonant_span(const EnergyVector& x, const IntegerBasis& basis) {
  for (const auto& b : basis.elements) {
    if (!compatible(b.basis(), x.basis())) throw ArgumentError("in_resonant_span: incompatible frequency bases");
  }
  auto coords = detail::integer_coordinates(x, basis.elements);
  if (!coords) return {};
  return {true, std::move(*coords)};
}

inline bool integer_independent(const std::vector<EnergyVector>& v) {
  if (v.empty()) return true;
  return detail::rational_rank(detail::coefficient_columns(v)) == v.size();
}

/// Sequential insert-or-reduce construction of an integer-linearly independent
/// set S with I(S) = I(T). Inputs are processed in the given order. When a new
/// element creates an integer relation, a Euclidean reduction on the relation
/// coefficients is run until one coefficient has magnitude one; that element is
/// then an integer combination of the rest and is dropped. Elements of the
/// result are returned with positive numeric value.
inline IntegerBasis independent_basis(const std::vector<EnergyVector>& inputs) {
  std::vector<EnergyVector> s;
  for (const auto& y : inputs) {
    if (detail::integer_coordinates(y, s)) continue;  // already in I(S); covers y == 0
    std::vector<EnergyVector> extended = s;
    extended.push_back(y);
    if (integer_independent(extended)) {
      s = std::move(extended);
      continue;
    }
    // S is independent and S u {y} is not: y = sum r_i x_i has a unique rational solution.
    const auto r = detail::solve_rational(detail::coefficient_columns(s), y.coeffs());
    if (!r) throw ConstructionError("independent_basis: inconsistent rational relation");
    std::int64_t den = 1;
    for (const auto& ri : *r) den = std::lcm(den, ri.denominator());
    std::vector<std::int64_t> a;
    for (const auto& ri : *r) a.push_back(ri.numerator() * (den / ri.denominator()));
    a.push_back(-den);
    std::int64_t g = 0;
    for (auto ai : a) g = std::gcd(g, ai);
    for (auto& ai : a) ai /= g;

    auto has_unit = [&]() {
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::llabs(a[k]) == 1) return static_cast<std::ptrdiff_t>(k);
      }
      return std::ptrdiff_t{-1};
    };
    std::ptrdiff_t unit = has_unit();
    while (unit < 0) {
      // Smallest nonzero |a_i| drives one Euclidean step against every other coefficient.
      std::size_t i = a.size();
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] != 0 && (i == a.size() || std::llabs(a[k]) < std::llabs(a[i]))) i = k;
      }
      for (std::size_t j = 0; j < a.size(); ++j) {
        if (j == i || a[j] == 0) continue;
        const std::int64_t p = a[j] / a[i];
        const std::int64_t q = a[j] % a[i];
        extended[i] += p * extended[j];
        a[j] = q;
      }
      unit = has_unit();
    }
    extended.erase(extended.begin() + unit);
    s = std::move(extended);
  }
  for (auto& e : s) {
    if (e.value() < 0.0) e = -e;
  }
  return IntegerBasis{std::move(s)};
}

inline IntegerBasis independent_basis(const ModeSet& modes) { return independent_basis(modes.as_vector()); }

/// C(rho') subset of C(rho): every coherent mode of rho' is an integer
/// combination of the coherent modes of rho.
inline bool condition_holds(const DensityOperator& rho, const DensityOperator& rho_prime,
                            double mag_threshold = kDefaultModeThreshold) {
  if (!compatible(rho.basis(), rho_prime.basis())) throw ArgumentError("condition_holds: incompatible frequency bases");
  const IntegerBasis basis = independent_basis(coherent_modes(rho, mag_threshold));
  for (const auto& m : coherent_modes(rho_prime, mag_threshold).modes) {
    if (!in_resonant_span(m, basis).member) return false;
  }
  return true;
}

}  // namespace thermoops
