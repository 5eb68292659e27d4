#pragma once

// Exact energies: rational coefficient vectors over a declared basis of real
// frequencies. The basis values are trusted to be linearly independent over the
// rationals, so equality and integer-linear (in)dependence of energies reduce to
// exact rational arithmetic on the coefficient vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "thermoops/config.hpp"

namespace thermoops {

using Rational = boost::rational<std::int64_t>;

inline Rational parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const long long num = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return Rational(num);
    }
    const std::string ns = text.substr(0, slash);
    const std::string ds = text.substr(slash + 1);
    const long long num = std::stoll(ns, &used);
    if (used != ns.size()) throw std::invalid_argument(text);
    const long long den = std::stoll(ds, &used);
    if (used != ds.size() || den == 0) throw std::invalid_argument(text);
    return Rational(num, den);
  } catch (const std::logic_error&) {
    throw ArgumentError("malformed rational '" + text + "' (expected \"p/q\" or \"p\")");
  }
}

inline std::string format_rational(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

struct FrequencyBasis {
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }

  bool operator==(const FrequencyBasis&) const = default;
};

using BasisPtr = std::shared_ptr<const FrequencyBasis>;

inline BasisPtr make_basis(std::vector<std::string> names, std::vector<double> values) {
  if (values.empty()) throw ArgumentError("frequency basis must be nonempty");
  if (names.size() != values.size()) throw ArgumentError("frequency basis: names/values size mismatch");
  for (double v : values) {
    if (!std::isfinite(v) || v <= 0.0) throw ArgumentError("frequency basis values must be finite and positive");
  }
  return std::make_shared<const FrequencyBasis>(FrequencyBasis{std::move(names), std::move(values)});
}

inline bool compatible(const BasisPtr& a, const BasisPtr& b) {
  return a == b || (a && b && *a == *b);
}

class EnergyVector {
 public:
  EnergyVector() = default;

  EnergyVector(BasisPtr basis, std::vector<Rational> coeffs) : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (!basis_) throw ArgumentError("EnergyVector needs a frequency basis");
    if (coeffs_.size() != basis_->size()) throw ArgumentError("EnergyVector: coefficient count does not match basis");
  }

  static EnergyVector zero(const BasisPtr& basis) {
    return EnergyVector(basis, std::vector<Rational>(basis->size(), Rational(0)));
  }

  /// k-th basis frequency with unit coefficient.
  static EnergyVector unit(const BasisPtr& basis, std::size_t k) {
    EnergyVector e = zero(basis);
    e.coeffs_.at(k) = 1;
    return e;
  }

  const BasisPtr& basis() const { return basis_; }
  const std::vector<Rational>& coeffs() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }

  double value() const {
    double v = 0.0;
    for (std::size_t k = 0; k < coeffs_.size(); ++k) v += to_double(coeffs_[k]) * basis_->values[k];
    return v;
  }

  bool is_zero() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](const Rational& r) { return r.numerator() == 0; });
  }

  EnergyVector operator-() const {
    EnergyVector out = *this;
    for (auto& c : out.coeffs_) c = -c;
    return out;
  }

  EnergyVector& operator+=(const EnergyVector& o) {
    check(o);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += o.coeffs_[k];
    return *this;
  }
  EnergyVector& operator-=(const EnergyVector& o) {
    check(o);
    for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= o.coeffs_[k];
    return *this;
  }
  EnergyVector& operator*=(const Rational& s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }

  friend EnergyVector operator+(EnergyVector a, const EnergyVector& b) { return a += b; }
  friend EnergyVector operator-(EnergyVector a, const EnergyVector& b) { return a -= b; }
  friend EnergyVector operator*(const Rational& s, EnergyVector a) { return a *= s; }
  friend EnergyVector operator*(std::int64_t s, EnergyVector a) { return a *= Rational(s); }

  /// Exact equality of coefficients; bases must be compatible.
  friend bool operator==(const EnergyVector& a, const EnergyVector& b) {
    return a.coeffs_ == b.coeffs_ && compatible(a.basis_, b.basis_);
  }

  /// Lexicographic order on coefficients, for ordered containers.
  friend bool operator<(const EnergyVector& a, const EnergyVector& b) {
    return std::lexicographical_compare(a.coeffs_.begin(), a.coeffs_.end(), b.coeffs_.begin(), b.coeffs_.end());
  }

  /// Human-readable form such as "0", "w", "-1/2*w + 2*v".
  std::string to_string() const {
    if (is_zero()) return "0";
    std::ostringstream os;
    bool first = true;
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
      Rational c = coeffs_[k];
      if (c.numerator() == 0) continue;
      if (!first) {
        os << (c.numerator() < 0 ? " - " : " + ");
        c = abs(c);
      }
      first = false;
      if (c == Rational(1)) {
        os << basis_->names[k];
      } else if (c == Rational(-1)) {
        os << "-" << basis_->names[k];
      } else {
        os << format_rational(c) << "*" << basis_->names[k];
      }
    }
    return os.str();
  }

 private:
  void check(const EnergyVector& o) const {
    if (!compatible(basis_, o.basis_)) throw ArgumentError("EnergyVector arithmetic across incompatible bases");
  }

  BasisPtr basis_;
  std::vector<Rational> coeffs_;
};

namespace detail {

/// Solves sum_i x_i * columns[i] = target exactly over the rationals.
/// Returns nullopt if the system is inconsistent. Columns must be linearly
/// independent for the solution to be unique (it is then returned).
inline std::optional<std::vector<Rational>> solve_rational(const std::vector<std::vector<Rational>>& columns,
                                                           const std::vector<Rational>& target) {
  const std::size_t rows = target.size();
  const std::size_t cols = columns.size();
  std::vector<std::vector<Rational>> a(rows, std::vector<Rational>(cols + 1));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) a[r][c] = columns[c].at(r);
    a[r][cols] = target[r];
  }
  std::vector<std::size_t> pivot_col;
  std::size_t row = 0;
  for (std::size_t c = 0; c < cols && row < rows; ++c) {
    std::size_t p = row;
    while (p < rows && a[p][c].numerator() == 0) ++p;
    if (p == rows) continue;
    std::swap(a[p], a[row]);
    const Rational inv = Rational(1) / a[row][c];
    for (auto& v : a[row]) v *= inv;
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == row || a[r][c].numerator() == 0) continue;
      const Rational f = a[r][c];
      for (std::size_t k = c; k <= cols; ++k) a[r][k] -= f * a[row][k];
    }
    pivot_col.push_back(c);
    ++row;
  }
  for (std::size_t r = row; r < rows; ++r) {
    if (a[r][cols].numerator() != 0) return std::nullopt;
  }
  std::vector<Rational> x(cols, Rational(0));
  for (std::size_t r = 0; r < pivot_col.size(); ++r) x[pivot_col[r]] = a[r][cols];
  return x;
}

inline std::size_t rational_rank(const std::vector<std::vector<Rational>>& vectors) {
  if (vectors.empty()) return 0;
  auto a = vectors;
  const std::size_t width = a.front().size();
  std::size_t rank = 0;
  for (std::size_t c = 0; c < width && rank < a.size(); ++c) {
    std::size_t p = rank;
    while (p < a.size() && a[p][c].numerator() == 0) ++p;
    if (p == a.size()) continue;
    std::swap(a[p], a[rank]);
    for (std::size_t r = rank + 1; r < a.size(); ++r) {
      if (a[r][c].numerator() == 0) continue;
      const Rational f = a[r][c] / a[rank][c];
      for (std::size_t k = c; k < width; ++k) a[r][k] -= f * a[rank][k];
    }
    ++rank;
  }
  return rank;
}

}  // namespace detail
}  // namespace thermoops
