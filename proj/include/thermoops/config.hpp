#pragma once

#include <cstddef>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>

namespace thermoops {

/// Numerical tolerances shared by every module. Values are passed explicitly;
/// there is no process-wide mutable copy.
struct Tolerances {
  double herm = 1e-10;
  double trace = 1e-10;
  double psd = 1e-9;
  double energy_conserving = 1e-9;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments: unknown labels, shape mismatches, unsatisfiable parameters.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A matrix handed to DensityOperator violates hermiticity, trace or PSD bounds.
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

class NumericRangeError : public Error {
 public:
  using Error::Error;
};

/// Requested dimension or memory exceeds the configured cap.
class ResourceLimitError : public Error {
 public:
  using Error::Error;
};

/// Root finding has no admissible root (non-positive drift).
class NoRootError : public Error {
 public:
  using Error::Error;
};

/// An operator failed a structural check while being assembled.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kDefaultMaxDimension = std::size_t{1} << 14;

/// Dimension cap for materialized matrices. THERMOOPS_MAX_DIM overrides it.
inline std::size_t max_dimension() {
  if (const char* env = std::getenv("THERMOOPS_MAX_DIM")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefaultMaxDimension;
}

inline void require_dimension(std::size_t dim, std::string_view what) {
  const std::size_t cap = max_dimension();
  if (dim > cap) {
    throw ResourceLimitError(std::string(what) + ": dimension " + std::to_string(dim) +
                             " exceeds limit " + std::to_string(cap));
  }
}

}  // namespace thermoops
