#pragma once

// Bounded-jump random walk on the integers as a model of ladder drift:
// jump laws read off a shift-compensated unitary, the gamma root of the
// martingale equation, the hitting bound, and a seeded Monte Carlo check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <thread>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "thermoops/catcoherence.hpp"
#include "thermoops/random.hpp"

namespace thermoops {

struct WalkSpec {
  std::map<std::int64_t, double> jumps;  // jump -> probability
  std::int64_t xi = 1;                   // start offset above the absorbing level

  void validate() const {
    if (jumps.empty()) throw ArgumentError("walk: no jumps");
    double s = 0;
    for (const auto& [c, p] : jumps) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ArgumentError("walk: jump probabilities must be finite and >= 0");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ArgumentError("walk: jump probabilities sum to " + std::to_string(s));
    if (xi < 1) throw ArgumentError("walk: xi must be >= 1");
  }

  double drift() const {
    double d = 0;
    for (const auto& [c, p] : jumps) d += static_cast<double>(c) * p;
    return d;
  }

  std::int64_t max_jump() const {
    std::int64_t l = 0;
    for (const auto& [c, p] : jumps) {
      if (p > 0) l = std::max<std::int64_t>(l, std::llabs(c));
    }
    return l;
  }

  double probability(std::int64_t c) const {
    const auto it = jumps.find(c);
    return it == jumps.end() ? 0.0 : it->second;
  }
};

/// Joint law of the ladder shift vectors when U acts on the system state diag(probs):
/// P(c) = sum_b probs_b sum_a |V_ab|^2 [m_ab = c].
inline std::map<std::vector<std::int64_t>, double> shift_distribution(const ShiftCompensatedUnitary& u,
                                                                      const VectorXd& probs) {
  if (probs.size() != u.system_dim()) throw ArgumentError("shift_distribution: probability vector has wrong size");
  std::map<std::vector<std::int64_t>, double> out;
  for (const auto& t : u.terms()) out[t.shift] += probs(t.in) * std::norm(t.amplitude);
  return out;
}

inline WalkSpec walk_from_unitary(const ShiftCompensatedUnitary& u, const VectorXd& probs, std::size_t ladder,
                                  std::int64_t xi = 1) {
  if (ladder >= u.ladders().size()) throw ArgumentError("walk_from_unitary: ladder index out of range");
  WalkSpec w;
  w.xi = xi;
  for (const auto& [shift, p] : shift_distribution(u, probs)) w.jumps[shift[ladder]] += p;
  return w;
}

/// sum_c P(c) S^c res S^{c dagger} over all ladders jointly; weight shifted off the truncation is dropped.
inline MatrixXcd predicted_resource_marginal(const ShiftCompensatedUnitary& u, const VectorXd& probs,
                                             const MatrixXcd& res) {
  const auto& ladders = u.ladders();
  const Eigen::Index n = u.ladder_dim();
  if (res.rows() != n) throw ArgumentError("predicted_resource_marginal: resource has wrong dimension");
  MatrixXcd out = MatrixXcd::Zero(n, n);
  for (const auto& [shift, p] : shift_distribution(u, probs)) {
    if (p == 0.0) continue;
    std::vector<Eigen::Index> target(static_cast<std::size_t>(n), -1);
    for (Eigen::Index q = 0; q < n; ++q) {
      auto d = detail::ladder_digits(q, ladders);
      bool ok = true;
      for (std::size_t l = 0; l < ladders.size() && ok; ++l) {
        const std::int64_t s = d[l] + shift[l];
        ok = s >= 0 && s <= ladders[l].truncation;
        d[l] = static_cast<int>(s);
      }
      if (ok) target[static_cast<std::size_t>(q)] = detail::ladder_index(d, ladders);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ti = target[static_cast<std::size_t>(i)];
      if (ti < 0) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto tj = target[static_cast<std::size_t>(j)];
        if (tj >= 0) out(ti, tj) += p * res(i, j);
      }
    }
  }
  return out;
}

/// f(g) = sum_i p_i (g + ... + g^i) - sum_i p_{-i} (g^-1 + ... + g^-i); strictly increasing on (0, 1).
inline double gamma_equation(const WalkSpec& w, double g) {
  double f = 0;
  for (const auto& [c, p] : w.jumps) {
    if (c == 0 || p == 0.0) continue;
    double acc = 0;
    double pw = 1;
    const double step = c > 0 ? g : 1.0 / g;
    for (std::int64_t j = 1; j <= std::llabs(c); ++j) {
      pw *= step;
      acc += pw;
    }
    f += c > 0 ? p * acc : -p * acc;
  }
  return f;
}

struct GammaResult {
  double gamma = 0;
  double residual = 0;  // |f(gamma)|
  double drift = 0;
};

/// Root of the gamma equation in (0, 1) by bisection. With no downward jumps the root degenerates to 0.
inline GammaResult solve_gamma(const WalkSpec& w) {
  w.validate();
  GammaResult r;
  r.drift = w.drift();
  if (!(r.drift > 0.0)) {
    throw NoRootError("solve_gamma: drift " + std::to_string(r.drift) + " is not positive; the hitting bound does not apply");
  }
  bool down = false;
  for (const auto& [c, p] : w.jumps) down = down || (c < 0 && p > 0.0);
  if (!down) return r;
  auto f = [&](double g) { return gamma_equation(w, g); };
  double lo = 0.5;
  while (f(lo) > 0.0) lo *= 0.5;
  const auto bracket = boost::math::tools::bisect(f, lo, 1.0, [](double a, double b) { return std::abs(b - a) <= 1e-15; });
  r.gamma = 0.5 * (bracket.first + bracket.second);
  r.residual = std::abs(f(r.gamma));
  return r;
}

struct HittingBound {
  double gamma = 0;
  double bound = 0;  // 1 / (gamma^{-xi-1} - gamma^{-1} + 1)
  double loose = 0;  // gamma^xi
};

inline HittingBound hitting_bound(const WalkSpec& w) {
  const GammaResult g = solve_gamma(w);
  HittingBound h;
  h.gamma = g.gamma;
  if (g.gamma <= 0.0) return h;
  const double xi = static_cast<double>(w.xi);
  const double denom = std::pow(g.gamma, -xi - 1.0) - 1.0 / g.gamma + 1.0;
  h.bound = std::clamp(1.0 / denom, 0.0, 1.0);
  h.loose = std::pow(g.gamma, xi);
  return h;
}

struct HittingEstimate {
  double estimate = 0;
  double std_error = 0;
  double escaped_mass = 0;  // mean over unhit trajectories of gamma^{xi + final position}
  std::uint64_t hits = 0;
  std::uint64_t trajectories = 0;
  std::uint64_t horizon = 0;
};

inline std::uint64_t default_horizon(const WalkSpec& w) {
  const double d = w.drift();
  if (!(d > 0.0)) throw NoRootError("walk: drift is not positive");
  return static_cast<std::uint64_t>(std::ceil(std::max(100.0, 1000.0 * static_cast<double>(w.xi) / d)));
}

/// Fraction of trajectories that reach <= -xi within the horizon. Trajectory k draws from mt19937_64 seeded with
/// mix_seed(seed, k), so the estimate does not depend on the thread count. A trajectory stops early once
/// gamma^{xi + X} < 1e-12, since it can then no longer hit with appreciable probability.
inline HittingEstimate simulate_hitting(const WalkSpec& w, std::uint64_t trajectories, std::uint64_t horizon,
                                        std::uint64_t seed, unsigned threads = 0) {
  w.validate();
  const double drift = w.drift();
  if (!(drift > 0.0)) throw NoRootError("simulate_hitting: drift is not positive");
  if (static_cast<double>(horizon) < 10.0 * static_cast<double>(w.xi) / drift) {
    throw ArgumentError("simulate_hitting: horizon must be >= 10*xi/drift = " +
                        std::to_string(10.0 * static_cast<double>(w.xi) / drift));
  }
  const double gamma = solve_gamma(w).gamma;
  std::vector<std::int64_t> values;
  std::vector<double> cdf;
  double acc = 0;
  for (const auto& [c, p] : w.jumps) {
    if (p <= 0.0) continue;
    acc += p;
    values.push_back(c);
    cdf.push_back(acc);
  }
  cdf.back() = 1.0;
  // Height above which gamma^h < 1e-12.
  const double escape_height = gamma > 0.0 ? std::log(1e-12) / std::log(gamma) : 0.0;

  std::vector<std::uint8_t> hit(trajectories, 0);
  std::vector<double> tail(trajectories, 0.0);
  auto run = [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t k = begin; k < end; ++k) {
      Rng rng(mix_seed(seed, k));
      std::int64_t x = 0;
      bool h = false;
      for (std::uint64_t s = 0; s < horizon; ++s) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        const auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        x += values[std::min(idx, values.size() - 1)];
        if (x <= -w.xi) {
          h = true;
          break;
        }
        if (static_cast<double>(x + w.xi) > escape_height) break;
      }
      hit[k] = h ? 1 : 0;
      tail[k] = (h || gamma <= 0.0) ? 0.0 : std::pow(gamma, static_cast<double>(x + w.xi));
    }
  };
  unsigned nt = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  nt = static_cast<unsigned>(std::min<std::uint64_t>(nt, std::max<std::uint64_t>(1, trajectories)));
  std::vector<std::thread> pool;
  const std::uint64_t chunk = (trajectories + nt - 1) / nt;
  for (unsigned t = 0; t < nt; ++t) {
    const std::uint64_t b = std::min<std::uint64_t>(trajectories, t * chunk);
    const std::uint64_t e = std::min<std::uint64_t>(trajectories, b + chunk);
    pool.emplace_back(run, b, e);
  }
  for (auto& th : pool) th.join();

  HittingEstimate r;
  r.trajectories = trajectories;
  r.horizon = horizon;
  double tail_sum = 0;
  std::uint64_t unhit = 0;
  for (std::uint64_t k = 0; k < trajectories; ++k) {
    r.hits += hit[k];
    if (!hit[k]) {
      tail_sum += tail[k];
      ++unhit;
    }
  }
  const double n = static_cast<double>(std::max<std::uint64_t>(1, trajectories));
  r.estimate = static_cast<double>(r.hits) / n;
  r.std_error = std::sqrt(r.estimate * (1.0 - r.estimate) / n);
  r.escaped_mass = unhit ? tail_sum / static_cast<double>(unhit) : 0.0;
  return r;
}

}  // namespace thermoops
