#include <gtest/gtest.h>

#include "support.hpp"
#include "thermoops/randomwalk.hpp"

using namespace thermoops;
using namespace testing_support;

namespace {

WalkSpec nearest(double up, std::int64_t xi = 1) { return WalkSpec{{{1, up}, {-1, 1.0 - up}}, xi}; }

// Gambler's ruin on an unbounded line: P(hit -xi) = (q / p)^xi for +-1 steps with p > q.
double ruin(double up, std::int64_t xi) { return std::pow((1.0 - up) / up, static_cast<double>(xi)); }

std::vector<WalkSpec> grid() {
  return {
      nearest(0.6),
      nearest(0.7, 2),
      nearest(0.9, 3),
      WalkSpec{{{2, 0.5}, {-1, 0.5}}, 1},
      WalkSpec{{{1, 0.5}, {0, 0.3}, {-1, 0.2}}, 1},
      WalkSpec{{{3, 0.3}, {-1, 0.7}}, 2},
      WalkSpec{{{1, 0.5}, {2, 0.2}, {-2, 0.3}}, 1},
      WalkSpec{{{1, 0.55}, {-2, 0.2}, {0, 0.25}}, 3},
      WalkSpec{{{4, 0.25}, {-1, 0.75}}, 1},
      WalkSpec{{{2, 0.45}, {-3, 0.25}, {0, 0.3}}, 2},
  };
}

}  // namespace

TEST(Gamma, ThreeQuarterWalk) {
  const WalkSpec w = nearest(0.75);
  const GammaResult g = solve_gamma(w);
  EXPECT_NEAR(g.gamma, std::sqrt(1.0 / 3.0), 1e-10);
  EXPECT_LT(g.residual, 1e-12);
  EXPECT_DOUBLE_EQ(g.drift, 0.5);
  const HittingBound hb = hitting_bound(w);
  EXPECT_NEAR(hb.bound, 1.0 / (4.0 - std::sqrt(3.0)), 1e-10);
  EXPECT_NEAR(hb.bound, 0.4409, 1e-4);
  EXPECT_LE(ruin(0.75, 1), hb.bound);
}

TEST(Gamma, RootSolvesTheEquation) {
  for (const auto& w : grid()) {
    const GammaResult g = solve_gamma(w);
    ASSERT_GT(g.gamma, 0.0);
    ASSERT_LT(g.gamma, 1.0);
    EXPECT_LT(std::abs(gamma_equation(w, g.gamma)), 1e-12);
    // Independent check with closed-form geometric sums and a plain bisection.
    auto geometric = [&](double x) {
      double f = 0;
      for (const auto& [c, p] : w.jumps) {
        const auto n = static_cast<double>(std::llabs(c));
        if (c > 0) f += p * x * (1 - std::pow(x, n)) / (1 - x);
        if (c < 0) f -= p * (std::pow(x, -n) - 1) / (1 - x);
      }
      return f;
    };
    double lo = 1e-9, hi = 1 - 1e-12;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (geometric(mid) < 0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(g.gamma, lo, 1e-10);
  }
}

TEST(Gamma, NearestNeighbourRootIsSquareRootOfRatio) {
  for (double up : {0.55, 0.6, 0.8, 0.95}) EXPECT_NEAR(solve_gamma(nearest(up)).gamma, std::sqrt((1.0 - up) / up), 1e-12);
}

TEST(Gamma, NoDownwardJumps) {
  const WalkSpec w{{{1, 1.0}}, 2};
  EXPECT_EQ(solve_gamma(w).gamma, 0.0);
  EXPECT_EQ(hitting_bound(w).bound, 0.0);
  EXPECT_EQ(simulate_hitting(w, 1000, 100, 1).estimate, 0.0);
}

TEST(Gamma, ContinuousInTheJumpLaw) {
  double prev = solve_gamma(nearest(0.6)).gamma;
  for (int k = 1; k <= 100; ++k) {
    const double g = solve_gamma(nearest(0.6 + 0.001 * k)).gamma;
    EXPECT_LT(g, prev);
    EXPECT_LT(prev - g, 0.01);
    prev = g;
  }
}

TEST(Bound, BelowLooseBoundAndMonotoneInStart) {
  for (auto w : grid()) {
    double prev = 1.0;
    for (std::int64_t xi = 1; xi <= 6; ++xi) {
      w.xi = xi;
      const HittingBound hb = hitting_bound(w);
      EXPECT_LT(hb.bound, hb.loose);
      EXPECT_LT(hb.bound, prev);
      prev = hb.bound;
    }
  }
}

TEST(Bound, RejectsNonPositiveDrift) {
  EXPECT_THROW(solve_gamma(nearest(0.5)), NoRootError);
  EXPECT_THROW(solve_gamma(nearest(0.3)), NoRootError);
  EXPECT_THROW(simulate_hitting(nearest(0.4), 10, 100, 1), NoRootError);
  EXPECT_THROW(solve_gamma(WalkSpec{{{1, 0.7}, {-1, 0.7}}, 1}), ArgumentError);
  EXPECT_THROW(solve_gamma(WalkSpec{{{1, 1.0}}, 0}), ArgumentError);
}

TEST(Simulation, ThreeQuarterWalkMatchesRuin) {
  const WalkSpec w = nearest(0.75);
  const HittingEstimate est = simulate_hitting(w, 100000, default_horizon(w), 12345);
  EXPECT_EQ(est.trajectories, 100000u);
  EXPECT_LT(std::abs(est.estimate - 1.0 / 3.0), 3.0 * est.std_error);
  EXPECT_LE(est.estimate, hitting_bound(w).bound);
}

TEST(Simulation, GridRespectsBound) {
  std::uint64_t seed = 100;
  for (const auto& w : grid()) {
    const HittingEstimate est = simulate_hitting(w, 20000, default_horizon(w), seed++);
    EXPECT_LE(est.estimate, hitting_bound(w).bound + 3.0 * est.std_error);
    if (w.jumps.size() == 2 && w.max_jump() == 1) {
      EXPECT_LT(std::abs(est.estimate - ruin(w.probability(1), w.xi)), 4.0 * est.std_error + 1e-3);
    }
  }
}

TEST(Simulation, IndependentOfThreadCount) {
  const WalkSpec w = grid()[4];
  const auto h = default_horizon(w);
  const HittingEstimate a = simulate_hitting(w, 5000, h, 7, 1);
  const HittingEstimate b = simulate_hitting(w, 5000, h, 7, 3);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_NE(simulate_hitting(w, 5000, h, 8, 1).hits, 0u);
}

TEST(Simulation, ShortHorizonIsRejected) {
  const WalkSpec w = nearest(0.75, 2);
  EXPECT_THROW(simulate_hitting(w, 10, 39, 1), ArgumentError);
  EXPECT_NO_THROW(simulate_hitting(w, 10, 40, 1));
}

TEST(WalkFromUnitary, HadamardOnBasisStates) {
  const auto u = hadamard_shift_unitary(e(1), 10);
  VectorXd ground(2), excited(2);
  ground << 1, 0;
  excited << 0, 1;
  const WalkSpec g = walk_from_unitary(u, ground, 0);
  const WalkSpec x = walk_from_unitary(u, excited, 0);
  // The ladder pays for the system's energy change, so the drifts are -1/2 and +1/2.
  EXPECT_NEAR(g.probability(0), 0.5, 1e-15);
  EXPECT_NEAR(g.drift(), -0.5, 1e-15);
  EXPECT_NEAR(x.probability(0), 0.5, 1e-15);
  EXPECT_NEAR(x.drift(), 0.5, 1e-15);
  EXPECT_THROW(walk_from_unitary(u, ground, 1), ArgumentError);
}
