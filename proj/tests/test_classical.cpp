#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "support.hpp"
#include "thermoops/lp.hpp"
#include "thermoops/modes.hpp"

using namespace thermoops;
using namespace testing_support;

namespace {

ClassicalState on_levels(const std::vector<int>& levels, const VectorXd& p) {
  std::vector<EnergyVector> en;
  for (int l : levels) en.push_back(e(l));
  return ClassicalState(p, en);
}

std::vector<int> random_levels(Rng& rng, int d) {
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<int> l(static_cast<std::size_t>(d));
  for (auto& x : l) x = pick(rng);
  return l;
}

// Independent curve oracle: sort by p_i / g_i, accumulate, and interpolate linearly.
struct Curve {
  std::vector<double> xs, ys;
  double at(double x) const {
    for (std::size_t k = 1; k < xs.size(); ++k) {
      if (x <= xs[k] + 1e-15) {
        const double w = xs[k] - xs[k - 1];
        return w <= 0 ? ys[k] : ys[k - 1] + (ys[k] - ys[k - 1]) * (x - xs[k - 1]) / w;
      }
    }
    return ys.back();
  }
};

Curve curve_of(const VectorXd& p, const VectorXd& g) {
  std::vector<int> idx(static_cast<std::size_t>(p.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return p(a) * g(b) > p(b) * g(a); });
  Curve c{{0.0}, {0.0}};
  for (int i : idx) {
    c.xs.push_back(c.xs.back() + g(i));
    c.ys.push_back(c.ys.back() + p(i));
  }
  return c;
}

// Smallest vertical gap curve_p - curve_q over q's vertices.
double oracle_gap(const VectorXd& p, const VectorXd& q, const VectorXd& energies, double beta) {
  VectorXd g = (-beta * energies).array().exp().matrix();
  g /= g.sum();
  const Curve cp = curve_of(p, g), cq = curve_of(q, g);
  double worst = 1.0;
  for (std::size_t k = 0; k < cq.xs.size(); ++k) worst = std::min(worst, cp.at(cq.xs[k]) - cq.ys[k]);
  return worst;
}

double kl(const VectorXd& p, const VectorXd& g) {
  double d = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0) d += p(i) * std::log(p(i) / g(i));
  }
  return d;
}

}  // namespace

TEST(Lp, SmallSystems) {
  Eigen::MatrixXd a(1, 2);
  a << 1, 1;
  Eigen::VectorXd b(1);
  b << 1;
  const LpResult ok = find_feasible_point(a, b);
  ASSERT_TRUE(ok.feasible);
  EXPECT_NEAR(ok.x.sum(), 1.0, 1e-12);
  EXPECT_GE(ok.x.minCoeff(), 0.0);
  b << -1;
  const LpResult bad = find_feasible_point(a, b);
  EXPECT_FALSE(bad.feasible);
  EXPECT_NEAR(bad.phase_one_value, 1.0, 1e-12);
}

TEST(GibbsStochastic, Examples) {
  const double beta = 0.8;
  VectorXd p(3);
  p << 0.5, 0.2, 0.3;
  const ClassicalState s = on_levels({0, 1, 2}, p);
  const auto self = solve_gibbs_stochastic(s, s, beta);
  ASSERT_TRUE(self.feasible);
  EXPECT_LT(self.residual, 1e-10);
  const ClassicalState g = on_levels({0, 1, 2}, gibbs_weights(s, beta));
  EXPECT_TRUE(solve_gibbs_stochastic(s, g, beta).feasible);
  const ClassicalState excited = on_levels({0, 1, 2}, VectorXd::Unit(3, 2));
  const auto r = solve_gibbs_stochastic(g, excited, beta);
  EXPECT_FALSE(r.feasible);
  EXPECT_GT(r.phase_one_value, 1e-6);
  EXPECT_FALSE(r.curve.holds);
  EXPECT_TRUE(solve_gibbs_stochastic(excited, g, beta).feasible);
}

TEST(GibbsStochastic, AgreesWithCurveOracle) {
  Rng rng(500);
  int feasible = 0, infeasible = 0;
  for (int k = 0; k < 500; ++k) {
    const int d = 2 + k % 4;
    const auto levels = random_levels(rng, d);
    const double beta = random_beta(rng);
    const ClassicalState p = on_levels(levels, random_probability(rng, d, 0.2));
    VectorXd qp = random_probability(rng, d, 0.2);
    if (k % 2 == 0) {
      // Partial thermalization of p is always reachable; use it for half the pairs.
      const double t = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
      qp = (1 - t) * p.probs + t * gibbs_weights(p, beta);
    }
    const ClassicalState q = on_levels(levels, qp);
    const double gap = oracle_gap(p.probs, q.probs, p.numeric_energies(), beta);
    // The curves always meet at both ends, so gap <= 0; skip only the numerically ambiguous band.
    if (gap < -1e-10 && gap > -1e-7) continue;
    const auto r = solve_gibbs_stochastic(p, q, beta);
    EXPECT_EQ(r.feasible, gap >= -1e-10) << "instance " << k << " gap " << gap;
    EXPECT_NEAR(r.curve.worst_gap, gap, 1e-9);
    if (r.feasible) {
      ++feasible;
      const VectorXd g = gibbs_weights(p, beta);
      EXPECT_GE(r.map.minCoeff(), -1e-12);
      EXPECT_LT((r.map.colwise().sum().transpose() - VectorXd::Ones(d)).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LT((r.map * g - g).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LT((r.map * p.probs - q.probs).cwiseAbs().maxCoeff(), 1e-9);
    } else {
      ++infeasible;
    }
  }
  EXPECT_GT(feasible, 30);
  EXPECT_GT(infeasible, 30);
}

TEST(GibbsStochastic, RelativeEntropyToGibbsDecreases) {
  Rng rng(8);
  for (int k = 0; k < 200; ++k) {
    const int d = 2 + k % 4;
    const auto levels = random_levels(rng, d);
    const double beta = random_beta(rng);
    const ClassicalState p = on_levels(levels, random_probability(rng, d));
    const ClassicalState q = on_levels(levels, random_probability(rng, d));
    const auto t = gibbs_stochastic_feasible(p, q, beta);
    if (!t) continue;
    const VectorXd g = gibbs_weights(p, beta);
    EXPECT_NEAR(classical_relative_entropy(p.probs, g), kl(p.probs, g), 1e-12);
    EXPECT_LE(kl(apply_classical_map(*t, p).probs, g), kl(p.probs, g) + 1e-9);
  }
}

TEST(GibbsStochastic, RejectsMismatchedInputs) {
  VectorXd p(2);
  p << 0.5, 0.5;
  EXPECT_THROW(on_levels({0}, p), ArgumentError);
  EXPECT_THROW(solve_gibbs_stochastic(on_levels({0, 1}, p), on_levels({0, 2}, p), 1.0), ArgumentError);
  VectorXd bad(2);
  bad << 0.7, 0.7;
  EXPECT_THROW(on_levels({0, 1}, bad), InvalidStateError);
}

TEST(ClassicalTarget, PlusStateQubit) {
  const DensityOperator plus(plus_state(), qubit());
  const ClassicalTargetPlan plan = build_classical_target(plus, 1, IntegerBasis{{e(1)}});
  ASSERT_EQ(plan.size(), 2u);
  EXPECT_NEAR(plan.eigenvalues[0], 1.0, 1e-12);
  EXPECT_NEAR(plan.eigenvalues[1], 0.0, 1e-12);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(plan.target_energies[j], e(1));
    EXPECT_EQ(plan.shifts[j][0], (std::vector<std::int64_t>{1}));
    EXPECT_EQ(plan.shifts[j][1], (std::vector<std::int64_t>{0}));
    EXPECT_NEAR(plan.window[j][0], 0.5, 1e-12);
  }
  EXPECT_NEAR(plan.energy_excess, 0.5, 1e-12);
}

TEST(ClassicalTarget, InvariantsOnRandomStates) {
  Rng rng(61);
  int built = 0;
  for (int k = 0; k < 120; ++k) {
    const SystemLayout sys = random_layout(rng, 2 + k % 2, 2);
    const DensityOperator r = random_state(sys, rng);
    const int mu = 1 + k % 2;
    const double beta = random_beta(rng);
    const ModeSet modes = coherent_modes(r);
    if (modes.incoherent()) continue;
    const IntegerBasis basis = independent_basis(modes);
    const ClassicalTargetPlan plan = build_classical_target(r, mu, basis);
    ++built;
    const DensityOperator block = tensor_power(r, mu);
    const auto d = static_cast<Eigen::Index>(block.dim());
    // Spectrum is kept.
    std::vector<double> mine = plan.eigenvalues;
    std::sort(mine.begin(), mine.end());
    const VectorXd ref = spectrum(block.matrix());
    std::vector<double> theirs(ref.data(), ref.data() + ref.size());
    std::sort(theirs.begin(), theirs.end());
    for (std::size_t i = 0; i < mine.size(); ++i) EXPECT_NEAR(mine[i], std::max(0.0, theirs[i]), 1e-9);
    // Eigenvectors reproduce the block.
    MatrixXcd rebuilt = MatrixXcd::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      rebuilt += plan.eigenvalues[static_cast<std::size_t>(j)] * plan.eigenvectors.col(j) * plan.eigenvectors.col(j).adjoint();
    }
    EXPECT_LT((rebuilt - block.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    // Shifts, windows and the energy bookkeeping agree with a direct recomputation.
    double excess = 0;
    for (std::size_t j = 0; j < plan.size(); ++j) {
      std::vector<double> win(basis.size(), 0.0);
      for (Eigen::Index c = 0; c < d; ++c) {
        const auto& s = plan.shifts[j][static_cast<std::size_t>(c)];
        if (s.empty()) continue;
        EnergyVector lhs = plan.block_energies[static_cast<std::size_t>(c)];
        for (std::size_t l = 0; l < basis.size(); ++l) lhs += s[l] * basis.elements[l];
        EXPECT_EQ(lhs, plan.target_energies[j]);
        for (std::size_t l = 0; l < basis.size(); ++l) {
          win[l] += static_cast<double>(s[l]) * std::norm(plan.eigenvectors(c, static_cast<Eigen::Index>(j)));
        }
      }
      for (std::size_t l = 0; l < basis.size(); ++l) {
        EXPECT_NEAR(win[l], plan.window[j][l], 1e-9);
        EXPECT_GT(plan.window[j][l], 0.0);
        EXPECT_LE(plan.window[j][l], 1.0 + 1e-12);
        excess += plan.eigenvalues[j] * win[l] * basis.elements[l].value();
      }
    }
    EXPECT_NEAR(excess, plan.energy_excess, 1e-9);
    // The classical target costs exactly the excess energy over the block, and no more than one unit per mode.
    const double f_class = classical_free_energy(plan_state(plan), beta);
    EXPECT_NEAR(f_class, free_energy(block, beta) + plan.energy_excess, 1e-8);
    double units = 0;
    for (const auto& u : basis.elements) units += u.value();
    EXPECT_LE(plan.energy_excess, units + 1e-12);
  }
  EXPECT_GT(built, 80);
}

TEST(ClassicalTarget, RejectsBadArguments) {
  const DensityOperator plus(plus_state(), qubit());
  EXPECT_THROW(build_classical_target(plus, 0, IntegerBasis{{e(1)}}), ArgumentError);
  EXPECT_THROW(build_classical_target(plus, 1, IntegerBasis{{e(2)}}), ConstructionError);
}
