// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "../support.hpp"
#include "thermoops/protocol.hpp"

using namespace thermoops;
using namespace testing_support;

namespace {

constexpr double kIdentityTol = 1e-10;
constexpr double kMonotoneTol = 1e-9;
constexpr double kModeThreshold = 1e-9;
constexpr double kGammaTol = 1e-10;
constexpr double kMarginalTol = 1e-10;
constexpr double kCatalystTol = 1e-12;
constexpr double kBookkeepingTol = 1e-9;
constexpr double kEndToEndTol = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

DensityOperator real_state(std::initializer_list<double> rowmajor, const SystemLayout& layout) {
  const auto d = static_cast<Eigen::Index>(layout_dimension(layout));
  MatrixXcd m(d, d);
  auto it = rowmajor.begin();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = *it++;
  }
  return DensityOperator(m, layout);
}

Outcome free_energy_identity() {
  Rng rng(1001);
  double worst_identity = 0, worst_increase = -1e300;
  for (int k = 0; k < 500; ++k) {
    const double beta = random_beta(rng);
    // System dimension 2..8 with a 2-level bath keeps every joint space at <= 16.
    const SystemLayout sys = random_layout(rng, 2 + k % 7, 4);
    const DensityOperator r = random_state(sys, rng);
    const DensityOperator tau = gibbs_state(sys, beta);
    const double lhs = free_energy(r, beta) - free_energy(tau, beta);
    worst_identity = std::max(worst_identity, std::abs(lhs - relative_entropy(r, tau) / beta));
    const ThermalOperationSpec op = random_thermal_operation(rng, sys, 2, beta);
    worst_increase = std::max(worst_increase, free_energy(apply_thermal(op, r), beta) - free_energy(r, beta));
  }
  return {worst_identity <= kIdentityTol && worst_increase <= kMonotoneTol,
          "max |dF - D/beta| = " + fmt("%.2e", worst_identity) + ", max F increase = " + fmt("%.2e", worst_increase)};
}

Outcome pinching_convergence() {
  const DensityOperator r = real_state({.6, .3, .3, .4}, qubit());
  const double g2 = pinching_gap_per_copy(r, 2, 1.0);
  const double g8 = pinching_gap_per_copy(r, 8, 1.0);
  return {g8 < g2, "gap(mu=2) = " + fmt("%.6f", g2) + ", gap(mu=8) = " + fmt("%.6f", g8)};
}

Outcome mode_monotonicity() {
  Rng rng(1003);
  int violations = 0;
  for (int k = 0; k < 200; ++k) {
    const SystemLayout sys = random_layout(rng, 2 + k % 4);
    const ThermalOperationSpec op = random_thermal_operation(rng, sys, 2 + k % 2, random_beta(rng));
    const DensityOperator r = random_state(sys, rng);
    const ModeSet before = coherent_modes(r, kModeThreshold);
    for (const auto& m : coherent_modes(apply_thermal(op, r), kModeThreshold).modes) violations += !before.contains(m);
  }
  return {violations == 0, std::to_string(violations) + " new modes over 200 operations"};
}

Outcome oracle_equivalence() {
  Rng rng(1004);
  int disagreements = 0, feasible = 0;
  for (int k = 0; k < 500; ++k) {
    const int d = 2 + k % 4;
    std::uniform_int_distribution<int> level(0, 3);
    std::vector<EnergyVector> en;
    for (int i = 0; i < d; ++i) en.push_back(e(level(rng)));
    const double beta = random_beta(rng);
    const ClassicalState p(random_probability(rng, d, 0.2), en);
    VectorXd q = random_probability(rng, d, 0.2);
    if (k % 2 == 0) {
      const double t = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
      q = (1 - t) * p.probs + t * gibbs_weights(p, beta);
    }
    const auto lp = solve_gibbs_stochastic(p, ClassicalState(q, en), beta);
    disagreements += lp.feasible != lp.curve.holds;
    feasible += lp.feasible;
  }
  return {disagreements == 0, std::to_string(disagreements) + " disagreements, " + std::to_string(feasible) + "/500 feasible"};
}

Outcome random_walk() {
  const WalkSpec w{{{1, 0.75}, {-1, 0.25}}, 1};
  const double gamma = solve_gamma(w).gamma;
  const HittingBound hb = hitting_bound(w);
  const HittingEstimate est = simulate_hitting(w, 100000, default_horizon(w), 2024);
  bool ok = std::abs(gamma - std::sqrt(1.0 / 3.0)) <= kGammaTol && 1.0 / 3.0 <= hb.bound &&
            std::abs(est.estimate - 1.0 / 3.0) <= 3 * est.std_error && est.estimate <= hb.bound;
  const std::vector<WalkSpec> grid{
      {{{1, 0.6}, {-1, 0.4}}, 1},           {{{1, 0.7}, {-1, 0.3}}, 2},
      {{{1, 0.9}, {-1, 0.1}}, 3},           {{{2, 0.5}, {-1, 0.5}}, 1},
      {{{1, 0.5}, {0, 0.3}, {-1, 0.2}}, 1}, {{{3, 0.3}, {-1, 0.7}}, 2},
      {{{1, 0.5}, {2, 0.2}, {-2, 0.3}}, 1}, {{{1, 0.55}, {-2, 0.2}, {0, 0.25}}, 3},
      {{{4, 0.25}, {-1, 0.75}}, 1},         {{{2, 0.45}, {-3, 0.25}, {0, 0.3}}, 2}};
  int grid_ok = 0;
  std::uint64_t seed = 3000;
  for (const auto& g : grid) {
    const HittingEstimate e = simulate_hitting(g, 100000, default_horizon(g), seed++);
    grid_ok += e.estimate <= hitting_bound(g).bound + 3 * e.std_error;
  }
  ok = ok && grid_ok == 10;
  return {ok, "gamma = " + fmt("%.12f", gamma) + ", bound = " + fmt("%.4f", hb.bound) + ", MC = " + fmt("%.4f", est.estimate) +
                  " +- " + fmt("%.4f", est.std_error) + ", grid " + std::to_string(grid_ok) + "/10"};
}

Outcome catalytic_coherence() {
  std::string detail = "probe error at L=8,32,128:";
  double prev = 1.0;
  bool ok = true;
  for (int L : {8, 32, 128}) {
    const int M = 16, trunc = M + L + 4;
    const auto u = hadamard_shift_unitary(e(1), trunc);
    const DensityOperator res = make_resource(L, M, e(1), trunc);
    double worst = 0;
    for (const auto& p : default_probes(u.system_layout())) worst = std::max(worst, apply_with_resource(u, p, res).error_to_target);
    ok = ok && worst < prev;
    prev = worst;
    detail += " " + fmt("%.5f", worst);
  }
  const int L = 128, M = 40, nu = 20, trunc = M + L + nu + 8;
  const auto u = hadamard_shift_unitary(e(1), trunc);
  double worst_ratio = 0;
  for (int b = 0; b < 2; ++b) {
    const DensityOperator s = DensityOperator::pure(VectorXcd::Unit(2, b), u.system_layout());
    const ReuseResult rr = reuse_sequence(u, std::vector<DensityOperator>(nu, s), make_resource(L, M, e(1), trunc));
    for (const auto& st : rr.steps) worst_ratio = std::max(worst_ratio, st.error_to_target / rr.steps.front().error_to_target);
  }
  ok = ok && worst_ratio <= 2.0;
  return {ok, detail + "; 20-step reuse max error / step-1 error = " + fmt("%.4f", worst_ratio)};
}

Outcome marginal_after_rotation() {
  ProtocolConfig cfg{real_state({0, 0, 0, 0, .05, .1, 0, .1, .95}, qutrit()), real_state({.5, .3, 0, .3, .5, 0, 0, 0, 0}, qutrit())};
  cfg.L = 32;
  cfg.M = 8;
  const ConversionResult run = run_marginal_conversion(cfg);
  if (!run.artifacts || !run.artifacts->unitary) return {false, "conversion did not produce a rotation"};
  const ShiftCompensatedUnitary& u = *run.artifacts->unitary;
  const DensityOperator res = DensityOperator::pure(run.artifacts->resource, ladder_layout(u.ladders()));
  std::vector<VectorXd> inputs{run.artifacts->work_state};
  for (std::size_t j = 0; j < run.artifacts->slot_index.size(); ++j) {
    inputs.push_back(VectorXd::Unit(u.system_dim(), run.artifacts->slot_index[j]));
  }
  double worst = 0;
  for (const auto& p : inputs) {
    const auto step = apply_with_resource(u, DensityOperator::diagonal(p, u.system_layout()), res);
    worst = std::max(worst, (predicted_resource_marginal(u, p, res.matrix()) - step.resource_out.matrix()).cwiseAbs().maxCoeff());
  }
  return {worst <= kMarginalTol, std::to_string(inputs.size()) + " plan-basis inputs, max entry deviation " + fmt("%.2e", worst)};
}

Outcome catalyst_exactness() {
  std::string detail;
  bool ok = true;
  const std::vector<ProtocolConfig> cases{
      ProtocolConfig{real_state({0, 0, 0, 0, .05, .1, 0, .1, .95}, qutrit()), real_state({.5, .3, 0, .3, .5, 0, 0, 0, 0}, qutrit())},
      [] {
        ProtocolConfig c{real_state({.3, .2, .2, .7}, qubit()), real_state({.8, 0, 0, .2}, qubit())};
        c.nu = 2;
        return c;
      }()};
  for (const auto& cfg : cases) {
    const PaddedConversion pc = make_padded_conversion(cfg);
    const CatalystState cat = build_catalyst(cfg.rho, pc.map, pc.n, pc.padding);
    const CatalyticStepResult s = run_catalytic_step(cat, pc.map, cfg.rho_prime, cfg.beta);
    const double residual = std::max(s.catalyst_residual, s.joint_residual.value_or(1.0));
    // The system marginal is the bookkeeping mixture, so its error obeys the bookkeeping bound.
    ok = ok && residual <= kCatalystTol && s.mixture_residual <= kBookkeepingTol &&
         s.system_distance <= s.bookkeeping + kBookkeepingTol && 2 * s.system_distance <= s.bookkeeping_bound + kBookkeepingTol;
    detail += (detail.empty() ? "" : "; ") + std::string("n=") + std::to_string(pc.n) + ": residual " + fmt("%.1e", residual) +
              ", mixture " + fmt("%.1e", s.mixture_residual) + ", error " + fmt("%.5f", s.system_distance) + " <= " +
              fmt("%.5f", s.bookkeeping);
  }
  return {ok, detail};
}

Outcome end_to_end() {
  // Positive control. A coherent qubit target puts every slot one unit up at mu = 1, which needs an empty
  // ground level in the source and hence no coherence; the qubit attempt is run and reported, and the
  // positive control uses a qutrit.
  ProtocolConfig qubit_cfg{DensityOperator(plus_state(), qubit()), real_state({.7, .2, .2, .3}, qubit())};
  qubit_cfg.nu = 4;
  const ConversionResult q = run_marginal_conversion(qubit_cfg);

  const DensityOperator src = real_state({0, 0, 0, 0, .05, .1, 0, .1, .95}, qutrit());
  const DensityOperator dst = real_state({.5, .3, 0, .3, .5, 0, 0, 0, 0}, qutrit());
  ProtocolConfig cfg{src, dst};
  cfg.mu = 1;
  cfg.nu = 4;
  cfg.L = 128;
  cfg.M = 16;
  const ConversionResult r = run_marginal_conversion(cfg);
  const bool positive = r.xi.has_value() && r.report.max_marginal_distance <= kEndToEndTol;

  int infeasible = 0, tested = 0;
  for (auto [mu, nu] : {std::pair{1, 1}, std::pair{1, 4}, std::pair{2, 1}, std::pair{2, 2}}) {
    ProtocolConfig rev{dst, src};
    rev.mu = mu;
    rev.nu = nu;
    rev.L = 32;
    rev.M = 8;
    rev.enforce_preconditions = false;
    ++tested;
    infeasible += run_marginal_conversion(rev).report.status == "classical_infeasible";
  }
  return {positive && infeasible == tested,
          "qubit attempt: " + q.report.status + "; qutrit max marginal distance " + fmt("%.5f", r.report.max_marginal_distance) +
              "; reversed infeasible at " + std::to_string(infeasible) + "/" + std::to_string(tested) + " configurations"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "free-energy identity and monotonicity", 30, free_energy_identity},
      {2, "pinching convergence", 60, pinching_convergence},
      {3, "mode monotonicity", 60, mode_monotonicity},
      {4, "classical oracle equivalence", 60, oracle_equivalence},
      {5, "random-walk lemma", 120, random_walk},
      {6, "catalytic-coherence accuracy", 120, catalytic_coherence},
      {7, "marginal-after-rotation identity", 30, marginal_after_rotation},
      {8, "catalyst exactness", 60, catalyst_exactness},
      {9, "end-to-end positive/negative control", 300, end_to_end},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.budget_s;
    failures += !pass;
    std::printf("%s %d %s (%.2fs): %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}
