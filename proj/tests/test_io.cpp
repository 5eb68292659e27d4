#include <gtest/gtest.h>

#include "support.hpp"
#include "thermoops/io.hpp"

using namespace thermoops;
using namespace testing_support;

namespace {

ProtocolConfig qutrit_config(int nu) {
  MatrixXcd a = MatrixXcd::Zero(3, 3), b = MatrixXcd::Zero(3, 3);
  a(1, 1) = .05;
  a(1, 2) = a(2, 1) = .1;
  a(2, 2) = .95;
  b(0, 0) = b(1, 1) = .5;
  b(0, 1) = b(1, 0) = .3;
  ProtocolConfig cfg{DensityOperator(a, qutrit()), DensityOperator(b, qutrit())};
  cfg.nu = nu;
  cfg.seed = 4;
  return cfg;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Json, MalformedTextReportsLineAndColumn) {
  const std::string text = "{\n  \"dim\": 2,\n  \"entries\": [1, 2,, 3]\n}";
  const std::string msg = error_of([&] { parse_json_text(text, "in.json"); });
  EXPECT_EQ(msg, "in.json:3:20: malformed JSON");
  EXPECT_NE(error_of([] { read_json_file("/nonexistent/x.json"); }), "");
}

TEST(Json, EnergyAndHamiltonianRoundTrip) {
  const EnergyVector x = e2(Rational(3, 2), Rational(-1));
  EXPECT_EQ(energy_from_json(energy_to_json(x), omega_root2(), "e"), x);
  const HamiltonianSpec h = qutrit().front().hamiltonian;
  const HamiltonianSpec back = hamiltonian_from_json(hamiltonian_to_json(h));
  EXPECT_EQ(back.energies(), h.energies());
  EXPECT_EQ(back.basis()->names, h.basis()->names);
}

TEST(Json, StateRoundTripIsExact) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const DensityOperator r = random_state(random_layout(rng, 2 + k % 4), rng);
    const DensityOperator back = state_from_json(parse_json_text(state_to_json(r).dump()));
    EXPECT_EQ(back.matrix(), r.matrix());
    EXPECT_EQ(back.energies(), r.energies());
    EXPECT_EQ(state_to_json(back).dump(), state_to_json(r).dump());
  }
}

TEST(Json, UnknownAndMissingFieldsAreRejected) {
  json s = state_to_json(DensityOperator(plus_state(), qubit()));
  s["colour"] = "blue";
  EXPECT_NE(error_of([&] { state_from_json(s); }).find("unknown field 'colour'"), std::string::npos);
  json m = state_to_json(DensityOperator(plus_state(), qubit()));
  m.erase("entries");
  EXPECT_NE(error_of([&] { state_from_json(m); }).find("missing field 'entries'"), std::string::npos);
  json cfg = protocol_config_to_json(qutrit_config(1));
  cfg["stage"] = "sideways";
  EXPECT_NE(error_of([&] { protocol_config_from_json(cfg); }), "");
  cfg["stage"] = "full";
  cfg["nu"] = "four";
  EXPECT_NE(error_of([&] { protocol_config_from_json(cfg); }), "");
}

TEST(Json, WalkRoundTripAndValidation) {
  const WalkSpec w{{{-1, 0.25}, {1, 0.75}}, 3};
  const WalkSpec back = walk_from_json(walk_to_json(w));
  EXPECT_EQ(back.jumps, w.jumps);
  EXPECT_EQ(back.xi, 3);
  EXPECT_NE(error_of([] { walk_from_json(parse_json_text(R"({"jumps": {"up": 1.0}})")); }), "");
  EXPECT_NE(error_of([] { walk_from_json(parse_json_text(R"({"jumps": {"1": 0.5}})")); }), "");
  EXPECT_EQ(walk_from_json(parse_json_text(R"({"jumps": {"1": 1.0}})")).xi, 1);
}

TEST(Json, ThermalOperationRoundTrip) {
  Rng rng(6);
  const ThermalOperationSpec op = random_thermal_operation(rng, qubit(), 2, 0.9);
  const ThermalOperationSpec back = thermal_from_json(parse_json_text(thermal_to_json(op).dump()), qubit());
  EXPECT_EQ(back.unitary(), op.unitary());
  EXPECT_EQ(back.beta(), op.beta());
}

TEST(Json, ConfigRoundTrip) {
  ProtocolConfig cfg = qutrit_config(3);
  cfg.stage = ProtocolStage::rotation_only;
  cfg.delta = 0.25;
  const json j = protocol_config_to_json(cfg);
  const ProtocolConfig back = protocol_config_from_json(parse_json_text(j.dump()));
  EXPECT_EQ(protocol_config_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.stage, ProtocolStage::rotation_only);
  EXPECT_EQ(back.nu, 3);
}

TEST(Report, RoundTripAndDeterminism) {
  const ConversionResult a = run_marginal_conversion(qutrit_config(2));
  const ConversionResult b = run_marginal_conversion(qutrit_config(2));
  const std::string text = report_to_json(a.report).dump(2);
  EXPECT_EQ(text, report_to_json(b.report).dump(2));
  const ConversionReport back = report_from_json(parse_json_text(text));
  EXPECT_EQ(report_to_json(back).dump(2), text);
  EXPECT_EQ(back.marginal_distances, a.report.marginal_distances);
  const json j = parse_json_text(text);
  EXPECT_EQ(j.at("schema"), "thermoops.conversion_report/1");
  EXPECT_EQ(j.at("seed"), 4);
  EXPECT_EQ(j.at("parameters").at("nu"), 2);
}

TEST(Report, InfeasibleRunKeepsDiagnostics) {
  ProtocolConfig cfg = qutrit_config(1);
  std::swap(cfg.rho, cfg.rho_prime);
  cfg.enforce_preconditions = false;
  const ConversionResult r = run_marginal_conversion(cfg);
  const json j = report_to_json(r.report);
  EXPECT_EQ(j.at("status"), "classical_infeasible");
  EXPECT_GT(j.at("classical").at("phase_one_value").get<double>(), 0.0);
  EXPECT_EQ(report_to_json(report_from_json(j)).dump(), j.dump());
}

TEST(Report, CsvHasOneRowPerCopy) {
  const ConversionResult r = run_marginal_conversion(qutrit_config(3));
  const std::string csv = report_to_csv(r.report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "copy,block,marginal_distance,block_distance");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
