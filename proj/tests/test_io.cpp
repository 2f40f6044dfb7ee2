#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace lureid;
using io::json;

TEST(Json, NonFiniteNumbersBecomeNull) {
  EXPECT_TRUE(io::number(INFINITY).is_null());
  EXPECT_TRUE(io::number(NAN).is_null());
  EXPECT_TRUE(io::number(std::optional<double>{}).is_null());
  EXPECT_EQ(io::number(1.5).get<double>(), 1.5);
}

TEST(Json, ModelRoundTrip) {
  const IdentifiedModel m = fixture::experiment1_model(1, 0.7);
  const IdentifiedModel back = io::model_from_json(json::parse(io::to_json(m).dump()));
  EXPECT_EQ(back.theta, m.theta);
  EXPECT_EQ(back.residual.omega, m.residual.omega);
  EXPECT_EQ(back.residual.points, m.residual.points);
  EXPECT_EQ(back.residual.spec, m.residual.spec);
  EXPECT_EQ(back.gamma, m.gamma);
  EXPECT_EQ(back.metrics.a_norm, m.metrics.a_norm);
  EXPECT_EQ(back.metrics.ell_delta, m.metrics.ell_delta);
  EXPECT_EQ(back.linear.assemble_A(back.theta), m.A());
  const Vector x = Eigen::Vector3d(0.2, 0.4, 0.6);
  EXPECT_EQ(eval_residual(back.residual, x), eval_residual(m.residual, x));
}

TEST(Json, ModelMissingFieldIsParseError) {
  json j = io::to_json(fixture::experiment1_model(1, 0.7));
  j.erase("omega");
  EXPECT_THROW(io::model_from_json(j), ParseError);
}

TEST(Json, ScenarioOverridesAndEcho) {
  const json j = json::parse(R"({"name": "experiment2", "seed": 11, "horizon": 30,
      "kernel": {"sigma": 50}, "noise": {"measurement_sigma": 0.02},
      "input_signal": {"noise_sigma": 0.0}})");
  const Scenario s = io::scenario_from_json(j);
  EXPECT_EQ(s.seed, 11u);
  EXPECT_EQ(s.horizon, 30);
  EXPECT_EQ(s.kernel.family, KernelFamily::laplacian);
  EXPECT_EQ(s.kernel.sigma, 50.0);
  EXPECT_EQ(s.system.measurement_noise_sigma, 0.02);
  EXPECT_EQ(s.input_signal.noise_sigma, 0.0);
  EXPECT_EQ(s.system.nonlinearity, "exp2");

  const json echo = io::to_json(s);
  EXPECT_EQ(echo["rng"], std::string(kRngAlgorithm));
  const Scenario again = io::scenario_from_json(echo);
  EXPECT_EQ(again.seed, s.seed);
  EXPECT_EQ(again.kernel, s.kernel);
  EXPECT_EQ(again.theta_true, s.theta_true);
}

TEST(Json, ScenarioRejectsBadInput) {
  EXPECT_THROW(io::scenario_from_json(json::parse(R"({"name": "bogus"})")), InvalidInputError);
  EXPECT_THROW(io::scenario_from_json(json::parse(R"({"seed": 1})")), ParseError);
  EXPECT_THROW(io::scenario_from_json(json::parse(R"({"name": "experiment1", "rng": "pcg32"})")), ParseError);
  EXPECT_THROW(io::scenario_from_json(json::parse(R"({"name": "experiment1", "theta_true": [1, 2]})")),
               InvalidInputError);
  EXPECT_THROW(io::scenario_from_json(json::parse(R"({"name": "experiment1", "kernel": {"sigma": -1}})")),
               InvalidInputError);
}

TEST(Json, FitDocumentSummary) {
  SweepRecord r;
  r.gamma = 3.0;
  r.feasible = true;
  r.val_rmse = 0.25;
  r.theta_error = INFINITY;
  const IdentifiedModel m = fixture::experiment1_model(1, 3.0);
  const json doc = io::fit_document(r, m, json{{"seed", 1}});
  EXPECT_TRUE(doc["theta_error"].is_null());
  const io::FitSummary f = io::fit_summary_from_json(json::parse(doc.dump()));
  EXPECT_EQ(f.gamma, 3.0);
  EXPECT_TRUE(f.feasible);
  EXPECT_EQ(f.val_rmse, 0.25);
  EXPECT_FALSE(f.theta_error.has_value());
  ASSERT_TRUE(f.model.has_value());
  EXPECT_EQ(f.model->theta, m.theta);

  const io::FitSummary none = io::fit_summary_from_json(io::fit_document(r, std::nullopt, json::object()));
  EXPECT_FALSE(none.model.has_value());
}

TEST(SweepCsv, HeaderAndInfinity) {
  SweepReport rep;
  SweepRecord a;
  a.gamma = 0.5;
  a.feasible = false;
  a.a_norm = 1.25;
  a.ell_delta = 0.5;
  a.val_rmse = INFINITY;
  rep.records.push_back(a);
  std::ostringstream out;
  io::write_sweep_csv(out, rep);
  EXPECT_EQ(out.str(),
            "gamma,feasible,a_norm,ell_delta,theta_error,val_rmse,train_rmse\n"
            "0.5,0,1.25,0.5,,inf,\n");
}

TEST(SweepJson, ReportShape) {
  const Scenario s = builtin_scenario("experiment1");
  const GeneratedData g = generate_scenario(s, 1);
  SweepConfig c;
  c.n_gamma = 4;
  const SweepReport rep = run_sweep(g.dataset, g.theta_true, s.kernel, s.system.linear, c);
  const json j = io::to_json(rep, json{{"scenario", "experiment1"}, {"n_gamma", 99}});
  EXPECT_EQ(j["config"]["scenario"], "experiment1");
  EXPECT_EQ(j["config"]["n_gamma"], 4);  // the report's own config wins
  EXPECT_EQ(j["records"].size(), 4u);
  EXPECT_EQ(j["feasible_set"].size(), rep.feasible_set.size());
  EXPECT_TRUE(j["kernel_check"]["holds"].get<bool>());
  EXPECT_FALSE(j["selected_model"].is_null());
}
