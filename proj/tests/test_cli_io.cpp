#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "ldr/ldr.hpp"

using namespace ldr;
using namespace ldr::io;

#ifndef LDR_SOURCE_DIR
#error "LDR_SOURCE_DIR must point at the source tree"
#endif

namespace {

const std::string kSource = LDR_SOURCE_DIR;

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ObservableSeries sample_series() {
  ObservableSeries s;
  for (int k = 0; k < 4; ++k) {
    ObservableRecord r;
    r.t = 0.05 * k;
    r.x_mean = -1.0 + 0.1 * k;
    r.y_mean = 1e-17 * k;
    r.pop_ad = {0.1 * k, 1 - 0.1 * k};
    r.pop_di = {0.2 * k, 1 - 0.2 * k};
    r.coherence = {1.0 / 3.0, -2.0 / 7.0};
    r.norm = 1.0 - 1e-12 * k;
    s.records.push_back(r);
  }
  return s;
}

}  // namespace

TEST(Config, ShippedDefaultProfileHasModelParameters) {
  const auto cfg = parse_config(kSource + "/configs/default.json");
  EXPECT_EQ(cfg.model.kappa, 1.0);
  EXPECT_EQ(cfg.model.lambda, 0.2);
  EXPECT_EQ(cfg.model.delta, 1.0);
  EXPECT_EQ(cfg.propagation.dt, 5e-3);
  EXPECT_EQ(cfg.propagation.t_final, 40.0);
  EXPECT_EQ(cfg.basis[0].count, 32);
  EXPECT_EQ(cfg.outputs.density_times, (std::vector<double>{0.0, 40.0}));
  EXPECT_EQ(cfg.gauge.kind, GaugeKind::RandomPhase);
}

TEST(Config, ErrorsNameTheKeyPath) {
  EXPECT_NE(config_error(R"({"propagation": {"dt": 0}})").find("propagation.dt"), std::string::npos);
  EXPECT_NE(config_error(R"({"model": {"lamda": 0.2}})").find("model.lamda"), std::string::npos);
  EXPECT_NE(config_error(R"({"extra": 1})").find("extra"), std::string::npos);
  EXPECT_NE(config_error(R"({"basis": {"x": {"count": 0}}})").find("basis.x.count"), std::string::npos);
  EXPECT_NE(config_error(R"({"gauge": {"mode": "random-phase"}})").find("gauge.seed"), std::string::npos);
  EXPECT_NE(config_error(R"({"gauge": {"mode": "sideways", "seed": 1}})").find("gauge.mode"), std::string::npos);
  EXPECT_NE(config_error(R"({"model": {"kappa": "one"}})").find("model.kappa"), std::string::npos);
  EXPECT_NE(config_error(R"({"reference": {"nx": 100}})").find("reference"), std::string::npos);
  EXPECT_NE(config_error(R"({"model": )").find("malformed"), std::string::npos);
  EXPECT_EQ(config_error(R"({"gauge": {"mode": "fixed-positive"}})"), "");
  EXPECT_THROW(parse_config(kSource + "/tests/data/does-not-exist.json"), ConfigError);
  EXPECT_THROW(parse_config(kSource + "/tests/data/bad_dt.json"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  auto cfg = parse_config(kSource + "/configs/default.json");
  cfg.wilson_loops.push_back({{1.0, 2.0}, 0.5, 17});
  const auto back = config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

TEST(Csv, ShortestRoundTripFormatting) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(parse_double(format_double(v), "test"), v);
  }
  EXPECT_EQ(format_double(0.25), "0.25");
  EXPECT_THROW(parse_double("1.0x", "where"), ConfigError);
}

TEST(Csv, ObservablesRoundTripAreByteStable) {
  const auto series = sample_series();
  std::ostringstream a, b;
  write_observables(a, series);
  write_observables(b, series);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
            "t,x_mean,y_mean,pop_ad_0,pop_ad_1,pop_di_0,pop_di_1,coh_re,coh_im,coh_abs,norm");
  std::istringstream in(a.str());
  const auto back = read_observables(in, "mem");
  std::ostringstream c;
  write_observables(c, back);
  EXPECT_EQ(c.str(), a.str());

  std::istringstream bad("t,x\n1,2\n");
  EXPECT_THROW(read_observables(bad, "bad"), ConfigError);
}

TEST(Compare, IdenticalSeriesPassWithZeroDeviation) {
  const auto s = sample_series();
  const auto report = compare_series(s, s, {});
  EXPECT_TRUE(report.pass());
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.max_abs, 0.0);
    EXPECT_EQ(row.rms, 0.0);
  }
}

TEST(Compare, DetectsDeviationAndMisalignment) {
  const auto s = sample_series();
  auto t = s;
  t.records[2].x_mean += 0.1;
  const auto report = compare_series(s, t, {});
  EXPECT_FALSE(report.pass());
  EXPECT_NEAR(report.at("x_mean").max_abs, 0.1, 1e-15);
  EXPECT_NEAR(report.at("x_mean").rms, 0.05, 1e-15);
  EXPECT_TRUE(report.at("pop_ad_0").pass);

  auto shifted = s;
  shifted.records[1].t += 1e-9;
  EXPECT_THROW(compare_series(s, shifted, {}), AlignmentError);
  shifted = s;
  shifted.records.pop_back();
  EXPECT_THROW(compare_series(s, shifted, {}), AlignmentError);
}

TEST(Experiment, NodalLineMetricOnSyntheticDensities) {
  std::vector<double> xs, ys;
  for (int i = 0; i < 41; ++i) xs.push_back(-4.0 + 0.2 * i);
  for (int j = 0; j < 41; ++j) ys.push_back(-4.0 + 0.2 * j);
  Eigen::MatrixXd node(41, 41), smooth(41, 41);
  for (int i = 0; i < 41; ++i)
    for (int j = 0; j < 41; ++j) {
      const double g = std::exp(-xs[i] * xs[i] / 2 - ys[j] * ys[j] / 2);
      node(i, j) = ys[j] * ys[j] * g;
      smooth(i, j) = g;
    }
  EXPECT_LT(nodal_line_metric(node, xs, ys, 0.5), 1e-12);
  EXPECT_NEAR(nodal_line_metric(smooth, xs, ys, 0.5), 1.0, 1e-15);
  // The window excludes x = 2.4 when it is centered at 0.5 with half-width 1.5.
  smooth(32, 20) = 10.0;
  EXPECT_NEAR(nodal_line_metric(smooth, xs, ys, 0.5), 0.1, 1e-15);
}

TEST(Experiment, TimeGridHelpers) {
  ExperimentConfig cfg;
  EXPECT_EQ(reference_record_every(cfg), 20u);
  cfg.reference.dt = 0.003;
  EXPECT_THROW(reference_record_every(cfg), ConfigError);
  EXPECT_EQ(snapshot_steps({0.0, 40.0}, 5e-3, 40.0, 10), (std::vector<std::size_t>{0, 8000}));
  EXPECT_THROW(snapshot_steps({0.0123}, 5e-3, 40.0, 10), ConfigError);
  EXPECT_THROW(snapshot_steps({50.0}, 5e-3, 40.0, 10), ConfigError);
}

TEST(Experiment, ProbeFallsBackToOriginWithoutIntersection) {
  EXPECT_EQ(probe_anchor(DiabaticModel{}), (std::array<double, 2>{0.5, 0.0}));
  EXPECT_EQ(probe_anchor(DiabaticModel{0.0, 0.0, 1.0}), (std::array<double, 2>{0.0, 0.0}));
}

TEST(Experiment, SmallRunIsDeterministicAndGaugeInvariant) {
  auto cfg = parse_config(kSource + "/tests/data/small.json");
  const auto a = run_ldr(cfg);
  const auto b = run_ldr(cfg);
  std::ostringstream sa, sb;
  write_observables(sa, a.series);
  write_observables(sb, b.series);
  EXPECT_EQ(sa.str(), sb.str());
  ASSERT_EQ(a.densities.size(), 2u);

  cfg.gauge.seed = 8;
  const auto c = run_ldr(cfg);
  for (std::size_t k = 0; k < a.series.records.size(); ++k) {
    EXPECT_NEAR(a.series.records[k].x_mean, c.series.records[k].x_mean, 1e-12);
    EXPECT_NEAR(a.series.records[k].pop_ad[1], c.series.records[k].pop_ad[1], 1e-12);
    EXPECT_NEAR(std::abs(a.series.records[k].coherence), std::abs(c.series.records[k].coherence), 1e-12);
  }
  EXPECT_LT((a.densities[1].rho - c.densities[1].rho).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Experiment, WilsonScanDefaults) {
  ExperimentConfig cfg;
  const auto rows = run_wilson(cfg);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[3].loop.points, 256u);
  EXPECT_LT(std::numbers::pi - std::abs(std::arg(rows[3].w)), 1e-6);
  EXPECT_LT(std::abs(std::arg(rows[5].w)), 1e-6);
}
