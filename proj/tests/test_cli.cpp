// Copyright 2026 The sl3obs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sl3obs/app/commands.hpp"
#include "support.hpp"

namespace sl3obs::app {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sl3obs");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sl3obs_cli_" + std::to_string(::getpid()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
  std::vector<double> v;
  const std::size_t c = t.column(name);
  for (const auto& row : t.rows) v.push_back(row[c]);
  return v;
}

void write_file(const std::string& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// ---------------------------------------------------------------------------
// Config parsing

TEST(Config, ParsesKeyValueText) {
  const KeyValues kv = parse_config_text("# comment\n\n  k_delta = 0.3  # trailing\nscenario=sim2\n");
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("k-delta"), "0.3");
  EXPECT_EQ(kv.at("scenario"), "sim2");
}

TEST(Config, RejectsUnknownKeysAndMalformedLines) {
  EXPECT_THROW(parse_config_text("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("k-delta 0.1\n"), ConfigError);
}

TEST(Config, CommandLineWinsOverFile) {
  const KeyValues file = parse_config_text("k-delta = 0.3\ndt = 0.01\n");
  const KeyValues merged = merge(file, {{"k-delta", "0.2"}});
  EXPECT_EQ(merged.at("k-delta"), "0.2");
  EXPECT_EQ(merged.at("dt"), "0.01");
  const RunConfig cfg = resolve_config(Command::Simulate, merged);
  EXPECT_EQ(cfg.sim.gains.k_delta, 0.2);
  EXPECT_EQ(cfg.sim.motion.dt, 0.01);
}

TEST(Config, Fnv1aVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, HashIgnoresTheOutputDirectory) {
  const std::string a = config_hash({{"k-delta", "0.1"}, {"output", "x"}});
  const std::string b = config_hash({{"k-delta", "0.1"}, {"output", "y"}});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_NE(a, config_hash({{"k-delta", "0.2"}}));
}

TEST(Config, ScenarioDefaults) {
  const RunConfig s1 = resolve_config(Command::Simulate, {});
  EXPECT_EQ(s1.sim.observer, ObserverMode::KnownVelocity);
  EXPECT_EQ(s1.sim.gains.k_delta, 0.1);
  EXPECT_EQ(s1.sim.motion.dt, 0.02);
  EXPECT_EQ(s1.sim.motion.duration, 3.0);
  EXPECT_EQ(s1.image_path, test::bundled_image_path());
  const RunConfig s2 = resolve_config(Command::Simulate, {{"scenario", "sim2"}});
  EXPECT_EQ(s2.sim.observer, ObserverMode::PartialVelocity);
  EXPECT_EQ(s2.sim.gains.k_gamma, 2.0);
}

TEST(Config, Validation) {
  EXPECT_THROW(resolve_config(Command::Simulate, {{"k-gamma", "0"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"k-delta", "-1"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"dt", "0"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"T", "0.01"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"scenario", "sim3"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"observer", "partial"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"region", "0,0,10"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"dt", "fast"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Estimate, {}), ConfigError);
  EXPECT_NO_THROW(resolve_config(Command::Simulate, {{"k-delta", "0"}}));
}

TEST(Config, CustomScenario) {
  const RunConfig c = resolve_config(Command::Simulate, {{"scenario", "custom"},
                                                         {"observer", "gamma1"},
                                                         {"motion", "gyro-gamma1"},
                                                         {"omega", "0 0 0.2"},
                                                         {"velocity", "-0.1,0.1,0"},
                                                         {"h-hat0", "1 0 0 0 1 0 0 0 1"}});
  EXPECT_EQ(c.sim.observer, ObserverMode::Gamma1);
  EXPECT_EQ(c.sim.motion.mode, MotionMode::GyroPlusGamma1);
  EXPECT_EQ(c.sim.motion.omega, Vector3(0, 0, 0.2));
  EXPECT_EQ(c.sim.motion.u.matrix()(0, 2), -0.1);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"scenario", "custom"}, {"u", "1 0 0 0 0 0 0 0 0"}}), ConfigError);
  EXPECT_THROW(resolve_config(Command::Simulate, {{"scenario", "custom"}, {"eta", "0 0 2"}}), ConfigError);
}

TEST(Config, RegionAndIntrinsics) {
  const RunConfig c = resolve_config(Command::Simulate, {{"region", "10,20,30,40"}, {"fu", "100"}});
  const CameraIntrinsics k = c.intrinsics_for(256, 254);
  EXPECT_EQ(k.fu, 100.0);
  EXPECT_EQ(k.fv, 256.0 / 3.0);
  const PixelRect r = c.region_for(k);
  EXPECT_EQ(r.u, 10);
  EXPECT_EQ(r.height, 40);
  const RunConfig bad = resolve_config(Command::Simulate, {{"region", "250,0,10,10"}});
  EXPECT_THROW(bad.region_for(k), ConfigError);
  const RunConfig sized = resolve_config(Command::Simulate, {{"width", "256"}, {"height", "100"}});
  EXPECT_THROW(sized.intrinsics_for(256, 254), ConfigError);
}

TEST(Config, DeterministicModeFixesTheSeed) {
  const RunConfig d = resolve_config(Command::Simulate, {{"deterministic", "true"}, {"noise-std", "0.01"}});
  EXPECT_EQ(d.sim.seed, 0u);
  EXPECT_EQ(d.sim.exec.threads, 1u);
  const RunConfig s = resolve_config(Command::Simulate, {{"seed", "42"}, {"noise-std", "0.01"}});
  EXPECT_EQ(s.sim.seed, 42u);
  const RunConfig r = resolve_config(Command::Simulate, {{"noise-std", "0.01"}});
  EXPECT_TRUE(r.seed.has_value());
}

// ---------------------------------------------------------------------------
// Reports

TEST_F(CliTest, CsvRoundTrip) {
  CsvTable t;
  t.comments = {"hello"};
  t.columns = {"a", "b"};
  t.rows = {{0.1, std::nan("")}, {1e-300, -2.5}};
  write_csv(path("t.csv"), t);
  EXPECT_EQ(slurp(path("t.csv")).rfind("# hello\na,b\n", 0), 0u);
  const CsvTable back = read_csv(path("t.csv"));
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows[0][0], 0.1);
  EXPECT_TRUE(std::isnan(back.rows[0][1]));
  EXPECT_EQ(back.rows[1][0], 1e-300);
  EXPECT_THROW(read_csv(path("missing.csv")), IoError);
}

TEST(Report, LogPlotIsWellFormed) {
  const std::string svg = render_log_plot({{"p", {{"s", "#000000", {0, 1, 2}, {1.0, 0.1, 0.0}}}}});
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(svg, render_log_plot({{"p", {{"s", "#000000", {0, 1, 2}, {1.0, 0.1, 0.0}}}}}));
}

// ---------------------------------------------------------------------------
// simulate

TEST_F(CliTest, SimulateSim1WritesTheFullSeries) {
  const CliRun r = cli({"simulate", "--scenario", "sim1", "--deterministic", "--output", path("out")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable m = read_csv(path("out/metrics.csv"));
  EXPECT_EQ(m.columns, (std::vector<std::string>{"t", "eps_H", "eps_I", "eps_Gamma", "delta_norm"}));
  ASSERT_EQ(m.rows.size(), 151u);
  EXPECT_EQ(m.rows.back()[0], 3.0);
  const auto eps_h = column(m, "eps_H");
  EXPECT_LE(eps_h.back(), 0.01 * eps_h.front());
  EXPECT_TRUE(std::isnan(m.rows[0][3]));

  const std::string text = slurp(path("out/metrics.csv"));
  EXPECT_EQ(text.rfind(std::string("# sl3obs ") + SL3OBS_VERSION + " simulate\n", 0), 0u);
  for (const char* needle : {"# config-hash ", "# intrinsics fu=", "# gains k_delta=0.1", "# dt 0.02 T 3\n",
                             "\nt,eps_H,eps_I,eps_Gamma,delta_norm\n"})
    EXPECT_NE(text.find(needle), std::string::npos) << needle;
  EXPECT_EQ(read_csv(path("out/states.csv")).rows.size(), 151u);
  EXPECT_EQ(read_csv(path("out/velocity.csv")).rows.size(), 151u);
  EXPECT_NE(slurp(path("out/plot_eps.svg")).find("<polyline"), std::string::npos);
  EXPECT_NE(r.out.find("151 steps"), std::string::npos);
}

TEST_F(CliTest, SimulateWithoutCorrectionIsFlat) {
  const CliRun r = cli({"simulate", "--scenario", "sim1", "--k-delta", "0", "--deterministic", "--output", path("out")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto eps_h = column(read_csv(path("out/metrics.csv")), "eps_H");
  for (double e : eps_h) EXPECT_NEAR(e, eps_h.front(), 1e-12);
}

TEST_F(CliTest, SimulateSim2ReportsGamma) {
  const CliRun r = cli({"simulate", "--scenario", "sim2", "--deterministic", "--output", path("out")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto g = column(read_csv(path("out/metrics.csv")), "eps_Gamma");
  ASSERT_EQ(g.size(), 151u);
  EXPECT_NEAR(g.front(), 0.02, 1e-15);
  EXPECT_LT(g.back(), 0.05 * g.front());
  EXPECT_LT(g[100], g[50]);
  EXPECT_NE(slurp(path("out/plot_eps.svg")).find("eps_Gamma"), std::string::npos);
}

TEST_F(CliTest, ConfigFileAndOverride) {
  write_file(path("run.cfg"), "scenario = sim1\nT = 0.1\nk_delta = 0.3\n");
  const CliRun r = cli({"simulate", "-c", path("run.cfg"), "--k-delta", "0.2", "--output", path("out")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(path("out/metrics.csv"));
  EXPECT_NE(text.find("# gains k_delta=0.20000000000000001"), std::string::npos);
  EXPECT_EQ(read_csv(path("out/metrics.csv")).rows.size(), 6u);
}

TEST_F(CliTest, DeterministicRunsAreByteIdentical) {
  for (const char* d : {"a", "b"}) {
    const CliRun r = cli({"simulate", "--scenario", "sim2", "--T", "0.5", "--deterministic", "--output", path(d)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"metrics.csv", "states.csv", "velocity.csv", "plot_eps.svg"}) {
    EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
  }
}

TEST_F(CliTest, DumpFramesWritesQuadruples) {
  const CliRun r = cli({"simulate", "--T", "0.04", "--deterministic", "--dump-frames", "--output", path("out")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"frame", "mask", "warped", "diff"})
    for (int i = 0; i < 3; ++i) {
      const std::string p = numbered(path("out/") + f + "_%04d.pgm", i);
      ASSERT_TRUE(fs::exists(p)) << p;
      const GrayImage g = read_image(p);
      EXPECT_EQ(g.width, 256);
      EXPECT_EQ(g.height, 254);
    }
}

TEST_F(CliTest, DivergenceExitsWithThree) {
  const CliRun r = cli({"simulate", "--scenario", "custom", "--velocity", "3,0,0", "--h0", "1 0 0 0 1 0 0 0 1", "--T", "2",
                     "--deterministic", "--output", path("out")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("diverged at step "), std::string::npos) << r.err;
  EXPECT_NE(slurp(path("out/metrics.csv")).find("# diverged at step"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cli({"simulate", "--bogus", "1"}).code, 2);
  EXPECT_EQ(cli({"launch"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"simulate", "--k-gamma", "0", "--output", path("o")}).code, 2);
  EXPECT_EQ(cli({"simulate", "--width", "100", "--output", path("o")}).code, 2);
  EXPECT_EQ(cli({"simulate", "-c", path("missing.cfg")}).code, 4);
  write_file(path("bad.cfg"), "nonsense\n");
  EXPECT_EQ(cli({"simulate", "-c", path("bad.cfg")}).code, 2);
  const CliRun io = cli({"simulate", "--image", path("missing.pgm"), "--output", path("o")});
  EXPECT_EQ(io.code, 4);
  EXPECT_NE(io.err.find("missing.pgm"), std::string::npos);
  const CliRun v = cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(SL3OBS_VERSION), std::string::npos);
}

// ---------------------------------------------------------------------------
// estimate

TEST_F(CliTest, EstimateReproducesTheSimulatedEstimate) {
  ASSERT_EQ(cli({"simulate", "--T", "0.3", "--deterministic", "--dump-frames", "--output", path("out")}).code, 0);
  const CliRun r = cli({"estimate", "--deterministic", "--output", path("out")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable est = read_csv(path("out/estimate.csv"));
  const CsvTable states = read_csv(path("out/states.csv"));
  ASSERT_EQ(est.rows.size(), 16u);
  ASSERT_EQ(states.rows.size(), 16u);
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) {
      const std::string ij = std::to_string(i) + std::to_string(j);
      EXPECT_EQ(column(est, "h" + ij), column(states, "hhat" + ij)) << ij;
    }
  const CsvTable metrics = read_csv(path("out/metrics.csv"));
  EXPECT_EQ(column(est, "delta_norm"), column(metrics, "delta_norm"));
  EXPECT_EQ(column(est, "eps_I"), column(metrics, "eps_I"));
}

TEST_F(CliTest, EstimateOnARepeatedFrameStaysAtIdentity) {
  for (int i = 0; i < 5; ++i) fs::copy_file(test::bundled_image_path(), numbered(path("frame_%04d.pgm"), i));
  std::string vel = "t,u11,u12,u13,u21,u22,u23,u31,u32,u33,omega_x,omega_y,omega_z\n";
  for (int i = 0; i < 5; ++i) vel += std::to_string(0.02 * i) + ",0,0,0,0,0,0,0,0,0,0,0,0\n";
  write_file(path("vel.csv"), vel);
  const CliRun r = cli({"estimate", "--frames", path("frame_%04d.pgm"), "--velocity-file", path("vel.csv"), "--output",
                     path("est")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable est = read_csv(path("est/estimate.csv"));
  ASSERT_EQ(est.rows.size(), 5u);
  for (const auto& row : est.rows) {
    for (int i = 0; i < 9; ++i) EXPECT_EQ(row[1 + i], i % 4 == 0 ? 1.0 : 0.0);
    EXPECT_EQ(row[11], 0.0);
  }
}

TEST_F(CliTest, EstimateRejectsMismatchedVelocityRows) {
  for (int i = 0; i < 3; ++i) fs::copy_file(test::bundled_image_path(), numbered(path("frame_%04d.pgm"), i));
  write_file(path("vel.csv"), "t,u11,u12,u13,u21,u22,u23,u31,u32,u33\n0,0,0,0,0,0,0,0,0,0\n0.02,0,0,0,0,0,0,0,0,0\n");
  const CliRun r = cli({"estimate", "--frames", path("frame_%04d.pgm"), "--velocity-file", path("vel.csv"), "--output",
                     path("est")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("3 frames but 2 velocity rows"), std::string::npos) << r.err;
}

TEST_F(CliTest, EstimateNeedsTwoFrames) {
  fs::copy_file(test::bundled_image_path(), path("frame_0000.pgm"));
  write_file(path("vel.csv"), "t\n0\n");
  EXPECT_EQ(cli({"estimate", "--frames", path("frame_%04d.pgm"), "--velocity-file", path("vel.csv")}).code, 2);
}

TEST_F(CliTest, EstimatePartialVelocityReducesTheIntensityError) {
  ASSERT_EQ(cli({"simulate", "--scenario", "sim2", "--T", "1", "--deterministic", "--dump-frames", "--output",
                 path("out")})
                .code,
            0);
  const CliRun r = cli({"estimate", "--scenario", "sim2", "--deterministic", "--output", path("out")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto eps_i = column(read_csv(path("out/estimate.csv")), "eps_I");
  ASSERT_EQ(eps_i.size(), 51u);
  EXPECT_LT(eps_i.back(), 0.5 * eps_i.front());
  EXPECT_LT(eps_i[50], eps_i[25]);
}

// ---------------------------------------------------------------------------
// check-excitation

TEST_F(CliTest, CheckExcitationConstantImageFails) {
  write_pgm(path("flat.pgm"), GrayImage(64, 48, 0.5));
  const CliRun r = cli({"check-excitation", "--image", path("flat.pgm")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\nFAIL\n"), std::string::npos) << r.out;
  for (int i = 1; i <= 8; ++i) EXPECT_NE(r.out.find("lambda" + std::to_string(i) + " 0\n"), std::string::npos);
}

TEST_F(CliTest, CheckExcitationBundledImagePasses) {
  const CliRun r = cli({"check-excitation"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("samples 65024 of 65024\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\nPASS\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, CheckExcitationStripesFail) {
  GrayImage g(64, 48);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) g.at(c, r) = (r / 4) % 2 ? 0.8 : 0.2;
  write_pgm(path("stripes.pgm"), g);
  const CliRun r = cli({"check-excitation", "--image", path("stripes.pgm")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\nFAIL\n"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace sl3obs::app
