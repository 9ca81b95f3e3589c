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

// The simulate, estimate and check-excitation commands, and the argument
// parser that dispatches to them.

#pragma once

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "sl3obs/app/config.hpp"
#include "sl3obs/app/report.hpp"
#include "sl3obs/image_io.hpp"
#include "sl3obs/observer.hpp"
#include "sl3obs/sim.hpp"

namespace sl3obs::app {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitDiverged = 3, kExitIo = 4 };

inline std::string numbered(const std::string& pattern, std::size_t i) {
  char buf[4096];
  const int n = std::snprintf(buf, sizeof(buf), pattern.c_str(), static_cast<int>(i));
  if (n < 0 || static_cast<std::size_t>(n) >= sizeof(buf)) throw ConfigError("bad path pattern '" + pattern + "'");
  return buf;
}

inline void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory (" + ec.message() + ")");
}

/// Comment lines shared by every CSV the tool writes.
inline std::vector<std::string> csv_preamble(const RunConfig& cfg, const CameraIntrinsics& k) {
  const SimulationConfig& s = cfg.sim;
  std::vector<std::string> c;
  c.push_back(std::string("sl3obs ") + SL3OBS_VERSION + " " + command_name(cfg.command));
  c.push_back("config-hash " + config_hash(cfg.settings));
  c.push_back("image " + std::filesystem::path(cfg.image_path).filename().string());
  c.push_back("intrinsics fu=" + fmt(k.fu) + " fv=" + fmt(k.fv) + " u0=" + fmt(k.u0) + " v0=" + fmt(k.v0) +
              " width=" + std::to_string(k.width) + " height=" + std::to_string(k.height));
  c.push_back("gains k_delta=" + fmt(s.gains.k_delta) + " k_gamma=" + fmt(s.gains.k_gamma));
  c.push_back("dt " + fmt(s.motion.dt) + " T " + fmt(s.motion.duration));
  c.push_back(std::string("scenario ") + cfg.scenario + " observer " + observer_name(s.observer) +
              (cfg.seed ? " seed " + std::to_string(*cfg.seed) : std::string()));
  return c;
}

struct LoadedReference {
  GrayImage grid;
  CameraIntrinsics k;
};

inline LoadedReference load_reference(const RunConfig& cfg) {
  LoadedReference r;
  r.grid = read_image(cfg.image_path);
  r.k = cfg.intrinsics_for(r.grid.width, r.grid.height);
  return r;
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const LoadedReference loaded = load_reference(cfg);
  const CameraIntrinsics& k = loaded.k;
  SimulationConfig sim = cfg.sim;
  sim.intrinsics = k;
  sim.region = cfg.region_for(k);
  const PixelImage ref(loaded.grid, k, sim.frame_options);
  ensure_directory(cfg.output_dir);
  const std::string dir = cfg.output_dir + "/";
  const bool with_gamma = sim.observer != ObserverMode::KnownVelocity;

  CsvTable metrics, states, velocity;
  metrics.comments = states.comments = velocity.comments = csv_preamble(cfg, k);
  metrics.columns = {"t", "eps_H", "eps_I", "eps_Gamma", "delta_norm"};
  states.columns = {"t"};
  for (const char* prefix : {"hhat", "gammahat", "h"})
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j) states.columns.push_back(prefix + std::to_string(i) + std::to_string(j));
  velocity.columns = {"t"};
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) velocity.columns.push_back("u" + std::to_string(i) + std::to_string(j));
  for (const char* c : {"omega_x", "omega_y", "omega_z"}) velocity.columns.push_back(c);

  auto on_step = [&](std::size_t step, const auto& frame, const StepRecord& rec) {
    const ErrorReport& r = rec.report;
    metrics.rows.push_back({r.t, r.eps_h, r.eps_i, r.eps_gamma.value_or(std::nan("")), r.delta_norm});
    std::vector<double> srow{r.t};
    for (const Matrix3* m : {&rec.h_hat.matrix(), &rec.gamma_hat, &rec.h.matrix()})
      for (int i = 0; i < 9; ++i) srow.push_back((*m)(i / 3, i % 3));
    states.rows.push_back(std::move(srow));
    std::vector<double> vrow{r.t};
    for (int i = 0; i < 9; ++i) vrow.push_back(rec.measured.u.matrix()(i / 3, i % 3));
    for (int i = 0; i < 3; ++i) vrow.push_back(rec.measured.omega[i]);
    velocity.rows.push_back(std::move(vrow));

    if (!cfg.dump_frames) return;
    const GrayImage shown = rasterize(frame, k, sim.quantize_frames, sim.exec);
    write_pgm(numbered(dir + "frame_%04d.pgm", step), shown);
    write_mask_pgm(numbered(dir + "mask_%04d.pgm", step), shown.has_mask() ? shown : GrayImage(k.width, k.height));
    const GrayImage warped = rasterize(warped_error_image(frame, rec.h_hat), k, false, sim.exec);
    write_pgm(numbered(dir + "warped_%04d.pgm", step), warped);
    GrayImage diff(k.width, k.height, 0.5);
    for (int row = 0; row < k.height; ++row)
      for (int col = 0; col < k.width; ++col)
        if (warped.is_valid(col, row)) diff.at(col, row) = 0.5 + 0.5 * (warped.at(col, row) - loaded.grid.at(col, row));
    write_pgm(numbered(dir + "diff_%04d.pgm", step), diff);
  };

  std::optional<NoOverlap> failure;
  try {
    run_simulation(ref, sim, on_step);
  } catch (const NoOverlap& e) {
    failure = e;
    metrics.comments.push_back("diverged at step " + std::to_string(e.step()));
  }

  write_csv(dir + "metrics.csv", metrics);
  write_csv(dir + "states.csv", states);
  write_csv(dir + "velocity.csv", velocity);

  std::vector<PlotPanel> panels;
  auto column = [&](std::size_t c) {
    std::vector<double> v;
    for (const auto& row : metrics.rows) v.push_back(row[c]);
    return v;
  };
  const std::vector<double> t = column(0);
  panels.push_back({"group error |I - H_hat H^-1|^2", {{"eps_H", "#1f77b4", t, column(1)}}});
  panels.push_back({"mean squared intensity error", {{"eps_I", "#d62728", t, column(2)}}});
  if (with_gamma) panels.push_back({"velocity error |Gamma - Gamma_hat|^2", {{"eps_Gamma", "#2ca02c", t, column(3)}}});
  panels.push_back({"correction norm |Delta|", {{"delta_norm", "#555555", t, column(4)}}});
  write_text(dir + "plot_eps.svg", render_log_plot(panels));

  if (failure) throw *failure;
  const auto& last = metrics.rows.back();
  out << "simulate: " << metrics.rows.size() << " steps, eps_H " << fmt(metrics.rows.front()[1]) << " -> "
      << fmt(last[1]) << ", eps_I " << fmt(metrics.rows.front()[2]) << " -> " << fmt(last[2]);
  if (with_gamma) out << ", eps_Gamma " << fmt(metrics.rows.front()[3]) << " -> " << fmt(last[3]);
  out << "\nwrote " << dir << "metrics.csv\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate

inline int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
  const LoadedReference loaded = load_reference(cfg);
  const CameraIntrinsics& k = loaded.k;
  const SimulationConfig& sim = cfg.sim;
  const PixelImage ref(loaded.grid, k, sim.frame_options);
  const RegionSamples region = build_region_samples(k, cfg.region_for(k), sim.quadrature);

  std::vector<std::string> frame_paths;
  for (std::size_t i = 0;; ++i) {
    const std::string p = numbered(cfg.frames_pattern, i);
    if (!std::filesystem::exists(p)) break;
    frame_paths.push_back(p);
  }
  if (frame_paths.size() < 2)
    throw ConfigError("estimate: need at least 2 frames matching '" + cfg.frames_pattern + "', found " +
                      std::to_string(frame_paths.size()));

  std::string masks = cfg.masks_pattern;
  if (masks.empty()) {
    const auto slash = cfg.frames_pattern.rfind('/');
    const auto pos = cfg.frames_pattern.rfind("frame_");
    if (pos != std::string::npos && (slash == std::string::npos || pos > slash))
      masks = cfg.frames_pattern.substr(0, pos) + "mask_" + cfg.frames_pattern.substr(pos + 6);
  }

  const CsvTable vel = read_csv(cfg.velocity_path);
  if (vel.rows.size() != frame_paths.size())
    throw ConfigError("estimate: " + std::to_string(frame_paths.size()) + " frames but " +
                      std::to_string(vel.rows.size()) + " velocity rows");
  const bool known = sim.observer == ObserverMode::KnownVelocity;
  std::vector<std::size_t> ucols, wcols;
  if (known) {
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j) ucols.push_back(vel.column("u" + std::to_string(i) + std::to_string(j)));
  } else {
    for (const char* c : {"omega_x", "omega_y", "omega_z"}) wcols.push_back(vel.column(c));
  }

  HomographyObserver observer(sim.observer, sim.gains, sim.h_hat0, sim.gamma0);
  CsvTable est;
  est.comments = csv_preamble(cfg, k);
  est.columns = {"t"};
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) est.columns.push_back("h" + std::to_string(i) + std::to_string(j));
  est.columns.push_back("delta_norm");
  est.columns.push_back("eps_I");

  for (std::size_t f = 0; f < frame_paths.size(); ++f) {
    GrayImage grid = read_image(frame_paths[f]);
    if (grid.width != k.width || grid.height != k.height)
      throw ConfigError(frame_paths[f] + ": frame size differs from the reference image");
    if (!masks.empty()) {
      const std::string mp = numbered(masks, f);
      if (std::filesystem::exists(mp)) attach_mask(grid, mp);
      else if (!cfg.masks_pattern.empty()) throw IoError(mp + ": mask not found");
    }
    const PixelImage frame(std::move(grid), k, sim.frame_options);
    const double t = static_cast<double>(f) * sim.motion.dt;
    Innovation inn;
    try {
      inn = compute_innovation(ref, frame, observer.state().h_hat, region, sim.gains.k_delta, sim.exec);
    } catch (const NoOverlap& e) {
      throw NoOverlap("frame " + std::to_string(f) + ": " + e.what(), e.valid(), e.total(), f);
    }
    std::vector<double> row{t};
    for (int i = 0; i < 9; ++i) row.push_back(observer.state().h_hat.matrix()(i / 3, i % 3));
    row.push_back(inn.delta.norm());
    row.push_back(inn.mean_sq_residual());
    est.rows.push_back(std::move(row));
    if (f + 1 == frame_paths.size()) break;

    VelocityMeasurement vm;
    const auto& vr = vel.rows[f];
    if (known) {
      Matrix3 u;
      for (int i = 0; i < 9; ++i) u(i / 3, i % 3) = vr[ucols[i]];
      try {
        vm.u = SL3Tangent(u);
      } catch (const NotTraceless&) {
        throw ConfigError(cfg.velocity_path + ": row " + std::to_string(f) + " is not traceless");
      }
    } else {
      vm.omega = Vector3(vr[wcols[0]], vr[wcols[1]], vr[wcols[2]]);
    }
    observer.advance(vm, inn.delta, sim.motion.dt);
  }

  ensure_directory(cfg.output_dir);
  const std::string path = cfg.output_dir + "/estimate.csv";
  write_csv(path, est);
  out << "estimate: " << est.rows.size() << " frames, eps_I " << fmt(est.rows.front().back()) << " -> "
      << fmt(est.rows.back().back()) << "\nwrote " << path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// check-excitation

inline int cmd_check_excitation(const RunConfig& cfg, std::ostream& out) {
  const LoadedReference loaded = load_reference(cfg);
  const PixelImage ref(loaded.grid, loaded.k, cfg.sim.frame_options);
  const RegionSamples region = build_region_samples(loaded.k, cfg.region_for(loaded.k), cfg.sim.quadrature);
  const ExcitationReport rep = excitation_check(ref, region, cfg.sim.exec);
  const bool pass = rep.max_eigenvalue > 0.0 && rep.min_eigenvalue > cfg.threshold * rep.max_eigenvalue;
  out << "samples " << rep.valid << " of " << region.size() << "\n";
  for (int i = 0; i < 8; ++i) out << "lambda" << i + 1 << " " << fmt(rep.eigenvalues[i]) << "\n";
  out << "min/max " << fmt(rep.max_eigenvalue > 0.0 ? rep.min_eigenvalue / rep.max_eigenvalue : 0.0) << "\n";
  out << (pass ? "PASS" : "FAIL") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

inline int dispatch(Command command, const KeyValues& kv, std::ostream& out) {
  const RunConfig cfg = resolve_config(command, kv);
  switch (command) {
    case Command::Simulate: return cmd_simulate(cfg, out);
    case Command::Estimate: return cmd_estimate(cfg, out);
    case Command::CheckExcitation: return cmd_check_excitation(cfg, out);
  }
  return kExitConfig;
}

/// Entry point of the tool. Returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Direct homography observer on SL(3): simulation and estimation"};
  app.set_version_flag("--version", SL3OBS_VERSION);
  app.require_subcommand(1);

  struct Sub {
    Command command;
    CLI::App* app;
    std::string config;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
  };
  std::vector<Sub> subs;
  subs.reserve(3);
  for (auto [command, help] : {std::pair{Command::Simulate, "run a closed-loop simulation on a reference image"},
                               std::pair{Command::Estimate, "run the observer on recorded frames"},
                               std::pair{Command::CheckExcitation, "report the excitation Gram spectrum of an image"}}) {
    subs.push_back({command, app.add_subcommand(command_name(command), help), {}, {}, {}});
  }
  for (Sub& s : subs) {
    s.app->add_option("-c,--config", s.config, "key = value config file");
    for (const KeySpec& key : kKeys) {
      if (key.flag) s.app->add_flag(std::string("--") + key.name, s.flags[key.name], key.help);
      else s.app->add_option(std::string("--") + key.name, s.values[key.name], key.help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (Sub& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      KeyValues kv;
      if (!s.config.empty()) kv = read_config_file(s.config);
      KeyValues cli;
      for (const KeySpec& key : kKeys) {
        if (s.app->count(std::string("--") + key.name) == 0) continue;
        cli[key.name] = key.flag ? (s.flags[key.name] ? "true" : "false") : s.values[key.name];
      }
      return dispatch(s.command, merge(kv, cli), out);
    } catch (const NoOverlap& e) {
      err << "error: diverged at step " << e.step() << ": " << e.what() << "\n";
      return kExitDiverged;
    } catch (const IoError& e) {
      err << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  return kExitConfig;
}

}  // namespace sl3obs::app
