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

// Run configuration for the command-line tool: a flat `key = value` file
// plus `--key value` overrides, resolved into a RunConfig.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sl3obs/camera.hpp"
#include "sl3obs/errors.hpp"
#include "sl3obs/image.hpp"
#include "sl3obs/lie.hpp"
#include "sl3obs/observer.hpp"
#include "sl3obs/parallel.hpp"
#include "sl3obs/sim.hpp"

#ifndef SL3OBS_VERSION
#define SL3OBS_VERSION "0.0.0"
#endif

namespace sl3obs::app {

using KeyValues = std::map<std::string, std::string>;

struct KeySpec {
  const char* name;
  const char* help;
  bool flag;
};

// clang-format off
inline constexpr KeySpec kKeys[] = {
    {"image", "reference image (PGM P5 or PNG)", false},
    {"output", "output directory", false},
    {"scenario", "sim1, sim2 or custom", false},
    {"fu", "focal length in pixels along u", false},
    {"fv", "focal length in pixels along v", false},
    {"u0", "principal point column", false},
    {"v0", "principal point row", false},
    {"width", "expected image width in pixels (checked)", false},
    {"height", "expected image height in pixels (checked)", false},
    {"region", "region of interest as u,v,width,height in pixels", false},
    {"quadrature", "sample weights: planar, unit or solid-angle", false},
    {"gradient", "pixel gradient: central or bilinear", false},
    {"smooth-gradient", "pre-smooth frames before differencing", true},
    {"measurement", "rasterized or exact (simulate only)", false},
    {"quantize", "round rendered frames to 8 bits (true/false)", false},
    {"k-delta", "correction gain", false},
    {"k-gamma", "velocity-estimate gain", false},
    {"dt", "time step in seconds", false},
    {"T", "duration in seconds", false},
    {"observer", "known, partial or gamma1 (custom scenario)", false},
    {"motion", "constant-u, gyro-gamma or gyro-gamma1 (custom scenario)", false},
    {"u", "group velocity, 9 values row-major (constant-u)", false},
    {"omega", "angular velocity, 3 values", false},
    {"velocity", "linear velocity over plane distance, 3 values", false},
    {"eta", "plane normal, 3 values", false},
    {"h0", "initial true homography, 9 values row-major", false},
    {"h-hat0", "initial estimate, 9 values row-major", false},
    {"gamma0", "initial velocity estimate, 9 values row-major", false},
    {"noise-std", "std-dev of Gaussian noise on the measured velocity", false},
    {"seed", "noise RNG seed", false},
    {"deterministic", "single-threaded run with a fixed seed", true},
    {"dump-frames", "write frame, mask, warped and diff PGMs", true},
    {"frames", "frame path pattern, printf style (estimate)", false},
    {"masks", "mask path pattern, printf style (estimate)", false},
    {"velocity-file", "velocity CSV written by simulate (estimate)", false},
    {"threshold", "relative min-eigenvalue threshold (check-excitation)", false},
};
// clang-format on

inline const KeySpec* find_key(std::string_view name) {
  for (const KeySpec& k : kKeys)
    if (name == k.name) return &k;
  return nullptr;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Underscores and dashes are interchangeable in key names.
inline std::string normalize_key(std::string_view key) {
  std::string out = trim(key);
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
inline KeyValues parse_config_text(std::string_view text, const std::string& origin = "config") {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = normalize_key(line.substr(0, eq));
    if (!find_key(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

inline KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Entries of `overrides` replace those of `base`.
inline KeyValues merge(KeyValues base, const KeyValues& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
  return base;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the sorted effective settings, excluding the output location.
inline std::string config_hash(const KeyValues& kv) {
  std::string canon;
  for (const auto& [k, v] : kv) {
    if (k == "output") continue;
    canon += k + "=" + v + "\n";
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

// ---------------------------------------------------------------------------
// Value parsing

inline double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (trim(s.substr(pos)).empty() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + s + "'");
}

inline long long parse_int(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (trim(s.substr(pos)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + s + "'");
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  std::string v = trim(s);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

/// Comma- and/or whitespace-separated numbers; exactly `n` of them.
inline std::vector<double> parse_list(const std::string& key, const std::string& s, std::size_t n) {
  std::string t = s;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream in(t);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(key, tok));
  if (out.size() != n) throw ConfigError(key + ": expected " + std::to_string(n) + " values, got " + std::to_string(out.size()));
  return out;
}

inline Matrix3 parse_matrix(const std::string& key, const std::string& s) {
  const auto v = parse_list(key, s, 9);
  Matrix3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = v[i];
  return m;
}

inline Vector3 parse_vector(const std::string& key, const std::string& s) {
  const auto v = parse_list(key, s, 3);
  return {v[0], v[1], v[2]};
}

// ---------------------------------------------------------------------------
// Resolved configuration

enum class Command { Simulate, Estimate, CheckExcitation };

inline const char* command_name(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Estimate: return "estimate";
    case Command::CheckExcitation: return "check-excitation";
  }
  return "?";
}

inline const char* observer_name(ObserverMode m) {
  switch (m) {
    case ObserverMode::KnownVelocity: return "known";
    case ObserverMode::PartialVelocity: return "partial";
    case ObserverMode::Gamma1: return "gamma1";
  }
  return "?";
}

struct RunConfig {
  Command command = Command::Simulate;
  KeyValues settings;  // effective key-values after merging
  std::string image_path;
  std::optional<double> fu, fv, u0, v0;
  std::optional<int> width, height;
  std::optional<PixelRect> region;
  std::string scenario = "sim1";
  std::string output_dir = "sl3obs-out";
  bool dump_frames = false;
  bool deterministic = false;
  std::optional<std::uint64_t> seed;

  /// Simulation settings; intrinsics and region are filled in once the
  /// reference image size is known.
  SimulationConfig sim;
  double threshold = 1e-8;

  std::string frames_pattern;
  std::string masks_pattern;
  std::string velocity_path;

  /// Pinhole model for an image of the given size, with overrides applied.
  CameraIntrinsics intrinsics_for(int w, int h) const {
    if ((width && *width != w) || (height && *height != h))
      throw ConfigError("image is " + std::to_string(w) + "x" + std::to_string(h) + ", config expects " +
                        (width ? std::to_string(*width) : std::string("*")) + "x" +
                        (height ? std::to_string(*height) : std::string("*")));
    CameraIntrinsics k = CameraIntrinsics::default_for(w, h);
    if (fu) k.fu = *fu;
    if (fv) k.fv = *fv;
    if (u0) k.u0 = *u0;
    if (v0) k.v0 = *v0;
    try {
      k.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("intrinsics: ") + e.what());
    }
    return k;
  }

  PixelRect region_for(const CameraIntrinsics& k) const {
    if (!region) return PixelRect::full(k);
    const PixelRect& r = *region;
    if (r.width <= 0 || r.height <= 0) throw ConfigError("region: width and height must be positive");
    if (r.u < 0 || r.v < 0 || r.u + r.width > k.width || r.v + r.height > k.height)
      throw ConfigError("region: rectangle leaves the image");
    return r;
  }

  Execution execution() const { return deterministic ? Execution{1} : Execution::from_environment(); }
};

/// Location of the image bundled with the sources, if the build recorded one.
inline std::string bundled_image_path() {
#ifdef SL3OBS_BUNDLED_IMAGE
  return SL3OBS_BUNDLED_IMAGE;
#else
  return {};
#endif
}

inline RunConfig resolve_config(Command command, const KeyValues& kv) {
  RunConfig cfg;
  cfg.command = command;
  cfg.settings = kv;
  auto get = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto num = [&](const char* key) -> std::optional<double> {
    if (auto s = get(key)) return parse_double(key, *s);
    return std::nullopt;
  };
  auto flag = [&](const char* key) { return get(key) ? parse_bool(key, *get(key)) : false; };

  if (auto s = get("scenario")) cfg.scenario = *s;
  if (cfg.scenario != "sim1" && cfg.scenario != "sim2" && cfg.scenario != "custom")
    throw ConfigError("scenario: expected sim1, sim2 or custom, got '" + cfg.scenario + "'");

  cfg.image_path = get("image").value_or(bundled_image_path());
  if (cfg.image_path.empty()) throw ConfigError("image: no reference image given");
  if (auto s = get("output")) cfg.output_dir = *s;
  cfg.fu = num("fu");
  cfg.fv = num("fv");
  cfg.u0 = num("u0");
  cfg.v0 = num("v0");
  for (auto [key, dst] : {std::pair{"width", &cfg.width}, std::pair{"height", &cfg.height}}) {
    if (auto s = get(key)) {
      const long long v = parse_int(key, *s);
      if (v < 2) throw ConfigError(std::string(key) + ": must be at least 2");
      *dst = static_cast<int>(v);
    }
  }
  if (auto s = get("region")) {
    const auto r = parse_list("region", *s, 4);
    for (double x : r)
      if (x != std::floor(x)) throw ConfigError("region: pixel coordinates must be integers");
    cfg.region = PixelRect{static_cast<int>(r[0]), static_cast<int>(r[1]), static_cast<int>(r[2]), static_cast<int>(r[3])};
  }
  cfg.dump_frames = flag("dump-frames");
  cfg.deterministic = flag("deterministic");
  if (auto s = get("seed")) {
    const long long v = parse_int("seed", *s);
    if (v < 0) throw ConfigError("seed: must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(v);
  }

  // Scenario defaults, then overrides.
  SimulationConfig& sim = cfg.sim;
  sim.motion = SimulationConfig::reference_motion();
  sim.gains = {0.1, 2.0};
  sim.observer = cfg.scenario == "sim2" ? ObserverMode::PartialVelocity : ObserverMode::KnownVelocity;

  static constexpr const char* kCustomOnly[] = {"observer", "motion", "u", "omega", "velocity", "eta", "h0", "h-hat0", "gamma0"};
  for (const char* key : kCustomOnly)
    if (get(key) && cfg.scenario != "custom") throw ConfigError(std::string(key) + ": only valid with scenario custom");

  if (auto s = get("observer")) {
    if (*s == "known") sim.observer = ObserverMode::KnownVelocity;
    else if (*s == "partial") sim.observer = ObserverMode::PartialVelocity;
    else if (*s == "gamma1") sim.observer = ObserverMode::Gamma1;
    else throw ConfigError("observer: expected known, partial or gamma1, got '" + *s + "'");
  }
  try {
    if (auto s = get("motion")) {
      if (*s == "constant-u") sim.motion.mode = MotionMode::ConstantU;
      else if (*s == "gyro-gamma") sim.motion.mode = MotionMode::GyroPlusGamma;
      else if (*s == "gyro-gamma1") sim.motion.mode = MotionMode::GyroPlusGamma1;
      else throw ConfigError("motion: expected constant-u, gyro-gamma or gyro-gamma1, got '" + *s + "'");
    }
    if (auto s = get("omega")) sim.motion.omega = parse_vector("omega", *s);
    if (auto s = get("velocity")) sim.motion.velocity_over_d = parse_vector("velocity", *s);
    if (auto s = get("eta")) sim.motion.eta = parse_vector("eta", *s);
    if (auto s = get("u")) {
      sim.motion.u = SL3Tangent(parse_matrix("u", *s));
    } else if (get("omega") || get("velocity") || get("eta")) {
      sim.motion.u = build_group_velocity(sim.motion.omega, sim.motion.velocity_over_d, sim.motion.eta);
    }
    if (sim.motion.mode != MotionMode::ConstantU)
      (void)build_group_velocity(sim.motion.omega, sim.motion.velocity_over_d, sim.motion.eta);
    if (auto s = get("h0")) sim.motion.h0 = normalize_determinant(parse_matrix("h0", *s));
    if (auto s = get("h-hat0")) sim.h_hat0 = normalize_determinant(parse_matrix("h-hat0", *s));
    if (auto s = get("gamma0")) sim.gamma0 = parse_matrix("gamma0", *s);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  if (auto v = num("k-delta")) sim.gains.k_delta = *v;
  if (auto v = num("k-gamma")) sim.gains.k_gamma = *v;
  if (!(sim.gains.k_delta >= 0.0)) throw ConfigError("k-delta: must be non-negative");
  if (!(sim.gains.k_gamma > 0.0)) throw ConfigError("k-gamma: must be positive");
  if (auto v = num("dt")) sim.motion.dt = *v;
  if (auto v = num("T")) sim.motion.duration = *v;
  if (!(sim.motion.dt > 0.0)) throw ConfigError("dt: must be positive");
  if (!(sim.motion.duration >= sim.motion.dt)) throw ConfigError("T: must be at least dt");

  if (auto s = get("quadrature")) {
    if (*s == "planar") sim.quadrature = QuadratureRule::PlanarUniform;
    else if (*s == "unit") sim.quadrature = QuadratureRule::Unit;
    else if (*s == "solid-angle") sim.quadrature = QuadratureRule::SolidAngle;
    else throw ConfigError("quadrature: expected planar, unit or solid-angle, got '" + *s + "'");
  }
  if (auto s = get("gradient")) {
    if (*s == "central") sim.frame_options.gradient = GradientMode::CentralDifference;
    else if (*s == "bilinear") sim.frame_options.gradient = GradientMode::Bilinear;
    else throw ConfigError("gradient: expected central or bilinear, got '" + *s + "'");
  }
  sim.frame_options.smooth_gradient = flag("smooth-gradient");
  if (auto s = get("measurement")) {
    if (*s == "rasterized") sim.measurement = Measurement::Rasterized;
    else if (*s == "exact") sim.measurement = Measurement::Exact;
    else throw ConfigError("measurement: expected rasterized or exact, got '" + *s + "'");
  }
  if (auto s = get("quantize")) sim.quantize_frames = parse_bool("quantize", *s);
  if (auto v = num("noise-std")) {
    if (*v < 0.0) throw ConfigError("noise-std: must be non-negative");
    sim.noise_std = *v;
  }
  if (cfg.seed) {
    sim.seed = *cfg.seed;
  } else if (!cfg.deterministic && sim.noise_std > 0.0) {
    sim.seed = std::random_device{}();
    cfg.seed = sim.seed;
  }
  sim.exec = cfg.execution();

  if (auto v = num("threshold")) {
    if (!(*v >= 0.0)) throw ConfigError("threshold: must be non-negative");
    cfg.threshold = *v;
  }

  cfg.frames_pattern = get("frames").value_or(cfg.output_dir + "/frame_%04d.pgm");
  cfg.masks_pattern = get("masks").value_or("");
  cfg.velocity_path = get("velocity-file").value_or(cfg.output_dir + "/velocity.csv");
  if (command == Command::Estimate && !get("frames") && !get("output"))
    throw ConfigError("estimate: give --frames (or --output pointing at a simulate run)");
  return cfg;
}

}  // namespace sl3obs::app
