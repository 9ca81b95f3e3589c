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

/**
 * @file sim.hpp
 * @brief Ground-truth homography trajectories, frame rendering and the
 * closed-loop simulation harness.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "sl3obs/camera.hpp"
#include "sl3obs/image.hpp"
#include "sl3obs/lie.hpp"
#include "sl3obs/observer.hpp"
#include "sl3obs/parallel.hpp"

namespace sl3obs {

/// U = Omega_x + (V/d) eta^T - (eta^T V/d) / 3 I.
inline SL3Tangent build_group_velocity(const Vector3& omega, const Vector3& v_over_d, const Vector3& eta) {
  if (!(std::abs(eta.norm() - 1.0) <= 1e-9)) throw InvalidArgument("plane normal must be a unit vector");
  Matrix3 u = skew(omega) + v_over_d * eta.transpose();
  u.diagonal().array() -= eta.dot(v_over_d) / 3.0;
  return SL3Tangent(u);
}

enum class MotionMode {
  /// U held constant.
  ConstantU,
  /// Constant Omega and constant xi_dot / d (expressed in the reference frame).
  GyroPlusGamma,
  /// Constant Omega and constant V / d (expressed in the camera frame).
  GyroPlusGamma1,
};

struct MotionProfile {
  MotionMode mode = MotionMode::ConstantU;
  SL3Tangent u;
  Vector3 omega = Vector3::Zero();
  /// xi_dot / d for GyroPlusGamma, V / d for GyroPlusGamma1.
  Vector3 velocity_over_d = Vector3::Zero();
  /// Plane normal in the initial camera frame.
  Vector3 eta = Vector3::UnitZ();
  SL3Element h0;
  double dt = 0.02;
  double duration = 3.0;

  void validate() const {
    if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
    if (!(duration >= dt)) throw InvalidArgument("duration must cover at least one step");
  }

  /// Number of integration steps; the trajectory has steps() + 1 states.
  std::size_t steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }
};

struct TruthTrajectory {
  std::vector<double> times;
  std::vector<SL3Element> h;
  std::vector<SL3Tangent> u;
  std::vector<Vector3> omega;
  /// U - Omega_x, or the raw V eta^T / d for GyroPlusGamma1.
  std::vector<Matrix3> gamma;

  std::size_t size() const { return h.size(); }
};

/// H[k+1] = H[k] exp(dt U[k]) from H[0] = H0.
inline TruthTrajectory generate_truth(const MotionProfile& p) {
  p.validate();
  const std::size_t n = p.steps() + 1;
  TruthTrajectory out;
  out.times.reserve(n);
  out.h.reserve(n);
  out.u.reserve(n);
  out.omega.reserve(n);
  out.gamma.reserve(n);

  const SL3Tangent omega_x(skew(p.omega));
  const SL3Element rotation_step = exp_sl3(p.dt * omega_x);
  Matrix3 rotation = Matrix3::Identity();  // camera frame w.r.t. the reference frame
  SL3Element h = p.h0;
  const Vector3 eta_ref = p.eta.normalized();

  for (std::size_t k = 0; k < n; ++k) {
    SL3Tangent u;
    Matrix3 gamma;
    switch (p.mode) {
      case MotionMode::ConstantU:
        u = p.u;
        gamma = (p.u - omega_x).matrix();
        break;
      case MotionMode::GyroPlusGamma: {
        const Vector3 eta = rotation.transpose() * eta_ref;
        const Vector3 v = rotation.transpose() * p.velocity_over_d;
        u = build_group_velocity(p.omega, v, eta);
        gamma = (u - omega_x).matrix();
        break;
      }
      case MotionMode::GyroPlusGamma1: {
        const Vector3 eta = rotation.transpose() * eta_ref;
        u = build_group_velocity(p.omega, p.velocity_over_d, eta);
        gamma = p.velocity_over_d * eta.transpose();
        break;
      }
    }
    out.times.push_back(static_cast<double>(k) * p.dt);
    out.h.push_back(h);
    out.u.push_back(u);
    out.omega.push_back(p.omega);
    out.gamma.push_back(gamma);

    h = h * exp_sl3(p.dt * u);
    rotation = rotation * rotation_step.matrix();
  }
  return out;
}

/// Rasterizes Phi(H, I_ref) on the camera's pixel grid. Pixels whose ray
/// leaves the reference are masked out.
template <ImageMap Ref>
PixelImage render_frame(const Ref& ref, const SL3Element& h, const CameraIntrinsics& k, bool quantize = false,
                        PixelImageOptions opts = {}, Execution exec = {}) {
  return PixelImage(rasterize(warp_image(h, ref), k, quantize, exec), k, opts);
}

// ---------------------------------------------------------------------------
// Metrics

struct ErrorReport {
  double t = 0.0;
  /// |I - E|^2.
  double eps_h = 0.0;
  /// Mean squared intensity error over in-frame samples.
  double eps_i = 0.0;
  /// |Gamma - Gamma_hat|^2 when the observer estimates Gamma.
  std::optional<double> eps_gamma;
  double delta_norm = 0.0;
};

inline ErrorReport compute_metrics(double t, const SL3Element& h, const ObserverState& state, const Innovation& inn,
                                   const std::optional<Matrix3>& gamma_true = std::nullopt) {
  ErrorReport r;
  r.t = t;
  const SL3Element e = group_error(h, state.h_hat);
  r.eps_h = (Matrix3::Identity() - e.matrix()).squaredNorm();
  r.eps_i = inn.mean_sq_residual();
  if (gamma_true) r.eps_gamma = (*gamma_true - state.gamma).squaredNorm();
  r.delta_norm = inn.delta.norm();
  return r;
}

template <ImageMap Ref, ImageMap Cur>
ErrorReport compute_metrics(double t, const SL3Element& h, const ObserverState& state, const Ref& ref, const Cur& cur,
                            const RegionSamples& region, const std::optional<Matrix3>& gamma_true = std::nullopt) {
  return compute_metrics(t, h, state, compute_innovation(ref, cur, state.h_hat, region, state.gains.k_delta), gamma_true);
}

// ---------------------------------------------------------------------------
// Closed-loop simulation

/// How the observer sees the current image.
enum class Measurement {
  /// Phi(H, I_ref) rasterized on the pixel grid once per step.
  Rasterized,
  /// Phi(H, I_ref) evaluated lazily, with no resampling.
  Exact,
};

struct SimulationConfig {
  ObserverMode observer = ObserverMode::KnownVelocity;
  Gains gains;
  MotionProfile motion;
  SL3Element h_hat0;
  Matrix3 gamma0 = Matrix3::Zero();
  CameraIntrinsics intrinsics;
  PixelRect region;
  QuadratureRule quadrature = QuadratureRule::PlanarUniform;
  Measurement measurement = Measurement::Rasterized;
  /// Round rendered frames to 8-bit levels, as a camera would.
  bool quantize_frames = true;
  PixelImageOptions frame_options;
  /// Std-dev of zero-mean Gaussian noise added to the measured U (known
  /// velocity) or Omega (partial velocity).
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  Execution exec;

  /// Constant translation parallel to the plane: Omega = 0, xi_dot / d =
  /// (-0.1, 0.1, 0), eta = e3, over 3 s at dt = 0.02 from the fixed H(0).
  static MotionProfile reference_motion() {
    MotionProfile m;
    m.mode = MotionMode::ConstantU;
    m.u = build_group_velocity(Vector3::Zero(), Vector3(-0.1, 0.1, 0.0), Vector3::UnitZ());
    Matrix3 h0;
    // clang-format off
    h0 <<  1.0308, 0.0507,  0.0867,
          -0.0509, 1.0309, -0.1442,
           0.0,    0.0,     0.9388;
    // clang-format on
    m.h0 = normalize_determinant(h0);
    m.dt = 0.02;
    m.duration = 3.0;
    return m;
  }

  /// Known-velocity observer, k_Delta = 0.1.
  static SimulationConfig sim1(const CameraIntrinsics& k) {
    SimulationConfig c;
    c.observer = ObserverMode::KnownVelocity;
    c.gains = {0.1, 2.0};
    c.motion = reference_motion();
    c.intrinsics = k;
    c.region = PixelRect::full(k);
    return c;
  }

  /// Partial-velocity observer, k_Delta = 0.1, k_Gamma = 2, Omega = 0 measured.
  static SimulationConfig sim2(const CameraIntrinsics& k) {
    SimulationConfig c = sim1(k);
    c.observer = ObserverMode::PartialVelocity;
    return c;
  }
};

struct StepRecord {
  ErrorReport report;
  SL3Element h;
  SL3Element h_hat;
  Matrix3 gamma_hat = Matrix3::Zero();
  Matrix3 gamma_true = Matrix3::Zero();
  SL3Tangent u_true;
  Vector3 omega_true = Vector3::Zero();
  SL3Tangent delta;
  /// Photometric cost F at this step.
  double cost = 0.0;
  /// F + |Gamma - Gamma_hat|^2 / (2 k_Delta k_Gamma) for the velocity-estimating
  /// observers, F otherwise.
  double lyapunov = 0.0;
  std::size_t valid_samples = 0;
  /// Velocity handed to the observer for the step out of this state.
  VelocityMeasurement measured;
};

struct SimulationResult {
  std::vector<StepRecord> steps;
  TruthTrajectory truth;
};

/// Runs the observer against frames generated from `ref` along the truth
/// trajectory.
///
/// `on_step(k, frame, record)` is called once per step after the metrics are
/// taken and before the estimate is propagated; `frame` is the image map the
/// observer saw. Throws NoOverlap (carrying the step index) on divergence.
template <ImageMap Ref, typename OnStep>
SimulationResult run_simulation(const Ref& ref, const SimulationConfig& cfg, OnStep&& on_step) {
  cfg.gains.validate();
  cfg.intrinsics.validate();
  const RegionSamples region = build_region_samples(cfg.intrinsics, cfg.region, cfg.quadrature);

  SimulationResult result;
  result.truth = generate_truth(cfg.motion);
  const TruthTrajectory& truth = result.truth;

  HomographyObserver observer(cfg.observer, cfg.gains, cfg.h_hat0, cfg.gamma0);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_std > 0.0 ? cfg.noise_std : 1.0);
  const bool estimates_gamma = cfg.observer != ObserverMode::KnownVelocity;

  auto loop = [&](auto&& make_frame) {
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const auto frame = make_frame(truth.h[k]);
      Innovation inn;
      try {
        inn = compute_innovation(ref, frame, observer.state().h_hat, region, cfg.gains.k_delta, cfg.exec);
      } catch (const NoOverlap& e) {
        std::ostringstream os;
        os << "step " << k << " (t = " << truth.times[k] << " s): " << e.what();
        throw NoOverlap(os.str(), e.valid(), e.total(), k);
      }

      const ObserverState& st = observer.state();
      StepRecord rec;
      rec.report = compute_metrics(truth.times[k], truth.h[k], st, inn,
                                   estimates_gamma ? std::optional<Matrix3>(truth.gamma[k]) : std::nullopt);
      rec.h = truth.h[k];
      rec.h_hat = st.h_hat;
      rec.gamma_hat = st.gamma;
      rec.gamma_true = truth.gamma[k];
      rec.u_true = truth.u[k];
      rec.omega_true = truth.omega[k];
      rec.delta = inn.delta;
      rec.cost = inn.cost;
      rec.lyapunov = inn.cost;
      if (estimates_gamma && cfg.gains.k_delta > 0.0)
        rec.lyapunov += (truth.gamma[k] - st.gamma).squaredNorm() / (2.0 * cfg.gains.k_delta * cfg.gains.k_gamma);
      rec.valid_samples = inn.valid;
      rec.measured.u = truth.u[k];
      rec.measured.omega = truth.omega[k];
      if (cfg.noise_std > 0.0) {
        if (cfg.observer == ObserverMode::KnownVelocity) {
          Matrix3 n;
          for (int i = 0; i < 9; ++i) n(i / 3, i % 3) = cfg.noise_std * noise(rng);
          rec.measured.u = rec.measured.u + project_sl3(n);
        } else {
          for (int i = 0; i < 3; ++i) rec.measured.omega[i] += cfg.noise_std * noise(rng);
        }
      }
      on_step(k, frame, rec);
      result.steps.push_back(rec);

      if (k + 1 == truth.size()) break;
      observer.advance(rec.measured, inn.delta, cfg.motion.dt);
    }
  };

  if (cfg.measurement == Measurement::Rasterized) {
    loop([&](const SL3Element& h) {
      return render_frame(ref, h, cfg.intrinsics, cfg.quantize_frames, cfg.frame_options, cfg.exec);
    });
  } else {
    loop([&](const SL3Element& h) { return warp_image(h, ref); });
  }
  return result;
}

template <ImageMap Ref>
SimulationResult run_simulation(const Ref& ref, const SimulationConfig& cfg) {
  return run_simulation(ref, cfg, [](std::size_t, const auto&, const StepRecord&) {});
}

}  // namespace sl3obs
