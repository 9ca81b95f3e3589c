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
 * @file observer.hpp
 * @brief Direct homography observers on SL(3).
 *
 * The estimate H_hat is driven by the photometric correction
 *
 *   Delta = k_Delta * P_sl3( sum_i w_i (I^e(x_i) - I_ref(x_i)) grad I^e(x_i) x_i^T )
 *
 * where I^e = I o phi_{H_hat} is the current image pulled back through the
 * estimate. Three propagation laws are provided:
 *
 *  - known velocity:    H_hat' = H_hat U + Delta H_hat
 *  - partial velocity:  H_hat' = H_hat (Omega_x + Gamma_hat) + Delta H_hat,
 *                       Gamma_hat' = [Gamma_hat, Omega_x] + k_Gamma Ad_{H_hat^T} Delta
 *  - Gamma1 variant:    H_hat' = H_hat (Omega_x + P_sl3(Gamma1_hat)) + Delta H_hat,
 *                       Gamma1_hat' = Gamma1_hat Omega_x + k_Gamma Ad_{H_hat^T} Delta
 *
 * each discretized with one exponential on either side of H_hat.
 */

#pragma once

#include <Eigen/Eigenvalues>

#include <cstddef>
#include <sstream>

#include "sl3obs/camera.hpp"
#include "sl3obs/errors.hpp"
#include "sl3obs/image.hpp"
#include "sl3obs/lie.hpp"
#include "sl3obs/parallel.hpp"

namespace sl3obs {

/// NoOverlap is raised once more than this fraction of samples is out of frame.
inline constexpr double kMaxOutOfFrameFraction = 0.9;

struct Gains {
  double k_delta = 0.1;
  double k_gamma = 2.0;

  void validate() const {
    if (!(k_delta >= 0.0)) throw InvalidArgument("k_delta must be non-negative");
    if (!(k_gamma > 0.0)) throw InvalidArgument("k_gamma must be positive");
  }
};

enum class ObserverMode { KnownVelocity, PartialVelocity, Gamma1 };

struct ObserverState {
  SL3Element h_hat;
  /// Gamma_hat (traceless) in PartialVelocity mode, Gamma1_hat (any trace) in
  /// Gamma1 mode, unused otherwise.
  Matrix3 gamma = Matrix3::Zero();
  SL3Tangent last_delta;
  Gains gains;

  /// The unmeasured part of the group velocity as injected into the
  /// kinematics.
  SL3Tangent gamma_tangent() const { return project_sl3(gamma); }
};

/// Everything one pass over the region produces.
struct Innovation {
  SL3Tangent delta;
  /// 1/2 sum_i w_i (I^e - I_ref)^2 over in-frame samples.
  double cost = 0.0;
  /// sum_i (I^e - I_ref)^2, unweighted.
  double sum_sq_residual = 0.0;
  /// k_Delta tr(sum ...) before the sl(3) projection.
  double raw_trace = 0.0;
  std::size_t valid = 0;
  std::size_t total = 0;

  /// Mean squared intensity error per in-frame sample.
  double mean_sq_residual() const { return valid ? sum_sq_residual / static_cast<double>(valid) : 0.0; }
};

/// Evaluates the residual, the cost and the correction term in one pass.
///
/// `ref` is the reference image map, `cur` the current one. Out-of-frame
/// samples contribute nothing. Throws NoOverlap when more than 90% of the
/// samples are out of frame (or all of them).
template <ImageMap Ref, ImageMap Cur>
Innovation compute_innovation(const Ref& ref, const Cur& cur, const SL3Element& h_hat, const RegionSamples& region,
                              double k_delta, Execution exec = {}) {
  if (region.empty()) throw EmptyRegion("region samples are empty");
  const Matrix3 h_inv = h_hat.inverse().matrix();
  const Matrix3 h_inv_t = h_inv.transpose();

  struct Partial {
    Matrix3 m = Matrix3::Zero();
    double cost = 0.0;
    double ssq = 0.0;
    std::size_t valid = 0;
  };

  const Partial sum = chunked_reduce<Partial>(
      region.size(), Partial{},
      [&](std::size_t b, std::size_t e) {
        Partial p;
        for (std::size_t i = b; i < e; ++i) {
          const RegionSample& s = region.samples[i];
          const auto r = ref.value(s.x);
          if (!r) continue;
          const auto c = cur.eval(h_inv * s.x);
          if (!c) continue;
          const double diff = c->value - *r;
          // grad I^e(x) = H_hat^{-T} grad I(H_hat^{-1} x), projected on T_x S^2
          Vector3 g = h_inv_t * c->gradient;
          g -= s.x * s.x.dot(g);
          p.m.noalias() += (s.weight * diff) * g * s.x.transpose();
          p.cost += 0.5 * s.weight * diff * diff;
          p.ssq += diff * diff;
          ++p.valid;
        }
        return p;
      },
      [](Partial& acc, const Partial& p) {
        acc.m += p.m;
        acc.cost += p.cost;
        acc.ssq += p.ssq;
        acc.valid += p.valid;
      },
      exec);

  const std::size_t total = region.size();
  if (sum.valid == 0 || static_cast<double>(total - sum.valid) > kMaxOutOfFrameFraction * static_cast<double>(total)) {
    std::ostringstream os;
    os << "only " << sum.valid << " of " << total << " region samples are inside the current frame";
    throw NoOverlap(os.str(), sum.valid, total);
  }

  Innovation out;
  out.delta = project_sl3(k_delta * sum.m);
  out.cost = sum.cost;
  out.sum_sq_residual = sum.ssq;
  out.raw_trace = k_delta * sum.m.trace();
  out.valid = sum.valid;
  out.total = total;
  return out;
}

/// The correction term Delta.
template <ImageMap Ref, ImageMap Cur>
SL3Tangent correction_delta(const Ref& ref, const Cur& cur, const SL3Element& h_hat, const RegionSamples& region,
                            double k_delta, Execution exec = {}) {
  if (!(k_delta > 0.0)) throw InvalidArgument("k_delta must be positive");
  return compute_innovation(ref, cur, h_hat, region, k_delta, exec).delta;
}

/// The photometric cost F = 1/2 sum_i w_i (I^e(x_i) - I_ref(x_i))^2.
template <ImageMap Ref, ImageMap Cur>
double cost(const Ref& ref, const Cur& cur, const SL3Element& h_hat, const RegionSamples& region, Execution exec = {}) {
  return compute_innovation(ref, cur, h_hat, region, 0.0, exec).cost;
}

/// E = H_hat H^{-1}.
inline SL3Element group_error(const SL3Element& h, const SL3Element& h_hat) { return h_hat * h.inverse(); }

// ---------------------------------------------------------------------------
// Excitation

struct ExcitationReport {
  /// sum_i w_i b_i b_i^T with b_i[j] = <grad I_ref(x_i) x_i^T, A_j>, so that
  /// vee(D)^T gram vee(D) is the Hessian of the cost at the identity along D.
  Matrix8 gram = Matrix8::Zero();
  /// Ascending.
  Vector8 eigenvalues = Vector8::Zero();
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  /// max_i |tr(grad I_ref(x_i) x_i^T)|.
  double max_trace = 0.0;
  std::size_t valid = 0;
};

/// Gram matrix of the generators grad I_ref(x) x^T over the region; a positive
/// minimum eigenvalue means they span sl(3).
template <ImageMap Ref>
ExcitationReport excitation_check(const Ref& ref, const RegionSamples& region, Execution exec = {}) {
  struct Partial {
    Matrix8 gram = Matrix8::Zero();
    double max_trace = 0.0;
    std::size_t valid = 0;
  };
  const Partial sum = chunked_reduce<Partial>(
      region.size(), Partial{},
      [&](std::size_t b, std::size_t e) {
        Partial p;
        for (std::size_t i = b; i < e; ++i) {
          const RegionSample& s = region.samples[i];
          const auto v = ref.eval(s.x);
          if (!v) continue;
          const Matrix3 m = v->gradient * s.x.transpose();
          p.max_trace = std::max(p.max_trace, std::abs(m.trace()));
          Vector8 bvec;
          for (int j = 0; j < 8; ++j) bvec[j] = frobenius_inner(m, basis(j));
          p.gram.noalias() += s.weight * bvec * bvec.transpose();
          ++p.valid;
        }
        return p;
      },
      [](Partial& acc, const Partial& p) {
        acc.gram += p.gram;
        acc.max_trace = std::max(acc.max_trace, p.max_trace);
        acc.valid += p.valid;
      },
      exec);

  ExcitationReport out;
  out.gram = sum.gram;
  out.max_trace = sum.max_trace;
  out.valid = sum.valid;
  Eigen::SelfAdjointEigenSolver<Matrix8> solver(out.gram, Eigen::EigenvaluesOnly);
  out.eigenvalues = solver.eigenvalues();
  out.min_eigenvalue = out.eigenvalues[0];
  out.max_eigenvalue = out.eigenvalues[7];
  return out;
}

/// D^2 F(I)[D, D] = sum_i w_i <grad I_ref(x_i) x_i^T, D>^2, summed directly.
template <ImageMap Ref>
double hessian_quadratic_form(const Ref& ref, const RegionSamples& region, const SL3Tangent& d) {
  double acc = 0.0;
  for (const RegionSample& s : region.samples) {
    const auto v = ref.eval(s.x);
    if (!v) continue;
    const double q = frobenius_inner(v->gradient * s.x.transpose(), d.matrix());
    acc += s.weight * q * q;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Propagation

/// H_hat <- exp(dt Delta) H_hat exp(dt U).
inline ObserverState step_known_velocity(const ObserverState& state, const SL3Tangent& u, const SL3Tangent& delta,
                                         double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  ObserverState next = state;
  next.h_hat = exp_sl3(dt * delta) * state.h_hat * exp_sl3(dt * u);
  next.last_delta = delta;
  return next;
}

/// Partial-velocity observer step. The Gamma_hat update uses the pre-step
/// H_hat in Ad_{H_hat^T} Delta and is re-projected onto sl(3).
inline ObserverState step_partial_velocity(const ObserverState& state, const Vector3& omega, const SL3Tangent& delta,
                                           double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  state.gains.validate();
  const SL3Tangent omega_x(skew(omega));
  const SL3Tangent gamma = state.gamma_tangent();
  ObserverState next = state;
  next.h_hat = exp_sl3(dt * delta) * state.h_hat * exp_sl3(dt * (omega_x + gamma));
  const SL3Tangent rate = lie_bracket(gamma, omega_x) + state.gains.k_gamma * adjoint(state.h_hat.transpose(), delta);
  next.gamma = project_sl3(gamma.matrix() + dt * rate.matrix()).matrix();
  next.last_delta = delta;
  return next;
}

/// Gamma1 variant. Gamma1_hat keeps its trace; only P_sl3(Gamma1_hat) enters
/// the kinematics.
inline ObserverState step_gamma1_variant(const ObserverState& state, const Vector3& omega, const SL3Tangent& delta,
                                         double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  state.gains.validate();
  const Matrix3 omega_x = skew(omega);
  ObserverState next = state;
  next.h_hat = exp_sl3(dt * delta) * state.h_hat * exp_sl3(SL3Tangent(dt * omega_x) + dt * project_sl3(state.gamma));
  next.gamma = state.gamma + dt * (state.gamma * omega_x +
                                   state.gains.k_gamma * adjoint(state.h_hat.transpose(), delta).matrix());
  next.last_delta = delta;
  return next;
}

/// Measured velocity for one step: U in KnownVelocity mode, Omega otherwise.
struct VelocityMeasurement {
  SL3Tangent u;
  Vector3 omega = Vector3::Zero();
};

/// Observer bundling the state with its propagation law.
class HomographyObserver {
 public:
  HomographyObserver(ObserverMode mode, Gains gains, SL3Element h0 = {}, Matrix3 gamma0 = Matrix3::Zero())
      : mode_(mode) {
    gains.validate();
    state_.gains = gains;
    state_.h_hat = h0;
    state_.gamma = mode == ObserverMode::PartialVelocity ? project_sl3(gamma0).matrix() : gamma0;
  }

  ObserverMode mode() const { return mode_; }
  const ObserverState& state() const { return state_; }

  /// Computes Delta against `frame` and advances the estimate by dt.
  template <ImageMap Ref, ImageMap Cur>
  Innovation update(const Ref& ref, const Cur& frame, const RegionSamples& region, const VelocityMeasurement& vel,
                    double dt, Execution exec = {}) {
    Innovation inn = compute_innovation(ref, frame, state_.h_hat, region, state_.gains.k_delta, exec);
    advance(vel, inn.delta, dt);
    return inn;
  }

  void advance(const VelocityMeasurement& vel, const SL3Tangent& delta, double dt) {
    switch (mode_) {
      case ObserverMode::KnownVelocity: state_ = step_known_velocity(state_, vel.u, delta, dt); break;
      case ObserverMode::PartialVelocity: state_ = step_partial_velocity(state_, vel.omega, delta, dt); break;
      case ObserverMode::Gamma1: state_ = step_gamma1_variant(state_, vel.omega, delta, dt); break;
    }
  }

 private:
  ObserverMode mode_;
  ObserverState state_;
};

}  // namespace sl3obs
