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
 * @file camera.hpp
 * @brief Pinhole camera on the unit sphere.
 *
 * Pixel coordinates (u, v) put pixel centers on integer positions: column c,
 * row r has center (c, r).
 */

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <sstream>

#include "sl3obs/errors.hpp"
#include "sl3obs/lie.hpp"

namespace sl3obs {

using Vector2 = Eigen::Vector2d;
using Matrix23 = Eigen::Matrix<double, 2, 3>;

/// e3^T x must exceed this for a ray to be projected.
inline constexpr double kFrontalEpsilon = 1e-6;

/// a_x, the matrix with a_x b = a x b.
inline Matrix3 skew(const Vector3& a) {
  Matrix3 m;
  // clang-format off
  m <<     0, -a.z(),  a.y(),
       a.z(),      0, -a.x(),
      -a.y(),  a.x(),      0;
  // clang-format on
  return m;
}

/// Unit vector on S^2.
class SphereDirection {
 public:
  /// Throws InvalidArgument unless |x| = 1 within 1e-12.
  explicit SphereDirection(const Vector3& x) : x_(x) {
    if (!(std::abs(x.norm() - 1.0) <= 1e-12)) throw InvalidArgument("sphere direction must have unit norm");
  }

  const Vector3& vec() const { return x_; }
  double operator[](int i) const { return x_[i]; }
  bool frontal() const { return x_.z() > kFrontalEpsilon; }

 private:
  Vector3 x_;
};

inline SphereDirection sphere_project(const Vector3& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw DegenerateDirection("cannot project the zero vector onto the sphere");
  Vector3 x = v / n;
  // a second pass absorbs the rounding of the first division
  x /= x.norm();
  return SphereDirection(x);
}

/// Pi_x = I - x x^T.
inline Matrix3 tangent_projector(const SphereDirection& x) { return Matrix3::Identity() - x.vec() * x.vec().transpose(); }

struct CameraIntrinsics {
  double fu = 0.0;
  double fv = 0.0;
  double u0 = 0.0;
  double v0 = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidArgument on non-positive focal lengths or a principal
  /// point outside the image.
  void validate() const {
    if (!(fu > 0.0 && fv > 0.0)) throw InvalidArgument("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
    if (!(u0 >= 0.0 && u0 < width && v0 >= 0.0 && v0 < height))
      throw InvalidArgument("principal point must lie inside the image");
  }

  /// fu = fv = width / 3, principal point (width / 2, height / 2).
  static CameraIntrinsics default_for(int width, int height) {
    CameraIntrinsics k{width / 3.0, width / 3.0, width / 2.0, height / 2.0, width, height};
    k.validate();
    return k;
  }

  /// The 2x3 matrix [[fu, 0, u0], [0, fv, v0]].
  Matrix23 matrix() const {
    Matrix23 k;
    k << fu, 0.0, u0, 0.0, fv, v0;
    return k;
  }
};

/// Projection h of any frontal ray (not necessarily unit); nullopt if the ray
/// is not frontal. This is the allocation-free path used by image sampling.
inline std::optional<Vector2> project_ray(const CameraIntrinsics& k, const Vector3& y) {
  if (!(y.z() > kFrontalEpsilon * y.norm())) return std::nullopt;
  return Vector2(k.fu * y.x() / y.z() + k.u0, k.fv * y.y() / y.z() + k.v0);
}

/// h(x). Throws BehindCamera when e3^T x <= kFrontalEpsilon.
inline Vector2 ray_to_pixel(const CameraIntrinsics& k, const SphereDirection& x) {
  auto p = project_ray(k, x.vec());
  if (!p) {
    std::ostringstream os;
    os << "ray with e3^T x = " << x[2] << " is outside the frontal hemisphere";
    throw BehindCamera(os.str());
  }
  return *p;
}

inline SphereDirection pixel_to_ray(const CameraIntrinsics& k, const Vector2& p) {
  return sphere_project(Vector3((p.x() - k.u0) / k.fu, (p.y() - k.v0) / k.fv, 1.0));
}

/// Jacobian of y -> K y / (e3^T y) at any frontal y:
///   K (1 / y3) (I - y e3^T / y3).
/// It annihilates y, so it is also the derivative of h restricted to the
/// sphere's tangent plane when y is a unit vector.
inline Matrix23 projection_jacobian(const CameraIntrinsics& k, const Vector3& y) {
  const double inv_z = 1.0 / y.z();
  Matrix3 p = Matrix3::Identity();
  p.col(2) -= y * inv_z;
  return inv_z * k.matrix() * p;
}

/// Dh(x). Throws BehindCamera like ray_to_pixel.
inline Matrix23 pixel_jacobian(const CameraIntrinsics& k, const SphereDirection& x) {
  if (!x.frontal()) throw BehindCamera("pixel Jacobian requested outside the frontal hemisphere");
  return projection_jacobian(k, x.vec());
}

}  // namespace sl3obs
