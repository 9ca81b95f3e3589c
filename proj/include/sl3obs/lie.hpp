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
 * @file lie.hpp
 * @brief The special linear group SL(3) and its Lie algebra sl(3).
 *
 * Group elements are unit-determinant 3x3 matrices (homographies), algebra
 * elements are traceless 3x3 matrices (group velocities, corrections).
 *
 * Algebra coordinates use the basis
 *
 *   A1 = e1 e2^T   A2 = e2 e1^T   A3 = e2 e3^T   A4 = e3 e2^T
 *   A5 = e3 e1^T   A6 = e1 e3^T   A7 = e1 e1^T - I/3   A8 = e2 e2^T - I/3
 *
 * in that order; wedge() maps R^8 -> sl(3), vee() is its inverse.
 */

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "sl3obs/errors.hpp"

namespace sl3obs {

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;
using Vector8 = Eigen::Matrix<double, 8, 1>;
using Matrix8 = Eigen::Matrix<double, 8, 8>;

/// |det - 1| accepted for a group element.
inline constexpr double kDetTolerance = 1e-9;
/// |tr| accepted for an algebra element, relative to max(1, |M|).
inline constexpr double kTraceTolerance = 1e-12;

inline double frobenius_inner(const Matrix3& a, const Matrix3& b) { return (a.array() * b.array()).sum(); }

inline double frobenius_norm(const Matrix3& a) { return std::sqrt(frobenius_inner(a, a)); }

/// Traceless 3x3 matrix, an element of sl(3).
class SL3Tangent {
 public:
  SL3Tangent() : m_(Matrix3::Zero()) {}

  /// Throws NotTraceless when |tr(m)| exceeds the tolerance.
  explicit SL3Tangent(const Matrix3& m) : m_(m) {
    const double tol = kTraceTolerance * std::max(1.0, frobenius_norm(m));
    if (!(std::abs(m.trace()) <= tol)) {
      std::ostringstream os;
      os << "matrix is not traceless: tr = " << m.trace();
      throw NotTraceless(os.str());
    }
  }

  static SL3Tangent Zero() { return SL3Tangent(); }

  const Matrix3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }
  double norm() const { return frobenius_norm(m_); }

  SL3Tangent operator+(const SL3Tangent& o) const { return unchecked(m_ + o.m_); }
  SL3Tangent operator-(const SL3Tangent& o) const { return unchecked(m_ - o.m_); }
  SL3Tangent operator-() const { return unchecked(-m_); }
  SL3Tangent operator*(double s) const { return unchecked(s * m_); }
  friend SL3Tangent operator*(double s, const SL3Tangent& t) { return t * s; }

 private:
  struct NoCheck {};
  SL3Tangent(const Matrix3& m, NoCheck) : m_(m) {}
  // Linear combinations of traceless matrices stay traceless up to rounding.
  static SL3Tangent unchecked(const Matrix3& m) { return SL3Tangent(m, NoCheck{}); }

  Matrix3 m_;

  friend SL3Tangent project_sl3(const Matrix3& m);
  friend SL3Tangent wedge(const Vector8& v);
};

/// Unit-determinant 3x3 matrix, an element of SL(3).
class SL3Element {
 public:
  SL3Element() : m_(Matrix3::Identity()) {}

  /// Throws DegenerateHomography when |det(m) - 1| > kDetTolerance.
  explicit SL3Element(const Matrix3& m) : m_(m) {
    const double det = m.determinant();
    if (!(std::abs(det - 1.0) <= kDetTolerance)) {
      std::ostringstream os;
      os << "matrix is not in SL(3): det = " << det;
      throw DegenerateHomography(os.str());
    }
  }

  static SL3Element Identity() { return SL3Element(); }

  const Matrix3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  SL3Element inverse() const;
  SL3Element transpose() const { return SL3Element(m_.transpose(), NoCheck{}); }

  /// Group product; renormalizes the determinant if rounding drifted past
  /// kDetTolerance.
  SL3Element operator*(const SL3Element& o) const;

 private:
  struct NoCheck {};
  SL3Element(const Matrix3& m, NoCheck) : m_(m) {}

  Matrix3 m_;

  friend SL3Element normalize_determinant(const Matrix3& m);
  friend SL3Element exp_sl3(const SL3Tangent& u);
};

/// Orthogonal projection of R^{3x3} onto sl(3): M - tr(M)/3 I.
namespace detail {

/// Nudges the smaller of d0, d1 by at most one ulp so that d0 + d1 is exact,
/// and returns that sum. A third diagonal entry of -sum then makes the trace
/// exactly zero in any summation order.
inline double balance_diagonal(double& d0, double& d1) {
  // Fast two-sum: with |big| >= |small|, (big + small) - big is exact.
  double& big = std::abs(d0) >= std::abs(d1) ? d0 : d1;
  double& small = &big == &d0 ? d1 : d0;
  const double sum = big + small;
  small = sum - big;
  return sum;
}

}  // namespace detail

inline SL3Tangent project_sl3(const Matrix3& m) {
  // Already exactly traceless: leave the bits alone so projection is idempotent.
  if (m.trace() == 0.0) return SL3Tangent(m, SL3Tangent::NoCheck{});
  Matrix3 p = m;
  const double third = m.trace() / 3.0;
  double d0 = m(0, 0) - third, d1 = m(1, 1) - third;
  p(2, 2) = -detail::balance_diagonal(d0, d1);
  p(0, 0) = d0;
  p(1, 1) = d1;
  return SL3Tangent(p, SL3Tangent::NoCheck{});
}

/// det(M)^(-1/3) M. Throws DegenerateHomography if det(M) <= 0.
inline SL3Element normalize_determinant(const Matrix3& m) {
  const double det = m.determinant();
  if (!(det > 0.0)) {
    std::ostringstream os;
    os << "cannot rescale matrix with det = " << det << " onto SL(3)";
    throw DegenerateHomography(os.str());
  }
  return SL3Element(m / std::cbrt(det), SL3Element::NoCheck{});
}

inline SL3Element SL3Element::inverse() const {
  // inverse() of a unit-det matrix equals the adjugate; keep the det exact.
  Matrix3 inv = m_.inverse();
  if (std::abs(inv.determinant() - 1.0) > kDetTolerance) return normalize_determinant(inv);
  return SL3Element(inv, NoCheck{});
}

inline SL3Element SL3Element::operator*(const SL3Element& o) const {
  Matrix3 p = m_ * o.m_;
  if (std::abs(p.determinant() - 1.0) > kDetTolerance) return normalize_determinant(p);
  return SL3Element(p, NoCheck{});
}

/// The basis matrix A_i, i in [0, 8).
inline const Matrix3& basis(int i) {
  static const std::array<Matrix3, 8> kBasis = [] {
    std::array<Matrix3, 8> a;
    for (auto& m : a) m.setZero();
    a[0](0, 1) = 1.0;
    a[1](1, 0) = 1.0;
    a[2](1, 2) = 1.0;
    a[3](2, 1) = 1.0;
    a[4](2, 0) = 1.0;
    a[5](0, 2) = 1.0;
    a[6] = -Matrix3::Identity() / 3.0;
    a[6](0, 0) += 1.0;
    a[7] = -Matrix3::Identity() / 3.0;
    a[7](1, 1) += 1.0;
    return a;
  }();
  return kBasis.at(static_cast<std::size_t>(i));
}

/// Gram matrix <A_i, A_j> of the basis. Identity on the off-diagonal block,
/// [[2/3, -1/3], [-1/3, 2/3]] on the diagonal generators.
inline Matrix8 basis_gram() {
  Matrix8 g;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) g(i, j) = frobenius_inner(basis(i), basis(j));
  return g;
}

/// Sum of v_i A_i. The diagonal is nudged by at most one ulp so that its
/// entries sum to exactly zero in any order.
inline SL3Tangent wedge(const Vector8& v) {
  double d0 = (2.0 * v[6] - v[7]) / 3.0;
  double d1 = (2.0 * v[7] - v[6]) / 3.0;
  const double sum = detail::balance_diagonal(d0, d1);
  Matrix3 m;
  // clang-format off
  m << d0,   v[0], v[5],
       v[1], d1,   v[2],
       v[4], v[3], -sum;
  // clang-format on
  return SL3Tangent::unchecked(m);
}

inline Vector8 vee(const SL3Tangent& x) {
  const Matrix3& m = x.matrix();
  Vector8 v;
  v << m(0, 1), m(1, 0), m(1, 2), m(2, 1), m(2, 0), m(0, 2), m(0, 0) - m(2, 2), m(1, 1) - m(2, 2);
  return v;
}

/// Validating overload; throws NotTraceless.
inline Vector8 vee(const Matrix3& m) { return vee(SL3Tangent(m)); }

/// Matrix exponential by scaling and squaring around a Taylor core.
///
/// The argument is scaled by 2^-s until its 1-norm is <= 1/2, the series is
/// summed until the terms fall below machine precision, and the result is
/// squared s times. Nilpotent arguments (U^2 = 0) small enough to skip scaling
/// come out as exactly I + U.
inline SL3Element exp_sl3(const SL3Tangent& u) {
  const Matrix3& a = u.matrix();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix3 scaled = std::ldexp(1.0, -squarings) * a;

  Matrix3 result = Matrix3::Identity();
  Matrix3 term = Matrix3::Identity();
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    if (term.isZero(0.0)) break;
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;

  if (std::abs(result.determinant() - 1.0) > kDetTolerance) return normalize_determinant(result);
  return SL3Element(result, SL3Element::NoCheck{});
}

/// Ad_H(U) = H U H^{-1}.
/// The trace of the product is zero up to rounding; the residue is projected
/// out.
inline SL3Tangent adjoint(const SL3Element& h, const SL3Tangent& u) {
  return project_sl3(h.matrix() * u.matrix() * h.inverse().matrix());
}

/// [A, B] = AB - BA.
inline SL3Tangent lie_bracket(const SL3Tangent& a, const SL3Tangent& b) {
  return project_sl3(a.matrix() * b.matrix() - b.matrix() * a.matrix());
}

/// Row-major, comma separated, full round-trip precision.
inline std::string to_csv(const Matrix3& m) {
  std::ostringstream os;
  os.precision(17);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) os << (r + c == 0 ? "" : ",") << m(r, c);
  return os.str();
}

inline std::string to_csv(const Vector8& v) {
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < 8; ++i) os << (i == 0 ? "" : ",") << v[i];
  return os.str();
}

}  // namespace sl3obs
