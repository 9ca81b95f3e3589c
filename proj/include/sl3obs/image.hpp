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
 * @file image.hpp
 * @brief Image maps on the sphere and the action of SL(3) on them.
 *
 * An image map is any type with
 *
 *   std::optional<double>      value(const Vector3& y) const;
 *   std::optional<ImageSample> eval(const Vector3& y) const;
 *
 * where y is a nonzero ray, not necessarily unit. The map is read as the
 * scale-invariant extension I(y / |y|), and `eval` returns its Euclidean
 * gradient at y, which is tangent to the sphere and carries a 1/|y| factor.
 * That convention makes the chain rule for warps a plain transpose multiply.
 * nullopt marks an out-of-frame query.
 */

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sl3obs/camera.hpp"
#include "sl3obs/errors.hpp"
#include "sl3obs/lie.hpp"
#include "sl3obs/parallel.hpp"

namespace sl3obs {

struct ImageSample {
  double value = 0.0;
  Vector3 gradient = Vector3::Zero();
};

template <typename I>
concept ImageMap = requires(const I& img, const Vector3& y) {
  { img.value(y) } -> std::same_as<std::optional<double>>;
  { img.eval(y) } -> std::same_as<std::optional<ImageSample>>;
};

/// Removes the radial component of g at ray y.
inline Vector3 tangential(const Vector3& y, const Vector3& g) {
  const Vector3 u = y.normalized();
  return g - u * u.dot(g);
}

// ---------------------------------------------------------------------------
// Pixel grids

/// Row-major grayscale raster with intensities in [0, 1] and an optional
/// validity mask (empty mask: every pixel valid).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;
  std::vector<std::uint8_t> valid;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t index(int c, int r) const { return static_cast<std::size_t>(r) * width + c; }
  double& at(int c, int r) { return data[index(c, r)]; }
  double at(int c, int r) const { return data[index(c, r)]; }
  bool is_valid(int c, int r) const { return valid.empty() || valid[index(c, r)] != 0; }
  bool has_mask() const { return !valid.empty(); }
};

/// How the pixel gradient D I(u, v) is estimated.
enum class GradientMode {
  /// Central differences on the grid (border and mask replication),
  /// bilinearly interpolated between nodes.
  CentralDifference,
  /// Exact derivative of the bilinear interpolant.
  Bilinear,
};

struct PixelImageOptions {
  GradientMode gradient = GradientMode::CentralDifference;
  /// Pre-smooth with the 3x3 binomial kernel before differencing. Values are
  /// never smoothed.
  bool smooth_gradient = false;
};

/// Image map backed by a pixel grid seen through a pinhole camera.
class PixelImage {
 public:
  PixelImage(GrayImage grid, const CameraIntrinsics& k, PixelImageOptions opts = {})
      : grid_(std::move(grid)), k_(k), opts_(opts) {
    if (grid_.width < 2 || grid_.height < 2) throw InvalidArgument("pixel image must be at least 2x2");
    if (grid_.data.size() != static_cast<std::size_t>(grid_.width) * grid_.height)
      throw InvalidArgument("pixel buffer does not match image size");
    if (grid_.has_mask() && grid_.valid.size() != grid_.data.size())
      throw InvalidArgument("mask does not match image size");
    if (k_.width != grid_.width || k_.height != grid_.height)
      throw InvalidArgument("intrinsics image size does not match the pixel grid");
    k_.validate();
    if (opts_.gradient == GradientMode::CentralDifference) build_gradient_grids();
  }

  const GrayImage& grid() const { return grid_; }
  const CameraIntrinsics& intrinsics() const { return k_; }
  const PixelImageOptions& options() const { return opts_; }

  std::optional<double> value(const Vector3& y) const {
    auto cell = locate(y);
    if (!cell) return std::nullopt;
    return std::clamp(interpolate(grid_.data, *cell), 0.0, 1.0);
  }

  std::optional<ImageSample> eval(const Vector3& y) const {
    auto cell = locate(y);
    if (!cell) return std::nullopt;
    ImageSample s;
    s.value = std::clamp(interpolate(grid_.data, *cell), 0.0, 1.0);
    Vector2 d;
    if (opts_.gradient == GradientMode::CentralDifference) {
      d = Vector2(interpolate(grad_u_, *cell), interpolate(grad_v_, *cell));
    } else {
      d = bilinear_derivative(*cell);
    }
    s.gradient = tangential(y, projection_jacobian(k_, y).transpose() * d);
    return s;
  }

  /// Pixel-space gradient estimate at node (c, r).
  Vector2 pixel_gradient(int c, int r) const {
    if (opts_.gradient == GradientMode::CentralDifference)
      return {grad_u_[grid_.index(c, r)], grad_v_[grid_.index(c, r)]};
    Cell cell{std::min(c, grid_.width - 2), std::min(r, grid_.height - 2), 0.0, 0.0, {}};
    cell.a = c - cell.c;
    cell.b = r - cell.r;
    return bilinear_derivative(cell);
  }

 private:
  struct Cell {
    int c, r;     // top-left node
    double a, b;  // fractional offsets in [0, 1]
    std::array<double, 4> w;
  };

  std::optional<Cell> locate(const Vector3& y) const {
    auto p = project_ray(k_, y);
    if (!p) return std::nullopt;
    // Rays through border pixel centers come back a few ulps outside the grid.
    constexpr double kSnap = 1e-9;
    double u = p->x(), v = p->y();
    if (!(u >= -kSnap && v >= -kSnap && u <= grid_.width - 1 + kSnap && v <= grid_.height - 1 + kSnap))
      return std::nullopt;
    u = std::clamp(u, 0.0, grid_.width - 1.0);
    v = std::clamp(v, 0.0, grid_.height - 1.0);
    Cell cell;
    cell.c = std::min(static_cast<int>(u), grid_.width - 2);
    cell.r = std::min(static_cast<int>(v), grid_.height - 2);
    cell.a = u - cell.c;
    cell.b = v - cell.r;
    cell.w = {(1 - cell.a) * (1 - cell.b), cell.a * (1 - cell.b), (1 - cell.a) * cell.b, cell.a * cell.b};
    if (grid_.has_mask()) {
      const int dc[4] = {0, 1, 0, 1}, dr[4] = {0, 0, 1, 1};
      for (int i = 0; i < 4; ++i)
        if (cell.w[i] > 0.0 && !grid_.is_valid(cell.c + dc[i], cell.r + dr[i])) return std::nullopt;
    }
    return cell;
  }

  double interpolate(const std::vector<double>& g, const Cell& cell) const {
    const std::size_t i = grid_.index(cell.c, cell.r);
    const std::size_t w = static_cast<std::size_t>(grid_.width);
    return cell.w[0] * g[i] + cell.w[1] * g[i + 1] + cell.w[2] * g[i + w] + cell.w[3] * g[i + w + 1];
  }

  Vector2 bilinear_derivative(const Cell& cell) const {
    const std::size_t i = grid_.index(cell.c, cell.r);
    const std::size_t w = static_cast<std::size_t>(grid_.width);
    const auto& g = grid_.data;
    const double du = (1 - cell.b) * (g[i + 1] - g[i]) + cell.b * (g[i + w + 1] - g[i + w]);
    const double dv = (1 - cell.a) * (g[i + w] - g[i]) + cell.a * (g[i + w + 1] - g[i + 1]);
    return {du, dv};
  }

  // Neighbor lookup that replicates the center across borders and invalid
  // pixels.
  double neighbor(const std::vector<double>& g, int c, int r, int dc, int dr) const {
    const int nc = c + dc, nr = r + dr;
    if (nc < 0 || nr < 0 || nc >= grid_.width || nr >= grid_.height || !grid_.is_valid(nc, nr))
      return g[grid_.index(c, r)];
    return g[grid_.index(nc, nr)];
  }

  void build_gradient_grids() {
    const std::vector<double>* src = &grid_.data;
    std::vector<double> smoothed;
    if (opts_.smooth_gradient) {
      smoothed.resize(grid_.data.size());
      for (int r = 0; r < grid_.height; ++r)
        for (int c = 0; c < grid_.width; ++c) {
          double acc = 0.0;
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc)
              acc += (2 - std::abs(dc)) * (2 - std::abs(dr)) * neighbor(grid_.data, c, r, dc, dr);
          smoothed[grid_.index(c, r)] = acc / 16.0;
        }
      src = &smoothed;
    }
    grad_u_.assign(grid_.data.size(), 0.0);
    grad_v_.assign(grid_.data.size(), 0.0);
    for (int r = 0; r < grid_.height; ++r)
      for (int c = 0; c < grid_.width; ++c) {
        const std::size_t i = grid_.index(c, r);
        grad_u_[i] = 0.5 * (neighbor(*src, c, r, 1, 0) - neighbor(*src, c, r, -1, 0));
        grad_v_[i] = 0.5 * (neighbor(*src, c, r, 0, 1) - neighbor(*src, c, r, 0, -1));
      }
  }

  GrayImage grid_;
  CameraIntrinsics k_;
  PixelImageOptions opts_;
  std::vector<double> grad_u_;
  std::vector<double> grad_v_;
};

// ---------------------------------------------------------------------------
// Closed-form images

class ConstantImage {
 public:
  explicit ConstantImage(double c) : c_(std::clamp(c, 0.0, 1.0)) {}
  std::optional<double> value(const Vector3&) const { return c_; }
  std::optional<ImageSample> eval(const Vector3&) const { return ImageSample{c_, Vector3::Zero()}; }

 private:
  double c_;
};

/// Smooth image on the whole sphere built from Gaussian blobs in direction
/// space, squashed into (offset - contrast, offset + contrast):
///
///   I(x) = offset + contrast * tanh( sum_j a_j exp(-|x - mu_j|^2 / (2 s_j^2)) )
class BlobImage {
 public:
  struct Blob {
    Vector3 center;  // unit
    double amplitude;
    double sigma;
  };

  BlobImage(std::vector<Blob> blobs, double offset = 0.5, double contrast = 0.4)
      : blobs_(std::move(blobs)), offset_(offset), contrast_(contrast) {
    if (offset - std::abs(contrast) < 0.0 || offset + std::abs(contrast) > 1.0)
      throw InvalidArgument("blob image range must stay inside [0, 1]");
    for (auto& b : blobs_) {
      if (!(b.sigma > 0.0)) throw InvalidArgument("blob width must be positive");
      b.center.normalize();
    }
  }

  const std::vector<Blob>& blobs() const { return blobs_; }

  std::optional<double> value(const Vector3& y) const { return offset_ + contrast_ * std::tanh(field(y.normalized(), nullptr)); }

  std::optional<ImageSample> eval(const Vector3& y) const {
    const double n = y.norm();
    const Vector3 x = y / n;
    Vector3 grad_field;
    const double s = field(x, &grad_field);
    const double t = std::tanh(s);
    ImageSample out;
    out.value = offset_ + contrast_ * t;
    out.gradient = tangential(x, contrast_ * (1.0 - t * t) * grad_field) / n;
    return out;
  }

 private:
  double field(const Vector3& x, Vector3* grad) const {
    double s = 0.0;
    if (grad) grad->setZero();
    for (const auto& b : blobs_) {
      const Vector3 d = x - b.center;
      const double inv_var = 1.0 / (b.sigma * b.sigma);
      const double e = b.amplitude * std::exp(-0.5 * d.squaredNorm() * inv_var);
      s += e;
      if (grad) *grad -= e * inv_var * d;
    }
    return s;
  }

  std::vector<Blob> blobs_;
  double offset_;
  double contrast_;
};

// ---------------------------------------------------------------------------
// Group actions

/// phi(H, x) = H^{-1} x / |H^{-1} x|, the right action of SL(3) on S^2.
inline SphereDirection warp_point(const SL3Element& h, const SphereDirection& x) {
  return sphere_project(h.inverse().matrix() * x.vec());
}

/// D phi_x(I)[D] = -Pi_x D x, the derivative of t -> phi(exp(t D), x) at 0.
inline Vector3 warp_point_differential(const SphereDirection& x, const SL3Tangent& d) {
  return -(tangent_projector(x) * (d.matrix() * x.vec()));
}

/// The lazily evaluated map y -> I(M y) for a fixed invertible M.
///
/// With M = H this is Phi(H, I) = I o phi_{H^{-1}}; warps nest, so
/// Warped<Warped<I>> is the composite action. The wrapped image must outlive
/// the view.
template <ImageMap Img>
class Warped {
 public:
  Warped(const Img& base, const Matrix3& m) : base_(&base), m_(m) {}

  const Img& base() const { return *base_; }
  const Matrix3& matrix() const { return m_; }

  std::optional<double> value(const Vector3& y) const { return base_->value(m_ * y); }

  std::optional<ImageSample> eval(const Vector3& y) const {
    auto s = base_->eval(m_ * y);
    if (!s) return std::nullopt;
    s->gradient = m_.transpose() * s->gradient;
    return s;
  }

 private:
  const Img* base_;
  Matrix3 m_;
};

/// Phi(H, I) = I o phi_{H^{-1}}, i.e. x -> I(H x / |H x|).
template <ImageMap Img>
Warped<Img> warp_image(const SL3Element& h, const Img& img) {
  return Warped<Img>(img, h.matrix());
}

/// I^e = I o phi_{H_hat}, i.e. x -> I(H_hat^{-1} x / |H_hat^{-1} x|).
template <ImageMap Img>
Warped<Img> warped_error_image(const Img& img, const SL3Element& h_hat) {
  return Warped<Img>(img, h_hat.inverse().matrix());
}

template <ImageMap Img>
std::optional<double> sample(const Img& img, const SphereDirection& x) {
  return img.value(x.vec());
}

template <ImageMap Img>
std::optional<Vector3> gradient(const Img& img, const SphereDirection& x) {
  auto s = img.eval(x.vec());
  if (!s) return std::nullopt;
  return s->gradient;
}

/// Samples `img` at the center ray of every pixel of a `k.width` x `k.height`
/// grid. Out-of-frame pixels are written as 0 and marked invalid. With
/// `quantize`, values are rounded to 8-bit levels.
template <ImageMap Img>
GrayImage rasterize(const Img& img, const CameraIntrinsics& k, bool quantize = false, Execution exec = {}) {
  GrayImage out(k.width, k.height, 0.0);
  out.valid.assign(out.data.size(), 1);
  chunked_for(
      out.data.size(),
      [&](std::size_t i) {
        const int c = static_cast<int>(i % k.width), r = static_cast<int>(i / k.width);
        const Vector3 ray((c - k.u0) / k.fu, (r - k.v0) / k.fv, 1.0);
        auto v = img.value(ray);
        if (!v) {
          out.valid[i] = 0;
          return;
        }
        out.data[i] = quantize ? std::round(*v * 255.0) / 255.0 : *v;
      },
      exec);
  if (std::all_of(out.valid.begin(), out.valid.end(), [](std::uint8_t v) { return v != 0; })) out.valid.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature over the region of interest

/// Pixel rectangle: columns [u, u + width), rows [v, v + height).
struct PixelRect {
  int u = 0;
  int v = 0;
  int width = 0;
  int height = 0;

  static PixelRect full(const CameraIntrinsics& k) { return {0, 0, k.width, k.height}; }
};

/// Weight attached to each pixel sample.
enum class QuadratureRule {
  /// 1 / (fu fv): the pixel's area on the normalized image plane z = 1.
  PlanarUniform,
  /// 1 per pixel.
  Unit,
  /// Solid angle subtended by the pixel, x3^3 / (fu fv).
  SolidAngle,
};

struct RegionSample {
  Vector3 x;  // unit ray
  double weight;
  Vector2 pixel;
};

struct RegionSamples {
  std::vector<RegionSample> samples;
  CameraIntrinsics intrinsics;
  PixelRect rect;
  QuadratureRule rule = QuadratureRule::PlanarUniform;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// One sample per pixel center of `rect`. Throws EmptyRegion for an empty
/// rectangle and InvalidArgument if it leaves the image.
inline RegionSamples build_region_samples(const CameraIntrinsics& k, const PixelRect& rect,
                                          QuadratureRule rule = QuadratureRule::PlanarUniform) {
  k.validate();
  if (rect.width <= 0 || rect.height <= 0) throw EmptyRegion("region of interest is empty");
  if (rect.u < 0 || rect.v < 0 || rect.u + rect.width > k.width || rect.v + rect.height > k.height)
    throw InvalidArgument("region of interest leaves the image");
  RegionSamples out;
  out.intrinsics = k;
  out.rect = rect;
  out.rule = rule;
  out.samples.reserve(static_cast<std::size_t>(rect.width) * rect.height);
  const double planar = 1.0 / (k.fu * k.fv);
  for (int r = rect.v; r < rect.v + rect.height; ++r)
    for (int c = rect.u; c < rect.u + rect.width; ++c) {
      const Vector2 p(c, r);
      const SphereDirection x = pixel_to_ray(k, p);
      double w = 1.0;
      switch (rule) {
        case QuadratureRule::PlanarUniform: w = planar; break;
        case QuadratureRule::Unit: w = 1.0; break;
        case QuadratureRule::SolidAngle: w = planar * x[2] * x[2] * x[2]; break;
      }
      out.samples.push_back({x.vec(), w, p});
    }
  return out;
}

}  // namespace sl3obs
