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

// Shared fixtures for the unit tests and the acceptance runner.

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sl3obs/camera.hpp"
#include "sl3obs/image.hpp"
#include "sl3obs/image_io.hpp"
#include "sl3obs/lie.hpp"
#include "sl3obs/sim.hpp"

namespace sl3obs::test {

inline std::mt19937_64& rng() {
  static std::mt19937_64 r(0x5eed1234u);
  return r;
}

inline double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

inline Vector3 random_vector(double scale = 1.0) { return Vector3(uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale)); }

inline Vector8 random_coords(double scale = 1.0) {
  Vector8 v;
  for (int i = 0; i < 8; ++i) v[i] = uniform(-scale, scale);
  return v;
}

/// Random tangent with Frobenius norm uniform in [0, max_norm].
inline SL3Tangent random_tangent(double max_norm = 1.0) {
  const SL3Tangent u = wedge(random_coords());
  return (uniform(0.0, max_norm) / u.norm()) * u;
}

inline SL3Element random_element(double max_norm = 0.3) { return exp_sl3(random_tangent(max_norm)); }

/// Unit ray whose tangent-plane coordinates lie in [-t, t]^2.
inline Vector3 random_frontal(double t = 1.0) { return Vector3(uniform(-t, t), uniform(-t, t), 1.0).normalized(); }

/// Smooth textured image: random signed Gaussian blobs inside the camera's
/// field of view.
inline BlobImage blob_image(int count = 150, double sigma = 0.08, double amplitude = 3.0, unsigned seed = 7) {
  std::mt19937_64 r(seed);
  std::uniform_real_distribution<double> pos(-1.8, 1.8), amp(-amplitude, amplitude);
  std::vector<BlobImage::Blob> blobs;
  for (int i = 0; i < count; ++i) {
    const double px = pos(r), py = pos(r);
    blobs.push_back({Vector3(px, py, 1.0).normalized(), amp(r), sigma});
  }
  return BlobImage(blobs, 0.5, 0.45);
}

inline std::string bundled_image_path() { return SL3OBS_BUNDLED_IMAGE; }

inline const GrayImage& bundled_grid() {
  static const GrayImage g = read_image(bundled_image_path());
  return g;
}

inline CameraIntrinsics bundled_intrinsics() {
  return CameraIntrinsics::default_for(bundled_grid().width, bundled_grid().height);
}

inline const PixelImage& bundled_reference() {
  static const PixelImage img(bundled_grid(), bundled_intrinsics());
  return img;
}

/// Max absolute entry difference.
inline double max_abs_diff(const Matrix3& a, const Matrix3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace sl3obs::test
