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

// 8-bit grayscale PGM (P5) and PNG input, PGM output. Intensities map to
// [0, 1] by /255.

#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "sl3obs/errors.hpp"
#include "sl3obs/image.hpp"

namespace sl3obs {

namespace detail {

inline void skip_pgm_space(std::istream& in) {
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_pgm_int(std::istream& in, const std::string& path) {
  skip_pgm_space(in);
  int v = -1;
  if (!(in >> v) || v < 0) throw IoError(path + ": malformed PGM header");
  return v;
}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace detail

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') throw IoError(path + ": not a binary PGM (P5)");
  const int w = detail::read_pgm_int(in, path);
  const int h = detail::read_pgm_int(in, path);
  const int maxval = detail::read_pgm_int(in, path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError(path + ": unsupported PGM header");
  in.get();  // single whitespace before the raster

  GrayImage img(w, h);
  const std::size_t n = img.data.size();
  if (maxval < 256) {
    std::vector<std::uint8_t> raw(n);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n))) throw IoError(path + ": truncated raster");
    for (std::size_t i = 0; i < n; ++i) img.data[i] = raw[i] / static_cast<double>(maxval);
  } else {
    std::vector<std::uint8_t> raw(2 * n);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * n))) throw IoError(path + ": truncated raster");
    for (std::size_t i = 0; i < n; ++i) img.data[i] = ((raw[2 * i] << 8) | raw[2 * i + 1]) / static_cast<double>(maxval);
  }
  return img;
}

/// Writes the intensities (mask ignored) as 8-bit P5.
inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<std::uint8_t> raw(img.data.size());
  std::transform(img.data.begin(), img.data.end(), raw.begin(), detail::to_byte);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError(path + ": write failed");
}

/// Writes the validity mask as a PGM (255 valid, 0 invalid).
inline void write_mask_pgm(const std::string& path, const GrayImage& img) {
  GrayImage m(img.width, img.height, 1.0);
  for (std::size_t i = 0; i < img.valid.size(); ++i) m.data[i] = img.valid[i] ? 1.0 : 0.0;
  write_pgm(path, m);
}

/// Any PNG, converted to 8-bit gray.
inline GrayImage read_png(const std::string& path) {
  png_image png;
  std::fill_n(reinterpret_cast<char*>(&png), sizeof(png), 0);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) throw IoError(path + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError(path + ": " + png.message);
  }
  GrayImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

/// Dispatches on the file signature.
inline GrayImage read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  unsigned char sig[8] = {0};
  in.read(reinterpret_cast<char*>(sig), 8);
  if (in.gcount() >= 2 && sig[0] == 'P' && sig[1] == '5') return read_pgm(path);
  if (in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  throw IoError(path + ": unsupported image format (expected PGM P5 or PNG)");
}

/// Reads a mask written by write_mask_pgm into img.valid.
inline void attach_mask(GrayImage& img, const std::string& mask_path) {
  GrayImage m = read_image(mask_path);
  if (m.width != img.width || m.height != img.height) throw IoError(mask_path + ": mask size does not match frame");
  img.valid.resize(img.data.size());
  for (std::size_t i = 0; i < m.data.size(); ++i) img.valid[i] = m.data[i] >= 0.5 ? 1 : 0;
  if (std::all_of(img.valid.begin(), img.valid.end(), [](std::uint8_t v) { return v != 0; })) img.valid.clear();
}

}  // namespace sl3obs
