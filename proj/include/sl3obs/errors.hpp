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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sl3obs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix cannot be rescaled onto SL(3) (det <= 0), or fails the det = 1 check.
class DegenerateHomography : public Error {
 public:
  using Error::Error;
};

/// Matrix handed to an sl(3) operation is not traceless.
class NotTraceless : public Error {
 public:
  using Error::Error;
};

/// Zero vector passed to the sphere projection.
class DegenerateDirection : public Error {
 public:
  using Error::Error;
};

/// Ray is not in the frontal hemisphere of the camera.
class BehindCamera : public Error {
 public:
  using Error::Error;
};

class EmptyRegion : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Bad command-line or config-file input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Too few region samples land inside the current frame; the estimate has
/// left the visible region.
class NoOverlap : public Error {
 public:
  static constexpr std::size_t kNoStep = static_cast<std::size_t>(-1);

  NoOverlap(const std::string& what, std::size_t valid, std::size_t total, std::size_t step = kNoStep)
      : Error(what), valid_(valid), total_(total), step_(step) {}

  std::size_t valid() const { return valid_; }
  std::size_t total() const { return total_; }
  /// Time step at which overlap was lost, kNoStep outside a simulation.
  std::size_t step() const { return step_; }

 private:
  std::size_t valid_;
  std::size_t total_;
  std::size_t step_;
};

}  // namespace sl3obs
