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

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sl3obs {

/// Worker count for per-sample loops. threads == 1 runs inline.
struct Execution {
  unsigned threads = 1;

  /// Reads SL3_OBSERVER_THREADS, falling back to the hardware concurrency.
  static Execution from_environment() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SL3_OBSERVER_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    }
    return {n};
  }
};

/// Samples per reduction chunk. The partition depends only on the sample
/// count, so results are bit-identical for every thread count.
inline constexpr std::size_t kReduceChunk = 2048;

/// Ordered map-reduce over [0, n).
///
/// `map_chunk(begin, end)` returns the partial result of one chunk and
/// `combine(acc, partial)` folds partials left to right in chunk order.
template <typename T, typename MapChunk, typename Combine>
T chunked_reduce(std::size_t n, T init, MapChunk map_chunk, Combine combine, Execution exec = {}) {
  const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<T> partial(chunks, init);
  auto run = [&](std::size_t c) {
    const std::size_t b = c * kReduceChunk;
    partial[c] = map_chunk(b, std::min(n, b + kReduceChunk));
  };

  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(exec.threads, chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < chunks;) {
          try {
            run(c);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
  }

  T acc = init;
  for (const T& p : partial) combine(acc, p);
  return acc;
}

/// Parallel for over [0, n) with the same chunking.
template <typename Body>
void chunked_for(std::size_t n, Body body, Execution exec = {}) {
  struct Unit {};
  chunked_reduce<Unit>(
      n, Unit{},
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) body(i);
        return Unit{};
      },
      [](Unit&, const Unit&) {}, exec);
}

}  // namespace sl3obs
