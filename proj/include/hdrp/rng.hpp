/* Copyright 2026 The HDRP-SNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

#include "hdrp/tensor.hpp"

namespace hdrp {

// Deterministic random stream.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++
// standard, so a seed reproduces the same bits on every conforming platform.
// The standard distributions are implementation-defined, so every transform
// here is written out:
//   uniform()       top 53 bits of one engine draw, scaled to [0, 1)
//   uniform_index() rejection sampling on the full 64-bit draw (unbiased)
//   gaussian()      Marsaglia polar method; the second variate of each
//                   accepted pair is cached and returned by the next call
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream for item 'index' of the run seeded with 'seed'
  // (splitmix64 mix of both), so per-item draws do not depend on order.
  static Rng substream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  std::uint64_t uniform_index(std::uint64_t n);
  double gaussian();
  double gaussian(double mean, double sigma);

  // Fisher-Yates using uniform_index.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// i.i.d. N(mean, sigma^2) samples; sigma == 0 yields the constant mean.
// Throws ParameterError for sigma < 0.
Tensor rng_gaussian(Rng& rng, const Shape& shape, double mean, double sigma);
Tensor rng_uniform(Rng& rng, const Shape& shape, double lo, double hi);

}  // namespace hdrp
