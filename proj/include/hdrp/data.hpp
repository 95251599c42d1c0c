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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hdrp/tensor.hpp"

namespace hdrp {

class Rng;

struct Dataset {
  Tensor inputs;                    // [N, ...sample shape], values in [0, 1]
  std::vector<std::size_t> labels;  // [N]
  std::size_t classes = 0;
  std::string split;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  Tensor sample(std::size_t i) const;
  // Throws DataError unless N > 0, labels < classes, inputs match labels.
  void validate() const;
};

// Raw IDX array: big-endian header (two zero bytes, type code, rank, u32
// dims) followed by the payload. Only unsigned-byte payloads (0x08).
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

// Throw FormatError with the failing byte offset.
IdxArray read_idx(const std::filesystem::path& path);
IdxArray parse_idx(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_idx(const IdxArray& array);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

// Loads an image file ([N, H, W] becomes [N, 1, H, W]; [N, D] and
// [N, C, H, W] are kept) with pixels scaled by 1/255, and its label file.
// classes == 0 infers max(label) + 1.
Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels, std::size_t classes = 0);
// Inverse of load_idx for [0, 1] inputs (rounded to the nearest byte).
void save_idx(const Dataset& data, const std::filesystem::path& images,
              const std::filesystem::path& labels);

// Gaussian clusters around block prototypes: class c is 'height' on its own
// block of dim / classes coordinates and 0 elsewhere, with height chosen so
// every pair of prototypes is exactly 'margin' apart. Per-coordinate noise is
// N(0, sigma^2), redrawn until its norm is below margin / 2, then clipped to
// [0, 1]; the nearest prototype is therefore always the true class.
// Samples are interleaved by class, so classes are exactly balanced.
Dataset synth_patterns(std::size_t classes, std::size_t per_class, std::size_t dim,
                       double margin, double sigma, Rng& rng);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  bool clip = true;
};

// x + N(0, sigma^2) per element, sample i drawing from Rng::substream(seed, i).
Dataset apply_noise(const Dataset& data, const NoiseSpec& spec);

// FNV-1a 64 over the payload bytes and labels.
std::uint64_t dataset_checksum(const Dataset& data);

}  // namespace hdrp
