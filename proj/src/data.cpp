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

#include "hdrp/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "hdrp/errors.hpp"
#include "hdrp/rng.hpp"

namespace hdrp {

Shape Dataset::sample_shape() const {
  const Shape& s = inputs.shape();
  return Shape(s.begin() + 1, s.end());
}

Tensor Dataset::sample(std::size_t i) const {
  const Shape shape = sample_shape();
  const std::size_t n = num_elements(shape);
  auto d = inputs.data();
  return Tensor(shape, std::vector<double>(d.begin() + i * n, d.begin() + (i + 1) * n));
}

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset is empty");
  if (inputs.rank() < 2 || inputs.dim(0) != labels.size()) {
    throw DataError("inputs " + shape_string(inputs.shape()) + " do not match " +
                    std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw DataError("label " + std::to_string(labels[i]) + " at index " +
                      std::to_string(i) + " is outside [0, " + std::to_string(classes) + ")");
    }
  }
}

// ---- IDX -------------------------------------------------------------------

namespace {

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

IdxArray parse_idx(const std::vector<std::uint8_t>& b) {
  if (b.size() < 4) throw FormatError("IDX truncated in magic at byte offset " + std::to_string(b.size()));
  if (b[0] != 0 || b[1] != 0) throw FormatError("IDX bad magic at byte offset 0");
  if (b[2] != 0x08) {
    throw FormatError("IDX unsupported element type at byte offset 2 (only unsigned byte)");
  }
  const std::size_t rank = b[3];
  if (rank == 0) throw FormatError("IDX rank 0 at byte offset 3");
  IdxArray a;
  std::size_t off = 4;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, off += 4) {
    if (off + 4 > b.size()) {
      throw FormatError("IDX truncated in dimensions at byte offset " + std::to_string(b.size()));
    }
    a.dims.push_back(be32(b, off));
    count *= a.dims.back();
  }
  if (b.size() < off + count) {
    throw FormatError("IDX truncated payload at byte offset " + std::to_string(b.size()) +
                      " (expected " + std::to_string(off + count) + " bytes)");
  }
  if (b.size() > off + count) {
    throw FormatError("IDX trailing bytes at byte offset " + std::to_string(off + count));
  }
  a.data.assign(b.begin() + static_cast<std::ptrdiff_t>(off), b.end());
  return a;
}

IdxArray read_idx(const std::filesystem::path& path) { return parse_idx(read_bytes(path)); }

std::vector<std::uint8_t> encode_idx(const IdxArray& a) {
  std::vector<std::uint8_t> b{0, 0, 0x08, static_cast<std::uint8_t>(a.dims.size())};
  for (auto d : a.dims) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(d >> s));
  }
  b.insert(b.end(), a.data.begin(), a.data.end());
  return b;
}

void write_idx(const std::filesystem::path& path, const IdxArray& a) {
  const auto bytes = encode_idx(a);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::filesystem::path& labels, std::size_t classes) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  if (lab.dims.size() != 1) throw FormatError("IDX label file must have rank 1");
  if (img.dims.size() < 2 || img.dims.size() > 4) throw FormatError("IDX image file must have rank 2-4");
  if (img.dims[0] != lab.dims[0]) throw DataError("image and label counts differ");

  Shape shape(img.dims.begin(), img.dims.end());
  if (shape.size() == 3) shape.insert(shape.begin() + 1, 1);
  Dataset d;
  std::vector<double> px(img.data.size());
  std::transform(img.data.begin(), img.data.end(), px.begin(),
                 [](std::uint8_t v) { return static_cast<double>(v) / 255.0; });
  d.inputs = Tensor(shape, std::move(px));
  d.labels.assign(lab.data.begin(), lab.data.end());
  d.classes = classes;
  if (classes == 0 && !d.labels.empty()) {
    d.classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  }
  d.split = images.filename().string();
  d.validate();
  return d;
}

void save_idx(const Dataset& data, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
  IdxArray img, lab;
  Shape shape = data.inputs.shape();
  if (shape.size() == 4 && shape[1] == 1) shape.erase(shape.begin() + 1);
  for (auto d : shape) img.dims.push_back(static_cast<std::uint32_t>(d));
  img.data.reserve(data.inputs.size());
  for (double v : data.inputs.data()) {
    img.data.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  lab.dims = {static_cast<std::uint32_t>(data.labels.size())};
  for (auto l : data.labels) {
    if (l > 255) throw DataError("label does not fit in an unsigned byte");
    lab.data.push_back(static_cast<std::uint8_t>(l));
  }
  write_idx(images, img);
  write_idx(labels, lab);
}

// ---- synthetic task ----------------------------------------------------------

Dataset synth_patterns(std::size_t classes, std::size_t per_class, std::size_t dim,
                       double margin, double sigma, Rng& rng) {
  if (!(margin > 0.0)) throw ParameterError("margin must be > 0");
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be >= 0");
  if (classes < 2 || per_class == 0) throw ParameterError("need >= 2 classes and >= 1 sample per class");
  const std::size_t block = dim / classes;
  if (block == 0) throw ParameterError("dim must be >= classes");
  const double height = margin / std::sqrt(2.0 * static_cast<double>(block));
  if (height > 1.0) {
    throw ParameterError("margin too large for [0, 1] inputs at this dim/classes");
  }
  const double radius = margin / 2.0;

  Dataset d;
  d.classes = classes;
  d.split = "synthetic";
  const std::size_t n = classes * per_class;
  std::vector<double> x(n * dim, 0.0);
  d.labels.resize(n);
  std::vector<double> noise(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    d.labels[i] = c;
    double norm2;
    do {
      norm2 = 0.0;
      for (auto& e : noise) {
        e = rng.gaussian(0.0, sigma);
        norm2 += e * e;
      }
    } while (std::sqrt(norm2) >= radius);
    for (std::size_t j = 0; j < dim; ++j) {
      const bool own = j >= c * block && j < (c + 1) * block;
      x[i * dim + j] = std::clamp((own ? height : 0.0) + noise[j], 0.0, 1.0);
    }
  }
  d.inputs = Tensor({n, dim}, std::move(x));
  return d;
}

Dataset apply_noise(const Dataset& data, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw ParameterError("noise sigma must be >= 0");
  Dataset out = data;
  if (spec.sigma == 0.0) return out;
  const std::size_t per = num_elements(data.sample_shape());
  auto v = out.inputs.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng = Rng::substream(spec.seed, i);
    for (std::size_t j = 0; j < per; ++j) {
      double x = v[i * per + j] + rng.gaussian(0.0, spec.sigma);
      if (spec.clip) x = std::clamp(x, 0.0, 1.0);
      v[i * per + j] = x;
    }
  }
  return out;
}

std::uint64_t dataset_checksum(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (double v : data.inputs.data()) mix(std::bit_cast<std::uint64_t>(v));
  for (auto l : data.labels) mix(l);
  return h;
}

}  // namespace hdrp
