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

#include "hdrp/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "hdrp/errors.hpp"

namespace hdrp {

std::size_t num_elements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{0} {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(num_elements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (num_elements(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " needs " +
                     std::to_string(num_elements(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank does not match tensor " + shape_string(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range");
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(index)];
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(index)];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (num_elements(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                     shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor& t, const char* where) {
  if (!t.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + where);
  }
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul dimension mismatch: " + shape_string(a.shape()) +
                     " . " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += aip * B[p * n + j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs a matrix");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

std::size_t window_output_size(std::size_t in, std::size_t window,
                               std::size_t stride, std::size_t padding) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  if (window == 0) throw ShapeError("window must be >= 1");
  const std::size_t span = in + 2 * padding;
  if (window > span) {
    throw ShapeError("window " + std::to_string(window) +
                     " does not fit padded extent " + std::to_string(span));
  }
  if ((span - window) % stride != 0) {
    throw ShapeError("non-integral output size: (" + std::to_string(span) +
                     " - " + std::to_string(window) + ") / " +
                     std::to_string(stride));
  }
  return (span - window) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t c, h, w, o, kh, kw, oh, ow, stride, pad;
};

ConvGeometry conv_geometry(const Shape& input, const Shape& kernels,
                           std::size_t stride, std::size_t padding) {
  if (input.size() != 3 || kernels.size() != 4) {
    throw ShapeError("conv2d expects C×H×W input and O×C×kH×kW kernels, got " +
                     shape_string(input) + " and " + shape_string(kernels));
  }
  if (kernels[1] != input[0]) {
    throw ShapeError("conv2d channel mismatch: " + shape_string(input) +
                     " vs " + shape_string(kernels));
  }
  ConvGeometry g{};
  g.c = input[0];
  g.h = input[1];
  g.w = input[2];
  g.o = kernels[0];
  g.kh = kernels[2];
  g.kw = kernels[3];
  g.stride = stride;
  g.pad = padding;
  g.oh = window_output_size(g.h, g.kh, stride, padding);
  g.ow = window_output_size(g.w, g.kw, stride, padding);
  return g;
}

// Visits every (output, kernel tap, input) triple that touches real input.
template <typename F>
void for_each_tap(const ConvGeometry& g, F&& f) {
  for (std::size_t o = 0; o < g.o; ++o)
    for (std::size_t y = 0; y < g.oh; ++y)
      for (std::size_t x = 0; x < g.ow; ++x) {
        const std::size_t out_idx = (o * g.oh + y) * g.ow + x;
        for (std::size_t c = 0; c < g.c; ++c)
          for (std::size_t i = 0; i < g.kh; ++i) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(y * g.stride + i) -
                static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            for (std::size_t j = 0; j < g.kw; ++j) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(x * g.stride + j) -
                  static_cast<std::ptrdiff_t>(g.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
              const std::size_t in_idx =
                  (c * g.h + static_cast<std::size_t>(iy)) * g.w +
                  static_cast<std::size_t>(ix);
              const std::size_t k_idx = ((o * g.c + c) * g.kh + i) * g.kw + j;
              f(out_idx, k_idx, in_idx);
            }
          }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding) {
  const auto g = conv_geometry(input.shape(), kernels.shape(), stride, padding);
  Tensor out({g.o, g.oh, g.ow});
  auto O = out.data();
  auto I = input.data();
  auto K = kernels.data();
  for_each_tap(g, [&](std::size_t oi, std::size_t ki, std::size_t ii) {
    O[oi] += K[ki] * I[ii];
  });
  require_finite(out, "conv2d");
  return out;
}

Tensor conv2d_input_grad(const Tensor& out_grad, const Tensor& kernels,
                         const Shape& input_shape, std::size_t stride,
                         std::size_t padding) {
  const auto g = conv_geometry(input_shape, kernels.shape(), stride, padding);
  if (out_grad.shape() != Shape{g.o, g.oh, g.ow}) {
    throw ShapeError("conv2d_input_grad: output gradient has shape " +
                     shape_string(out_grad.shape()));
  }
  Tensor grad(input_shape);
  auto G = grad.data();
  auto D = out_grad.data();
  auto K = kernels.data();
  for_each_tap(g, [&](std::size_t oi, std::size_t ki, std::size_t ii) {
    G[ii] += K[ki] * D[oi];
  });
  require_finite(grad, "conv2d_input_grad");
  return grad;
}

Tensor conv2d_kernel_grad(const Tensor& out_grad, const Tensor& input,
                          const Shape& kernel_shape, std::size_t stride,
                          std::size_t padding) {
  const auto g = conv_geometry(input.shape(), kernel_shape, stride, padding);
  if (out_grad.shape() != Shape{g.o, g.oh, g.ow}) {
    throw ShapeError("conv2d_kernel_grad: output gradient has shape " +
                     shape_string(out_grad.shape()));
  }
  Tensor grad(kernel_shape);
  auto G = grad.data();
  auto D = out_grad.data();
  auto I = input.data();
  for_each_tap(g, [&](std::size_t oi, std::size_t ki, std::size_t ii) {
    G[ki] += I[ii] * D[oi];
  });
  require_finite(grad, "conv2d_kernel_grad");
  return grad;
}

Tensor avgpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  if (input.rank() != 3) throw ShapeError("avgpool2d expects C×H×W input");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = window_output_size(h, window, stride, 0);
  const std::size_t ow = window_output_size(w, window, stride, 0);
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t i = 0; i < window; ++i)
          for (std::size_t j = 0; j < window; ++j)
            acc += input[(ch * h + y * stride + i) * w + x * stride + j];
        out[(ch * oh + y) * ow + x] = acc * inv;
      }
  return out;
}

Tensor avgpool2d_grad(const Tensor& out_grad, const Shape& input_shape,
                      std::size_t window, std::size_t stride) {
  if (input_shape.size() != 3) throw ShapeError("avgpool2d expects C×H×W input");
  const std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  const std::size_t oh = window_output_size(h, window, stride, 0);
  const std::size_t ow = window_output_size(w, window, stride, 0);
  if (out_grad.shape() != Shape{c, oh, ow}) {
    throw ShapeError("avgpool2d_grad: output gradient has shape " +
                     shape_string(out_grad.shape()));
  }
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor grad(input_shape);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double d = out_grad[(ch * oh + y) * ow + x] * inv;
        for (std::size_t i = 0; i < window; ++i)
          for (std::size_t j = 0; j < window; ++j)
            grad[(ch * h + y * stride + i) * w + x * stride + j] += d;
      }
  return grad;
}

// ---- elementwise -----------------------------------------------------------

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shapes " + shape_string(a) + " and " + shape_string(b) +
                       " are not broadcast-compatible");
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

namespace {

double apply(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::kNeg: return -x;
    case UnaryOp::kRelu: return x > 0.0 ? x : 0.0;
    case UnaryOp::kTanh: return std::tanh(x);
    case UnaryOp::kExp: return std::exp(x);
    case UnaryOp::kAbs: return std::fabs(x);
    case UnaryOp::kSquare: return x * x;
  }
  return x;
}

double apply(BinaryOp op, double x, double y) {
  switch (op) {
    case BinaryOp::kAdd: return x + y;
    case BinaryOp::kSub: return x - y;
    case BinaryOp::kMul: return x * y;
    case BinaryOp::kDiv: return x / y;
    case BinaryOp::kMax: return std::max(x, y);
    case BinaryOp::kMin: return std::min(x, y);
    case BinaryOp::kGreater: return x > y ? 1.0 : 0.0;
    case BinaryOp::kGreaterEqual: return x >= y ? 1.0 : 0.0;
    case BinaryOp::kLess: return x < y ? 1.0 : 0.0;
    case BinaryOp::kLessEqual: return x <= y ? 1.0 : 0.0;
    case BinaryOp::kEqual: return x == y ? 1.0 : 0.0;
  }
  return x;
}

// Row-major strides of 'shape' right-aligned into 'rank' dims, with zero
// stride on broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const std::size_t src = shape.size() - 1 - k;
    const std::size_t dst = rank - 1 - k;
    strides[dst] = shape[src] == 1 ? 0 : stride;
    stride *= shape[src];
  }
  return strides;
}

}  // namespace

Tensor elementwise(UnaryOp op, const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i]);
  require_finite(out, "elementwise");
  return out;
}

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b[i]);
    require_finite(out, "elementwise");
    return out;
  }
  const Shape shape = broadcast_shape(a.shape(), b.shape());
  const auto sa = broadcast_strides(a.shape(), shape);
  const auto sb = broadcast_strides(b.shape(), shape);
  Tensor out(shape);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      ia += idx[d] * sa[d];
      ib += idx[d] * sb[d];
    }
    out[flat] = apply(op, a[ia], b[ib]);
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  require_finite(out, "elementwise");
  return out;
}

Tensor elementwise(BinaryOp op, const Tensor& a, double scalar) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], scalar);
  require_finite(out, "elementwise");
  return out;
}

double reduce(Reduction op, const Tensor& a) {
  if (a.size() == 0) {
    if (op == Reduction::kSum) return 0.0;
    throw ShapeError("reduction over an empty tensor");
  }
  auto d = a.data();
  switch (op) {
    case Reduction::kSum: {
      double s = 0.0;
      for (double v : d) s += v;
      return s;
    }
    case Reduction::kMax: return *std::max_element(d.begin(), d.end());
    case Reduction::kMin: return *std::min_element(d.begin(), d.end());
    case Reduction::kMean: {
      double s = 0.0;
      for (double v : d) s += v;
      return s / static_cast<double>(d.size());
    }
  }
  return 0.0;
}

// ---- serialization ---------------------------------------------------------

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

bool get_bytes(std::istream& in, unsigned char* b, std::size_t n) {
  in.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw ShapeError("dimension too large to serialize");
    }
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (double v : t.data()) put_f64(out, v);
  if (!out) throw IoError("failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
  unsigned char b[8];
  if (!get_bytes(in, b, 4)) throw FormatError("truncated tensor header");
  const std::uint32_t rank = b[0] | (b[1] << 8) | (b[2] << 16) |
                             (static_cast<std::uint32_t>(b[3]) << 24);
  if (rank > 16) throw FormatError("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    if (!get_bytes(in, b, 4)) throw FormatError("truncated tensor dims");
    d = b[0] | (b[1] << 8) | (b[2] << 16) |
        (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::vector<double> data(num_elements(shape));
  for (auto& v : data) {
    if (!get_bytes(in, b, 8)) throw FormatError("truncated tensor payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace hdrp
