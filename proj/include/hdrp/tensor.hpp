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

// Dense row-major tensors of 64-bit floats and the kernels built on them.
//
// Broadcasting rule (the only one supported): shapes are aligned at their
// trailing dimension; a missing leading dimension counts as 1, and two
// aligned dimensions are compatible when they are equal or one of them is 1.
//
// Serialized layout: u32 rank, u32 dims[rank], then the payload as
// little-endian IEEE-754 binary64 in row-major order.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace hdrp {

using Shape = std::vector<std::size_t>;

std::size_t num_elements(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  // Empty tensor of shape {0}.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  Tensor reshaped(Shape shape) const;
  void fill(double value);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

// Throws NumericError naming 'where' if t holds NaN or Inf.
void require_finite(const Tensor& t, const char* where);

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Output extent of a strided, zero-padded window. Throws ShapeError when the
// window does not fit or the stride does not divide the span exactly.
std::size_t window_output_size(std::size_t in, std::size_t window,
                               std::size_t stride, std::size_t padding);

// Cross-correlation: input C×H×W, kernels O×C×kH×kW -> O×H'×W'.
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding);
// Adjoints of conv2d with respect to its input and its kernels.
Tensor conv2d_input_grad(const Tensor& out_grad, const Tensor& kernels,
                         const Shape& input_shape, std::size_t stride,
                         std::size_t padding);
Tensor conv2d_kernel_grad(const Tensor& out_grad, const Tensor& input,
                          const Shape& kernel_shape, std::size_t stride,
                          std::size_t padding);

Tensor avgpool2d(const Tensor& input, std::size_t window, std::size_t stride);
Tensor avgpool2d_grad(const Tensor& out_grad, const Shape& input_shape,
                      std::size_t window, std::size_t stride);

// ---- elementwise -----------------------------------------------------------

enum class UnaryOp { kNeg, kRelu, kTanh, kExp, kAbs, kSquare };
enum class BinaryOp {
  kAdd, kSub, kMul, kDiv, kMax, kMin,
  kGreater, kGreaterEqual, kLess, kLessEqual, kEqual,  // yield 0.0 / 1.0
};
enum class Reduction { kSum, kMax, kMin, kMean };

Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor elementwise(UnaryOp op, const Tensor& a);
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(BinaryOp op, const Tensor& a, double scalar);
double reduce(Reduction op, const Tensor& a);

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kAdd, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kSub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kMul, a, b); }
inline Tensor scale(const Tensor& a, double s) { return elementwise(BinaryOp::kMul, a, s); }
inline Tensor relu(const Tensor& a) { return elementwise(UnaryOp::kRelu, a); }
inline Tensor tanh(const Tensor& a) { return elementwise(UnaryOp::kTanh, a); }
inline double sum(const Tensor& a) { return reduce(Reduction::kSum, a); }
inline double max(const Tensor& a) { return reduce(Reduction::kMax, a); }
inline double min(const Tensor& a) { return reduce(Reduction::kMin, a); }
inline double mean(const Tensor& a) { return reduce(Reduction::kMean, a); }

// ---- serialization ---------------------------------------------------------

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace hdrp
