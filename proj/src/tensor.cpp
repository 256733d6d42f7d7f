// Copyright 2026 The ConvForm Authors. All Rights Reserved.
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

#include "convform/tensor.hpp"

#include <sstream>

#include "convform/error.hpp"

namespace convform {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimError("tensor shape must have at least one dim");
  for (std::int64_t d : shape) {
    if (d < 1) {
      throw DimError("tensor dims must be positive, got " + shape_str(shape));
    }
  }
}

}  // namespace

template <typename T>
Tensor Tensor::adopt(DType dtype, Shape shape, std::vector<T>&& data) {
  check_shape(shape);
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  if (data.size() * sizeof(T) != n * dtype_size(dtype)) {
    throw DimError("buffer of " + std::to_string(data.size() * sizeof(T)) +
                   " bytes does not match shape " + shape_str(shape));
  }
  auto keep = std::make_shared<std::vector<T>>(std::move(data));
  Tensor t;
  t.dtype_ = dtype;
  t.shape_ = std::move(shape);
  t.data_ = reinterpret_cast<const std::byte*>(keep->data());
  t.nbytes_ = keep->size() * sizeof(T);
  t.storage_ = std::move(keep);
  return t;
}

Tensor Tensor::zeros(DType dtype, Shape shape) {
  check_shape(shape);
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  std::vector<std::byte> buf(n * dtype_size(dtype), std::byte{0});
  return adopt(dtype, std::move(shape), std::move(buf));
}

Tensor Tensor::full_f32(Shape shape, float value) {
  check_shape(shape);
  std::vector<float> buf(static_cast<std::size_t>(shape_numel(shape)), value);
  return adopt(DType::F32, std::move(shape), std::move(buf));
}

Tensor Tensor::from_f32(Shape shape, std::vector<float> data) {
  return adopt(DType::F32, std::move(shape), std::move(data));
}

Tensor Tensor::from_i8(Shape shape, std::vector<std::int8_t> data) {
  return adopt(DType::I8, std::move(shape), std::move(data));
}

Tensor Tensor::from_i32(Shape shape, std::vector<std::int32_t> data) {
  return adopt(DType::I32, std::move(shape), std::move(data));
}

Tensor Tensor::from_bytes(DType dtype, Shape shape,
                          std::vector<std::byte> data) {
  return adopt(dtype, std::move(shape), std::move(data));
}

std::int64_t Tensor::dim(std::int64_t axis) const {
  if (axis < 0 || axis >= rank()) {
    throw DimError("axis " + std::to_string(axis) + " out of range for " +
                   shape_str(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

std::span<const std::byte> Tensor::bytes() const {
  if (empty()) throw DimError("access to empty tensor");
  return {data_, nbytes_};
}

void Tensor::check_dtype(DType want) const {
  if (empty()) throw DimError("access to empty tensor");
  if (dtype_ != want) {
    throw DimError(std::string("tensor is ") + dtype_name(dtype_) + ", not " +
                   dtype_name(want));
  }
}

std::span<const float> Tensor::f32() const {
  check_dtype(DType::F32);
  return {reinterpret_cast<const float*>(data_), nbytes_ / sizeof(float)};
}

std::span<const std::int8_t> Tensor::i8() const {
  check_dtype(DType::I8);
  return {reinterpret_cast<const std::int8_t*>(data_), nbytes_};
}

std::span<const std::int32_t> Tensor::i32() const {
  check_dtype(DType::I32);
  return {reinterpret_cast<const std::int32_t*>(data_),
          nbytes_ / sizeof(std::int32_t)};
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (empty()) throw DimError("reshape of empty tensor");
  check_shape(new_shape);
  if (shape_numel(new_shape) != numel()) {
    throw DimError("cannot reshape " + shape_str(shape_) + " to " +
                   shape_str(new_shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(new_shape);
  return t;
}

}  // namespace convform
