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

#ifndef CONVFORM_TENSOR_HPP_
#define CONVFORM_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "convform/dtype.hpp"

namespace convform {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor. The payload is immutable once constructed; copies
// and reshapes share storage. A default-constructed Tensor is empty and any
// data access on it throws.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(DType dtype, Shape shape);
  static Tensor full_f32(Shape shape, float value);
  static Tensor from_f32(Shape shape, std::vector<float> data);
  static Tensor from_i8(Shape shape, std::vector<std::int8_t> data);
  static Tensor from_i32(Shape shape, std::vector<std::int32_t> data);
  static Tensor from_bytes(DType dtype, Shape shape,
                           std::vector<std::byte> data);

  bool empty() const { return data_ == nullptr; }
  DType dtype() const { return dtype_; }
  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t numel() const { return shape_numel(shape_); }
  std::size_t nbytes() const { return nbytes_; }

  std::span<const std::byte> bytes() const;
  std::span<const float> f32() const;
  std::span<const std::int8_t> i8() const;
  std::span<const std::int32_t> i32() const;

  // O(1); shares storage with *this. Element count must match.
  Tensor reshaped(Shape new_shape) const;

 private:
  template <typename T>
  static Tensor adopt(DType dtype, Shape shape, std::vector<T>&& data);
  void check_dtype(DType want) const;

  DType dtype_ = DType::F32;
  Shape shape_;
  std::shared_ptr<const void> storage_;
  const std::byte* data_ = nullptr;
  std::size_t nbytes_ = 0;
};

}  // namespace convform

#endif  // CONVFORM_TENSOR_HPP_
