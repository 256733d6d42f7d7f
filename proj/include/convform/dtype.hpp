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

#ifndef CONVFORM_DTYPE_HPP_
#define CONVFORM_DTYPE_HPP_

#include <cstddef>
#include <cstdint>
#include <string>

namespace convform {

enum class DType : std::uint8_t {
  F32 = 0,
  I8 = 1,
  I32 = 2,
};

inline constexpr std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::I8: return 1;
    case DType::I32: return 4;
  }
  return 0;
}

const char* dtype_name(DType t);
DType dtype_from_name(const std::string& name);

}  // namespace convform

#endif  // CONVFORM_DTYPE_HPP_
