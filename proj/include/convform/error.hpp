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

#ifndef CONVFORM_ERROR_HPP_
#define CONVFORM_ERROR_HPP_

#include <stdexcept>

namespace convform {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or axis mismatch between operands.
struct DimError : Error {
  using Error::Error;
};

// Kernel/stride geometry that cannot tile the input extent.
struct GeometryError : Error {
  using Error::Error;
};

// Non-finite values or domain violations inside a numeric kernel.
struct NumericError : Error {
  using Error::Error;
};

// Invalid or inconsistent model configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed, truncated or unrecognized serialized data.
struct FormatError : Error {
  using Error::Error;
};

// Missing or duplicate named parameter.
struct ParamError : Error {
  using Error::Error;
};

// Rewrite pass applied out of order or to an ineligible graph.
struct PassError : Error {
  using Error::Error;
};

// Missing or unusable calibration statistics.
struct CalibrationError : Error {
  using Error::Error;
};

// Integer accumulation could overflow its accumulator type.
struct CapacityError : Error {
  using Error::Error;
};

}  // namespace convform

#endif  // CONVFORM_ERROR_HPP_
