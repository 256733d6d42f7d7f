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

#ifndef CONVFORM_RANDOM_HPP_
#define CONVFORM_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace convform {

// Deterministic RNG. std::normal_distribution is implementation-defined, so
// gaussians come from a hand-rolled Box-Muller transform to keep artifacts
// byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next_u64() { return gen_(); }

  double normal(double mean = 0.0, double stddev = 1.0);

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace convform

#endif  // CONVFORM_RANDOM_HPP_
