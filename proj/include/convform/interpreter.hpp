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

#ifndef CONVFORM_INTERPRETER_HPP_
#define CONVFORM_INTERPRETER_HPP_

#include <functional>

#include "convform/checkpoint.hpp"
#include "convform/graph.hpp"
#include "convform/tensor.hpp"

namespace convform {

struct ExecOptions {
  // Called once per node, after its output edge is produced.
  std::function<void(EdgeId, const Tensor&)> observer;
};

// Runs the graph node by node. Works for both dialects; int8 Conv2d nodes
// dispatch on their weight dtype (i8 weights come from a quantized
// checkpoint overlay).
Tensor execute(const Graph& g, const Checkpoint& params, const Tensor& input,
               const ExecOptions& opts = {});

}  // namespace convform

#endif  // CONVFORM_INTERPRETER_HPP_
