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

#ifndef CONVFORM_BUILDER_HPP_
#define CONVFORM_BUILDER_HPP_

#include "convform/config.hpp"
#include "convform/graph.hpp"

namespace convform {

// Builds the original-dialect graph: patch embedding, class (and optional
// distillation) token, position embedding, pre-norm attention/FFN blocks,
// final norm and classifier head(s). Distilled models average the two head
// outputs.
Graph build_deit(const ModelConfig& config, std::int64_t batch = 1);

// Total learnable parameter count of the model described by `config`.
std::int64_t param_count(const ModelConfig& config);

}  // namespace convform

#endif  // CONVFORM_BUILDER_HPP_
