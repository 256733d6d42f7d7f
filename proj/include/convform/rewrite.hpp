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

#ifndef CONVFORM_REWRITE_HPP_
#define CONVFORM_REWRITE_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "convform/graph.hpp"

namespace convform {

// One node-level rewrite: `old_id` was modified in place (new_ids == {old_id}),
// expanded into `new_ids`, or anchored an insertion of `new_ids` after it.
struct NodeRewrite {
  NodeId old_id = -1;
  std::vector<NodeId> new_ids;
};

struct PassRecord {
  std::string pass;
  std::vector<NodeRewrite> applied;
};

struct RewritePlan {
  std::vector<PassRecord> passes;
};

std::string plan_to_json_string(const RewritePlan& plan);
RewritePlan plan_from_json_string(const std::string& text);
void save_plan(const RewritePlan& plan, const std::filesystem::path& path);
RewritePlan load_plan(const std::filesystem::path& path);

// Moves the token stream from (B, N, C) to (B, C, 1, N). Inserts a
// Permute+Reshape pair after AddPosEmbed, relabels Slice axes, flips the
// head split/merge Reshape+Permute pairs so attention still sees
// (B*heads, N, head_dim) tensors, and reshapes the classifier tail to keep
// (B, K) logits. Value-preserving: every op sees the same numbers in the
// same order. No-op if the graph is already channels-first.
Graph layout_to_nchw(const Graph& g, PassRecord& rec);

// Turns every Linear and Head node into a 1x1 Conv2d over the (B, C, 1, N)
// activation, redeclaring the (O, I) weight as (O, I, 1, 1). Inputs must
// already be rank 4; run layout_to_nchw first.
Graph linear_to_conv(const Graph& g, PassRecord& rec);

// Expands every LayerNorm into mean/variance convs plus elementwise ops:
//   mu  = Conv(x, 1/C)          (1, C, 1, 1) weights, synthesized
//   d   = x - mu
//   var = Conv(d^2, 1/C)
//   out = (d * rsqrt(var + eps)) * gamma + beta
// gamma/beta are redeclared as (1, C, 1, 1); the mean convs carry an
// origin="ln_mean" attr so quantization can keep them in f32.
Graph layernorm_to_conv(const Graph& g, PassRecord& rec);

// Runs the three passes in order on an Original-dialect graph and returns
// the Lowered graph plus the plan describing every rewritten node.
std::pair<Graph, RewritePlan> lower(const Graph& original);

}  // namespace convform

#endif  // CONVFORM_REWRITE_HPP_
