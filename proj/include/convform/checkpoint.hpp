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

#ifndef CONVFORM_CHECKPOINT_HPP_
#define CONVFORM_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "convform/graph.hpp"
#include "convform/tensor.hpp"

namespace convform {

struct CheckpointMeta {
  std::string variant;
  bool distilled = false;
  std::int64_t num_classes = 0;
};

// Named tensor collection with a stable manifest order (insertion order,
// preserved across save/load).
class Checkpoint {
 public:
  void add(const std::string& name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  CheckpointMeta meta;

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor> tensors_;
};

// DCKP container: magic, version, JSON manifest, packed little-endian blob.
void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// SBT container for a single tensor.
void save_tensor_sbt(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor_sbt(const std::filesystem::path& path);

// Draws every non-synthesized graph param in manifest (name) order:
// gamma ~ N(1, 0.05), beta ~ N(0, 0.05), everything else N(0, 0.02).
// Synthesized params get their declared constant fill.
Checkpoint random_checkpoint(const Graph& g, std::uint64_t seed,
                             CheckpointMeta meta = {});

// Maps a source checkpoint onto a lowered graph's param table: reshapes
// copied weights to their declared shapes and materializes synthesized
// constants. Source names must match the non-synthesized params exactly.
Checkpoint inherit_weights(const Checkpoint& src, const Graph& lowered);

// base entries shadowed by over entries; manifest keeps base order first.
Checkpoint overlay(const Checkpoint& base, const Checkpoint& over);

}  // namespace convform

#endif  // CONVFORM_CHECKPOINT_HPP_
