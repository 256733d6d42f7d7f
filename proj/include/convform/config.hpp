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

#ifndef CONVFORM_CONFIG_HPP_
#define CONVFORM_CONFIG_HPP_

#include <cstdint>
#include <string>

namespace convform {

struct ModelConfig {
  std::string variant = "custom";
  std::int64_t embed_dim = 0;
  std::int64_t heads = 0;
  std::int64_t depth = 0;
  std::int64_t patch = 0;
  std::int64_t img_size = 0;
  double mlp_ratio = 4.0;
  bool distilled = false;
  std::int64_t num_classes = 1000;
  float eps = 1e-6f;

  std::int64_t grid() const { return img_size / patch; }
  std::int64_t patches() const { return grid() * grid(); }
  std::int64_t tokens() const { return patches() + 1 + (distilled ? 1 : 0); }
  std::int64_t head_dim() const { return embed_dim / heads; }
  std::int64_t ffn_dim() const {
    return static_cast<std::int64_t>(mlp_ratio * static_cast<double>(embed_dim));
  }

  // Throws ConfigError on inconsistent fields.
  void check() const;

  static ModelConfig tiny(bool distilled = false);
  static ModelConfig small(bool distilled = false);
  static ModelConfig base(bool distilled = false);
  // Miniature config for fast tests: 8x8 images, 4x4 patches, depth 2.
  static ModelConfig toy(bool distilled = false);
  // Accepts "toy", "tiny", "small", "base", optionally with "-distilled".
  static ModelConfig preset(const std::string& name);
};

std::string config_to_json_string(const ModelConfig& c);
ModelConfig config_from_json_string(const std::string& text);

}  // namespace convform

#endif  // CONVFORM_CONFIG_HPP_
