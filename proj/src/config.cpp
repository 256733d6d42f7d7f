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

#include "convform/config.hpp"

#include "convform/error.hpp"
#include "json.hpp"

namespace convform {

void ModelConfig::check() const {
  if (embed_dim < 1 || heads < 1 || depth < 1 || patch < 1 || img_size < 1 ||
      num_classes < 1) {
    throw ConfigError("config fields must be positive");
  }
  if (embed_dim % heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (img_size % patch != 0) {
    throw ConfigError("img_size " + std::to_string(img_size) +
                      " is not divisible by patch " + std::to_string(patch));
  }
  if (mlp_ratio <= 0.0 || ffn_dim() < 1) {
    throw ConfigError("mlp_ratio must be positive");
  }
  if (!(eps > 0.0f)) {
    throw ConfigError("eps must be positive");
  }
}

namespace {

ModelConfig standard(const char* variant, std::int64_t dim, std::int64_t heads,
                     bool distilled) {
  ModelConfig c;
  c.variant = variant;
  c.embed_dim = dim;
  c.heads = heads;
  c.depth = 12;
  c.patch = 16;
  c.img_size = 224;
  c.mlp_ratio = 4.0;
  c.distilled = distilled;
  c.num_classes = 1000;
  return c;
}

}  // namespace

ModelConfig ModelConfig::tiny(bool distilled) {
  return standard("tiny", 192, 3, distilled);
}

ModelConfig ModelConfig::small(bool distilled) {
  return standard("small", 384, 6, distilled);
}

ModelConfig ModelConfig::base(bool distilled) {
  return standard("base", 768, 12, distilled);
}

ModelConfig ModelConfig::toy(bool distilled) {
  ModelConfig c;
  c.variant = "toy";
  c.embed_dim = 64;
  c.heads = 2;
  c.depth = 2;
  c.patch = 4;
  c.img_size = 8;
  c.mlp_ratio = 4.0;
  c.distilled = distilled;
  c.num_classes = 10;
  return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  std::string base_name = name;
  bool distilled = false;
  const std::string suffix = "-distilled";
  if (base_name.size() > suffix.size() &&
      base_name.compare(base_name.size() - suffix.size(), suffix.size(),
                        suffix) == 0) {
    distilled = true;
    base_name.resize(base_name.size() - suffix.size());
  }
  if (base_name == "toy") return toy(distilled);
  if (base_name == "tiny") return tiny(distilled);
  if (base_name == "small") return small(distilled);
  if (base_name == "base") return base(distilled);
  throw ConfigError("unknown preset '" + name +
                    "' (want toy|tiny|small|base, optionally -distilled)");
}

std::string config_to_json_string(const ModelConfig& c) {
  nlohmann::json j;
  j["variant"] = c.variant;
  j["embed_dim"] = c.embed_dim;
  j["heads"] = c.heads;
  j["depth"] = c.depth;
  j["patch"] = c.patch;
  j["img_size"] = c.img_size;
  j["mlp_ratio"] = c.mlp_ratio;
  j["distilled"] = c.distilled;
  j["num_classes"] = c.num_classes;
  j["eps"] = c.eps;
  return j.dump(2) + "\n";
}

ModelConfig config_from_json_string(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.variant = j.value("variant", std::string("custom"));
    c.embed_dim = j.at("embed_dim").get<std::int64_t>();
    c.heads = j.at("heads").get<std::int64_t>();
    c.depth = j.at("depth").get<std::int64_t>();
    c.patch = j.at("patch").get<std::int64_t>();
    c.img_size = j.at("img_size").get<std::int64_t>();
    c.mlp_ratio = j.value("mlp_ratio", 4.0);
    c.distilled = j.value("distilled", false);
    c.num_classes = j.value("num_classes", std::int64_t{1000});
    c.eps = j.value("eps", 1e-6f);
    c.check();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config json is malformed: ") + e.what());
  }
}

}  // namespace convform
