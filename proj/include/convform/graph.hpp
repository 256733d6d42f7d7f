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

#ifndef CONVFORM_GRAPH_HPP_
#define CONVFORM_GRAPH_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "convform/dtype.hpp"
#include "convform/tensor.hpp"

namespace convform {

using NodeId = std::int32_t;
using EdgeId = std::int32_t;

enum class OpKind : std::uint8_t {
  PatchEmbed,
  TokenInsert,
  AddPosEmbed,
  Linear,
  Head,
  LayerNorm,
  Conv2d,
  MatMulQK,
  MatMulAV,
  Softmax,
  Gelu,
  Add,
  Sub,
  Mul,
  MulScalar,
  Square,
  RsqrtEps,
  Permute,
  Reshape,
  Concat,
  Slice,
  Quantize,
  Dequantize,
};

const char* op_kind_name(OpKind k);
OpKind op_kind_from_name(const std::string& name);

using AttrValue =
    std::variant<std::int64_t, double, std::string, std::vector<std::int64_t>>;
using AttrMap = std::map<std::string, AttrValue>;

struct OpNode {
  NodeId id = -1;
  OpKind kind = OpKind::Add;
  AttrMap attrs;
  std::vector<EdgeId> inputs;
  std::vector<std::string> param_names;
  EdgeId output = -1;

  bool has_attr(const std::string& key) const;
  std::int64_t attr_int(const std::string& key) const;
  double attr_float(const std::string& key) const;
  const std::string& attr_str(const std::string& key) const;
  const std::vector<std::int64_t>& attr_ints(const std::string& key) const;
};

struct Edge {
  EdgeId id = -1;
  Shape shape;
  DType dtype = DType::F32;
};

enum class Dialect : std::uint8_t { Original, Lowered };
enum class Layout : std::uint8_t { TokensLast, ChannelsFirst };

const char* dialect_name(Dialect d);
const char* layout_name(Layout l);

struct ParamInfo {
  Shape shape;
  DType dtype = DType::F32;
  // Synthesized params are constant-filled at weight inheritance instead of
  // being copied from a source checkpoint.
  bool synth = false;
  double fill = 0.0;
};

// Static-shape DAG. `nodes` is kept in topological order; every edge has
// exactly one producer except the graph input. Parameters live in a named
// side table, referenced from nodes by name.
struct Graph {
  Dialect dialect = Dialect::Original;
  Layout layout = Layout::TokensLast;
  std::vector<OpNode> nodes;
  std::vector<Edge> edges;
  EdgeId input = -1;
  EdgeId output = -1;
  std::map<std::string, ParamInfo> params;

  EdgeId add_edge(Shape shape, DType dtype = DType::F32);
  // Appends a node and creates its output edge.
  EdgeId add_node(OpKind kind, AttrMap attrs, std::vector<EdgeId> inputs,
                  std::vector<std::string> param_names, Shape out_shape,
                  DType out_dtype = DType::F32);
  NodeId fresh_node_id() const;

  const OpNode& node(NodeId id) const;
  OpNode& node(NodeId id);
  std::optional<std::size_t> node_index(NodeId id) const;
  const Edge& edge(EdgeId id) const;
  Edge& edge(EdgeId id);
  // Producer node id of an edge, or nullopt for the graph input.
  std::optional<NodeId> producer(EdgeId id) const;
  std::vector<NodeId> consumers(EdgeId id) const;
  const ParamInfo& param(const std::string& name) const;

  std::int64_t count_kind(OpKind k) const;
};

// Recomputes every node output shape/dtype from the graph input edge,
// in topological order. Throws on inconsistency.
void infer_shapes(Graph& g);

// Infers the output shape/dtype of one node from its current input edges
// and the param table.
std::pair<Shape, DType> infer_node_output(const Graph& g, const OpNode& n);

// Structural and semantic diagnostics; an empty result means valid.
std::vector<std::string> validate(const Graph& g);

std::string graph_to_json_string(const Graph& g);
Graph graph_from_json_string(const std::string& text);
void save_graph(const Graph& g, const std::filesystem::path& path);
Graph load_graph(const std::filesystem::path& path);

}  // namespace convform

#endif  // CONVFORM_GRAPH_HPP_
