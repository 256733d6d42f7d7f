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

#include "convform/graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "convform/error.hpp"
#include "json.hpp"

namespace convform {

namespace {

struct KindName {
  OpKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {OpKind::PatchEmbed, "PatchEmbed"},
    {OpKind::TokenInsert, "TokenInsert"},
    {OpKind::AddPosEmbed, "AddPosEmbed"},
    {OpKind::Linear, "Linear"},
    {OpKind::Head, "Head"},
    {OpKind::LayerNorm, "LayerNorm"},
    {OpKind::Conv2d, "Conv2d"},
    {OpKind::MatMulQK, "MatMulQK"},
    {OpKind::MatMulAV, "MatMulAV"},
    {OpKind::Softmax, "Softmax"},
    {OpKind::Gelu, "Gelu"},
    {OpKind::Add, "Add"},
    {OpKind::Sub, "Sub"},
    {OpKind::Mul, "Mul"},
    {OpKind::MulScalar, "MulScalar"},
    {OpKind::Square, "Square"},
    {OpKind::RsqrtEps, "RsqrtEps"},
    {OpKind::Permute, "Permute"},
    {OpKind::Reshape, "Reshape"},
    {OpKind::Concat, "Concat"},
    {OpKind::Slice, "Slice"},
    {OpKind::Quantize, "Quantize"},
    {OpKind::Dequantize, "Dequantize"},
};

}  // namespace

const char* op_kind_name(OpKind k) {
  for (const auto& e : kKindNames) {
    if (e.kind == k) return e.name;
  }
  return "invalid";
}

OpKind op_kind_from_name(const std::string& name) {
  for (const auto& e : kKindNames) {
    if (name == e.name) return e.kind;
  }
  throw FormatError("unknown op kind: " + name);
}

const char* dialect_name(Dialect d) {
  return d == Dialect::Original ? "original" : "lowered";
}

const char* layout_name(Layout l) {
  return l == Layout::TokensLast ? "tokens_last" : "channels_first";
}

bool OpNode::has_attr(const std::string& key) const {
  return attrs.count(key) != 0;
}

namespace {

const AttrValue& attr_or_throw(const OpNode& n, const std::string& key) {
  auto it = n.attrs.find(key);
  if (it == n.attrs.end()) {
    throw DimError(std::string(op_kind_name(n.kind)) + " node " +
                   std::to_string(n.id) + " is missing attr '" + key + "'");
  }
  return it->second;
}

}  // namespace

std::int64_t OpNode::attr_int(const std::string& key) const {
  const auto& v = attr_or_throw(*this, key);
  if (const auto* p = std::get_if<std::int64_t>(&v)) return *p;
  throw DimError("attr '" + key + "' of node " + std::to_string(id) +
                 " is not an int");
}

double OpNode::attr_float(const std::string& key) const {
  const auto& v = attr_or_throw(*this, key);
  if (const auto* p = std::get_if<double>(&v)) return *p;
  if (const auto* p = std::get_if<std::int64_t>(&v)) {
    return static_cast<double>(*p);
  }
  throw DimError("attr '" + key + "' of node " + std::to_string(id) +
                 " is not a float");
}

const std::string& OpNode::attr_str(const std::string& key) const {
  const auto& v = attr_or_throw(*this, key);
  if (const auto* p = std::get_if<std::string>(&v)) return *p;
  throw DimError("attr '" + key + "' of node " + std::to_string(id) +
                 " is not a string");
}

const std::vector<std::int64_t>& OpNode::attr_ints(
    const std::string& key) const {
  const auto& v = attr_or_throw(*this, key);
  if (const auto* p = std::get_if<std::vector<std::int64_t>>(&v)) return *p;
  throw DimError("attr '" + key + "' of node " + std::to_string(id) +
                 " is not an int list");
}

EdgeId Graph::add_edge(Shape shape, DType dtype) {
  Edge e;
  e.id = static_cast<EdgeId>(edges.size());
  e.shape = std::move(shape);
  e.dtype = dtype;
  edges.push_back(std::move(e));
  return edges.back().id;
}

EdgeId Graph::add_node(OpKind kind, AttrMap attrs, std::vector<EdgeId> inputs,
                       std::vector<std::string> param_names, Shape out_shape,
                       DType out_dtype) {
  OpNode n;
  n.id = fresh_node_id();
  n.kind = kind;
  n.attrs = std::move(attrs);
  n.inputs = std::move(inputs);
  n.param_names = std::move(param_names);
  n.output = add_edge(std::move(out_shape), out_dtype);
  nodes.push_back(std::move(n));
  return nodes.back().output;
}

NodeId Graph::fresh_node_id() const {
  NodeId mx = -1;
  for (const auto& n : nodes) mx = std::max(mx, n.id);
  return mx + 1;
}

std::optional<std::size_t> Graph::node_index(NodeId id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

const OpNode& Graph::node(NodeId id) const {
  auto ix = node_index(id);
  if (!ix) throw DimError("no node with id " + std::to_string(id));
  return nodes[*ix];
}

OpNode& Graph::node(NodeId id) {
  auto ix = node_index(id);
  if (!ix) throw DimError("no node with id " + std::to_string(id));
  return nodes[*ix];
}

const Edge& Graph::edge(EdgeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= edges.size()) {
    throw DimError("no edge with id " + std::to_string(id));
  }
  return edges[static_cast<std::size_t>(id)];
}

Edge& Graph::edge(EdgeId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= edges.size()) {
    throw DimError("no edge with id " + std::to_string(id));
  }
  return edges[static_cast<std::size_t>(id)];
}

std::optional<NodeId> Graph::producer(EdgeId id) const {
  for (const auto& n : nodes) {
    if (n.output == id) return n.id;
  }
  return std::nullopt;
}

std::vector<NodeId> Graph::consumers(EdgeId id) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes) {
    if (std::find(n.inputs.begin(), n.inputs.end(), id) != n.inputs.end()) {
      out.push_back(n.id);
    }
  }
  return out;
}

const ParamInfo& Graph::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ParamError("graph declares no param named '" + name + "'");
  }
  return it->second;
}

std::int64_t Graph::count_kind(OpKind k) const {
  std::int64_t n = 0;
  for (const auto& node : nodes) {
    if (node.kind == k) ++n;
  }
  return n;
}

namespace {

[[noreturn]] void infer_fail(const OpNode& n, const std::string& msg) {
  throw DimError(std::string(op_kind_name(n.kind)) + " node " +
                 std::to_string(n.id) + ": " + msg);
}

void want_inputs(const OpNode& n, std::size_t count) {
  if (n.inputs.size() != count) {
    infer_fail(n, "expected " + std::to_string(count) + " inputs, got " +
                      std::to_string(n.inputs.size()));
  }
}

void want_params(const OpNode& n, std::size_t lo, std::size_t hi) {
  if (n.param_names.size() < lo || n.param_names.size() > hi) {
    infer_fail(n, "expected " + std::to_string(lo) + ".." +
                      std::to_string(hi) + " params, got " +
                      std::to_string(n.param_names.size()));
  }
}

// Shapes of the two operands of a binary node (inputs first, then params).
std::pair<Shape, Shape> binary_operand_shapes(const Graph& g,
                                              const OpNode& n) {
  std::vector<Shape> ops;
  for (EdgeId e : n.inputs) ops.push_back(g.edge(e).shape);
  for (const auto& p : n.param_names) ops.push_back(g.param(p).shape);
  if (ops.size() != 2) {
    infer_fail(n, "expected 2 operands, got " + std::to_string(ops.size()));
  }
  return {ops[0], ops[1]};
}

Shape binary_output_shape(const Graph& g, const OpNode& n) {
  auto [a, b] = binary_operand_shapes(g, n);
  if (a == b) return a;
  if (a.size() == 4 && b.size() == 4) {
    Shape out(4);
    bool ok = true;
    for (std::size_t i = 0; i < 4; ++i) {
      if (a[i] == b[i] || a[i] == 1 || b[i] == 1) {
        out[i] = std::max(a[i], b[i]);
      } else {
        ok = false;
      }
    }
    if (ok) return out;
  }
  infer_fail(n, "operand shapes " + shape_str(a) + " and " + shape_str(b) +
                    " do not broadcast");
}

}  // namespace

std::pair<Shape, DType> infer_node_output(const Graph& g, const OpNode& n) {
  auto in_shape = [&](std::size_t i) -> const Shape& {
    return g.edge(n.inputs.at(i)).shape;
  };
  auto in_dtype = [&](std::size_t i) {
    return g.edge(n.inputs.at(i)).dtype;
  };

  switch (n.kind) {
    case OpKind::PatchEmbed: {
      want_inputs(n, 1);
      want_params(n, 2, 2);
      const Shape& x = in_shape(0);
      const ParamInfo& w = g.param(n.param_names[0]);
      if (x.size() != 4 || w.shape.size() != 4) {
        infer_fail(n, "input and weight must be rank 4");
      }
      const std::int64_t p = n.attr_int("patch");
      if (w.shape[2] != p || w.shape[3] != p) {
        infer_fail(n, "weight kernel does not match patch size " +
                          std::to_string(p));
      }
      if (x[1] != w.shape[1]) infer_fail(n, "channel mismatch with weight");
      if (x[2] != x[3] || x[2] % p != 0) {
        infer_fail(n, "image " + shape_str(x) + " not divisible into " +
                          std::to_string(p) + "x" + std::to_string(p) +
                          " patches");
      }
      const std::int64_t grid = x[2] / p;
      return {{x[0], grid * grid, w.shape[0]}, DType::F32};
    }
    case OpKind::TokenInsert: {
      want_inputs(n, 1);
      want_params(n, 1, 2);
      const Shape& x = in_shape(0);
      if (x.size() != 3) infer_fail(n, "input must be (B, P, C)");
      for (const auto& name : n.param_names) {
        const ParamInfo& t = g.param(name);
        if (t.shape != Shape{1, 1, x[2]}) {
          infer_fail(n, "token param '" + name + "' must be (1, 1, " +
                            std::to_string(x[2]) + ")");
        }
      }
      return {{x[0],
               x[1] + static_cast<std::int64_t>(n.param_names.size()), x[2]},
              DType::F32};
    }
    case OpKind::AddPosEmbed: {
      want_inputs(n, 1);
      want_params(n, 1, 1);
      const Shape& x = in_shape(0);
      const ParamInfo& pos = g.param(n.param_names[0]);
      if (x.size() != 3) infer_fail(n, "input must be (B, N, C)");
      if (pos.shape != Shape{1, x[1], x[2]}) {
        infer_fail(n, "pos param must be (1, " + std::to_string(x[1]) + ", " +
                          std::to_string(x[2]) + "), got " +
                          shape_str(pos.shape));
      }
      return {x, DType::F32};
    }
    case OpKind::Linear:
    case OpKind::Head: {
      want_inputs(n, 1);
      want_params(n, 1, 2);
      const Shape& x = in_shape(0);
      const ParamInfo& w = g.param(n.param_names[0]);
      if (w.shape.size() != 2) infer_fail(n, "weight must be (O, I)");
      const std::int64_t O = w.shape[0], I = w.shape[1];
      if (n.param_names.size() == 2 &&
          g.param(n.param_names[1]).shape != Shape{O}) {
        infer_fail(n, "bias must be (" + std::to_string(O) + ")");
      }
      if (x.size() == 4) {
        // channels-first activation (B, I, 1, N)
        if (x[1] != I) {
          infer_fail(n, "input " + shape_str(x) + " does not carry " +
                            std::to_string(I) + " channels");
        }
        return {{x[0], O, x[2], x[3]}, DType::F32};
      }
      if (x.empty() || x.back() != I) {
        infer_fail(n, "input " + shape_str(x) + " does not end in " +
                          std::to_string(I));
      }
      Shape out = x;
      out.back() = O;
      return {out, DType::F32};
    }
    case OpKind::LayerNorm: {
      want_inputs(n, 1);
      want_params(n, 2, 2);
      (void)n.attr_float("eps");
      const Shape& x = in_shape(0);
      const ParamInfo& gamma = g.param(n.param_names[0]);
      const ParamInfo& beta = g.param(n.param_names[1]);
      const std::int64_t H = x.size() == 4 ? x[1] : x.back();
      if (shape_numel(gamma.shape) != H || shape_numel(beta.shape) != H) {
        infer_fail(n, "gamma/beta must have " + std::to_string(H) +
                          " elements");
      }
      return {x, DType::F32};
    }
    case OpKind::Conv2d: {
      want_inputs(n, 1);
      want_params(n, 1, 2);
      const Shape& x = in_shape(0);
      const ParamInfo& w = g.param(n.param_names[0]);
      if (x.size() != 4 || w.shape.size() != 4) {
        infer_fail(n, "input and weight must be rank 4");
      }
      const std::int64_t stride = n.attr_int("stride");
      const std::int64_t Cout = w.shape[0], Kh = w.shape[2], Kw = w.shape[3];
      if (w.shape[1] != x[1]) {
        infer_fail(n, "weight expects " + std::to_string(w.shape[1]) +
                          " channels, input has " + std::to_string(x[1]));
      }
      if (stride < 1 || Kh > x[2] || Kw > x[3] || (x[2] - Kh) % stride != 0 ||
          (x[3] - Kw) % stride != 0) {
        infer_fail(n, "kernel " + shape_str({Kh, Kw}) + " stride " +
                          std::to_string(stride) + " does not tile " +
                          shape_str(x));
      }
      if (n.param_names.size() == 2) {
        const ParamInfo& b = g.param(n.param_names[1]);
        if (shape_numel(b.shape) != Cout) {
          infer_fail(n, "bias must have " + std::to_string(Cout) +
                            " elements");
        }
      }
      return {{x[0], Cout, (x[2] - Kh) / stride + 1, (x[3] - Kw) / stride + 1},
              in_dtype(0)};
    }
    case OpKind::MatMulQK: {
      want_inputs(n, 2);
      const Shape& a = in_shape(0);
      const Shape& b = in_shape(1);
      if (a.size() < 2 || a.size() != b.size()) {
        infer_fail(n, "operands must share rank >= 2");
      }
      Shape out;
      for (std::size_t i = 0; i + 2 < a.size(); ++i) {
        if (a[i] != b[i]) infer_fail(n, "batch dims differ");
        out.push_back(a[i]);
      }
      if (a.back() != b.back()) {
        infer_fail(n, "contraction dims differ: " + shape_str(a) + " vs " +
                          shape_str(b));
      }
      out.push_back(a[a.size() - 2]);
      out.push_back(b[b.size() - 2]);
      return {out, DType::F32};
    }
    case OpKind::MatMulAV: {
      want_inputs(n, 2);
      const Shape& a = in_shape(0);
      const Shape& b = in_shape(1);
      if (a.size() < 2 || a.size() != b.size()) {
        infer_fail(n, "operands must share rank >= 2");
      }
      Shape out;
      for (std::size_t i = 0; i + 2 < a.size(); ++i) {
        if (a[i] != b[i]) infer_fail(n, "batch dims differ");
        out.push_back(a[i]);
      }
      if (a.back() != b[b.size() - 2]) {
        infer_fail(n, "inner dims differ: " + shape_str(a) + " vs " +
                          shape_str(b));
      }
      out.push_back(a[a.size() - 2]);
      out.push_back(b.back());
      return {out, DType::F32};
    }
    case OpKind::Softmax:
    case OpKind::Gelu: {
      want_inputs(n, 1);
      return {in_shape(0), DType::F32};
    }
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
      return {binary_output_shape(g, n), DType::F32};
    case OpKind::MulScalar: {
      want_inputs(n, 1);
      (void)n.attr_float("value");
      return {in_shape(0), DType::F32};
    }
    case OpKind::Square: {
      want_inputs(n, 1);
      return {in_shape(0), DType::F32};
    }
    case OpKind::RsqrtEps: {
      want_inputs(n, 1);
      (void)n.attr_float("eps");
      return {in_shape(0), DType::F32};
    }
    case OpKind::Permute: {
      want_inputs(n, 1);
      const auto& perm = n.attr_ints("perm");
      const Shape& x = in_shape(0);
      if (perm.size() != x.size()) infer_fail(n, "perm rank mismatch");
      std::vector<bool> seen(x.size(), false);
      Shape out(x.size());
      for (std::size_t i = 0; i < perm.size(); ++i) {
        const std::int64_t p = perm[i];
        if (p < 0 || static_cast<std::size_t>(p) >= x.size() ||
            seen[static_cast<std::size_t>(p)]) {
          infer_fail(n, "perm is not a permutation");
        }
        seen[static_cast<std::size_t>(p)] = true;
        out[i] = x[static_cast<std::size_t>(p)];
      }
      return {out, in_dtype(0)};
    }
    case OpKind::Reshape: {
      want_inputs(n, 1);
      const auto& target = n.attr_ints("shape");
      const Shape& x = in_shape(0);
      Shape out(target.begin(), target.end());
      if (shape_numel(out) != shape_numel(x)) {
        infer_fail(n, "cannot reshape " + shape_str(x) + " to " +
                          shape_str(out));
      }
      return {out, in_dtype(0)};
    }
    case OpKind::Concat: {
      if (n.inputs.size() < 2) infer_fail(n, "needs at least 2 inputs");
      const auto axis = n.attr_int("axis");
      Shape out = in_shape(0);
      if (axis < 0 || static_cast<std::size_t>(axis) >= out.size()) {
        infer_fail(n, "axis out of range");
      }
      for (std::size_t i = 1; i < n.inputs.size(); ++i) {
        const Shape& s = in_shape(i);
        if (s.size() != out.size()) infer_fail(n, "rank mismatch");
        for (std::size_t d = 0; d < s.size(); ++d) {
          if (d == static_cast<std::size_t>(axis)) continue;
          if (s[d] != out[d]) infer_fail(n, "non-axis dims differ");
        }
        out[static_cast<std::size_t>(axis)] += s[static_cast<std::size_t>(axis)];
      }
      return {out, in_dtype(0)};
    }
    case OpKind::Slice: {
      want_inputs(n, 1);
      const auto axis = n.attr_int("axis");
      const auto start = n.attr_int("start");
      const auto stop = n.attr_int("stop");
      Shape out = in_shape(0);
      if (axis < 0 || static_cast<std::size_t>(axis) >= out.size()) {
        infer_fail(n, "axis out of range");
      }
      const std::int64_t extent = out[static_cast<std::size_t>(axis)];
      if (start < 0 || stop <= start || stop > extent) {
        infer_fail(n, "range [" + std::to_string(start) + ", " +
                          std::to_string(stop) + ") invalid for extent " +
                          std::to_string(extent));
      }
      out[static_cast<std::size_t>(axis)] = stop - start;
      return {out, in_dtype(0)};
    }
    case OpKind::Quantize: {
      want_inputs(n, 1);
      (void)n.attr_float("scale");
      if (in_dtype(0) != DType::F32) infer_fail(n, "input must be f32");
      return {in_shape(0), DType::I8};
    }
    case OpKind::Dequantize: {
      want_inputs(n, 1);
      (void)n.attr_float("scale");
      if (in_dtype(0) != DType::I8) infer_fail(n, "input must be i8");
      return {in_shape(0), DType::F32};
    }
  }
  infer_fail(n, "unhandled kind");
}

void infer_shapes(Graph& g) {
  for (const auto& n : g.nodes) {
    auto [shape, dtype] = infer_node_output(g, n);
    Edge& out = g.edge(n.output);
    out.shape = std::move(shape);
    out.dtype = dtype;
  }
}

std::vector<std::string> validate(const Graph& g) {
  std::vector<std::string> diags;
  auto note = [&](std::string m) { diags.push_back(std::move(m)); };

  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (g.edges[i].id != static_cast<EdgeId>(i)) {
      note("edge at index " + std::to_string(i) + " has id " +
           std::to_string(g.edges[i].id));
    }
  }
  auto edge_ok = [&](EdgeId e) {
    return e >= 0 && static_cast<std::size_t>(e) < g.edges.size();
  };
  if (!edge_ok(g.input)) note("graph input edge is unset or invalid");
  if (!edge_ok(g.output)) note("graph output edge is unset or invalid");
  if (!diags.empty()) return diags;

  std::set<NodeId> ids;
  std::vector<int> producers(g.edges.size(), 0);
  std::vector<int> consumers(g.edges.size(), 0);
  std::vector<bool> produced(g.edges.size(), false);
  produced[static_cast<std::size_t>(g.input)] = true;

  for (const auto& n : g.nodes) {
    if (!ids.insert(n.id).second) {
      note("duplicate node id " + std::to_string(n.id));
    }
    for (EdgeId e : n.inputs) {
      if (!edge_ok(e)) {
        note("node " + std::to_string(n.id) + " reads invalid edge " +
             std::to_string(e));
        continue;
      }
      consumers[static_cast<std::size_t>(e)]++;
      if (!produced[static_cast<std::size_t>(e)]) {
        note("node " + std::to_string(n.id) + " reads edge " +
             std::to_string(e) + " before it is produced (topology broken)");
      }
    }
    if (!edge_ok(n.output)) {
      note("node " + std::to_string(n.id) + " writes invalid edge " +
           std::to_string(n.output));
      continue;
    }
    producers[static_cast<std::size_t>(n.output)]++;
    produced[static_cast<std::size_t>(n.output)] = true;
    for (const auto& p : n.param_names) {
      if (g.params.find(p) == g.params.end()) {
        note("node " + std::to_string(n.id) + " references undeclared param '" +
             p + "'");
      }
    }
  }

  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto eid = static_cast<EdgeId>(e);
    if (eid == g.input) {
      if (producers[e] != 0) note("graph input edge has a producer");
      continue;
    }
    if (producers[e] == 0) note("edge " + std::to_string(e) + " has no producer");
    if (producers[e] > 1) {
      note("edge " + std::to_string(e) + " has " +
           std::to_string(producers[e]) + " producers");
    }
    if (consumers[e] == 0 && eid != g.output) {
      note("edge " + std::to_string(e) + " is dead (no consumer, not output)");
    }
  }

  if (g.dialect == Dialect::Lowered) {
    for (const auto& n : g.nodes) {
      if (n.kind == OpKind::Linear || n.kind == OpKind::LayerNorm ||
          n.kind == OpKind::Head) {
        note(std::string("lowered graph contains ") + op_kind_name(n.kind) +
             " node " + std::to_string(n.id));
      }
    }
    if (g.layout != Layout::ChannelsFirst) {
      note("lowered graph must use channels_first layout");
    }
  } else {
    for (const auto& n : g.nodes) {
      if (n.kind == OpKind::Quantize || n.kind == OpKind::Dequantize) {
        note(std::string("original graph contains ") + op_kind_name(n.kind) +
             " node " + std::to_string(n.id));
      }
    }
  }

  if (diags.empty()) {
    for (const auto& n : g.nodes) {
      try {
        auto [shape, dtype] = infer_node_output(g, n);
        const Edge& out = g.edge(n.output);
        if (out.shape != shape) {
          note("node " + std::to_string(n.id) + " output shape " +
               shape_str(out.shape) + " does not match inferred " +
               shape_str(shape));
        }
        if (out.dtype != dtype) {
          note("node " + std::to_string(n.id) + " output dtype " +
               dtype_name(out.dtype) + " does not match inferred " +
               dtype_name(dtype));
        }
      } catch (const Error& err) {
        note(err.what());
      }
    }
  }
  return diags;
}

namespace {

using nlohmann::json;

json attr_to_json(const AttrValue& v) {
  if (const auto* p = std::get_if<std::int64_t>(&v)) return *p;
  if (const auto* p = std::get_if<double>(&v)) return *p;
  if (const auto* p = std::get_if<std::string>(&v)) return *p;
  return std::get<std::vector<std::int64_t>>(v);
}

AttrValue attr_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) return j.get<std::vector<std::int64_t>>();
  throw FormatError("unsupported attr value: " + j.dump());
}

}  // namespace

std::string graph_to_json_string(const Graph& g) {
  json j;
  j["dialect"] = dialect_name(g.dialect);
  j["layout"] = layout_name(g.layout);
  j["input"] = g.input;
  j["output"] = g.output;
  json edges = json::array();
  for (const auto& e : g.edges) {
    edges.push_back(
        {{"id", e.id}, {"shape", e.shape}, {"dtype", dtype_name(e.dtype)}});
  }
  j["edges"] = std::move(edges);
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json attrs = json::object();
    for (const auto& [k, v] : n.attrs) attrs[k] = attr_to_json(v);
    nodes.push_back({{"id", n.id},
                     {"kind", op_kind_name(n.kind)},
                     {"attrs", std::move(attrs)},
                     {"inputs", n.inputs},
                     {"param_names", n.param_names},
                     {"output", n.output}});
  }
  j["nodes"] = std::move(nodes);
  json params = json::array();
  for (const auto& [name, info] : g.params) {
    json p = {{"name", name},
              {"shape", info.shape},
              {"dtype", dtype_name(info.dtype)},
              {"synth", info.synth}};
    if (info.synth) p["fill"] = info.fill;
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  return j.dump(2) + "\n";
}

Graph graph_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("graph json does not parse: ") + e.what());
  }
  try {
    Graph g;
    const std::string dialect = j.at("dialect").get<std::string>();
    if (dialect == "original") {
      g.dialect = Dialect::Original;
    } else if (dialect == "lowered") {
      g.dialect = Dialect::Lowered;
    } else {
      throw FormatError("unknown dialect: " + dialect);
    }
    const std::string layout = j.at("layout").get<std::string>();
    if (layout == "tokens_last") {
      g.layout = Layout::TokensLast;
    } else if (layout == "channels_first") {
      g.layout = Layout::ChannelsFirst;
    } else {
      throw FormatError("unknown layout: " + layout);
    }
    g.input = j.at("input").get<EdgeId>();
    g.output = j.at("output").get<EdgeId>();
    for (const auto& je : j.at("edges")) {
      Edge e;
      e.id = je.at("id").get<EdgeId>();
      e.shape = je.at("shape").get<Shape>();
      e.dtype = dtype_from_name(je.at("dtype").get<std::string>());
      g.edges.push_back(std::move(e));
    }
    for (const auto& jn : j.at("nodes")) {
      OpNode n;
      n.id = jn.at("id").get<NodeId>();
      n.kind = op_kind_from_name(jn.at("kind").get<std::string>());
      for (const auto& [k, v] : jn.at("attrs").items()) {
        n.attrs[k] = attr_from_json(v);
      }
      n.inputs = jn.at("inputs").get<std::vector<EdgeId>>();
      n.param_names = jn.at("param_names").get<std::vector<std::string>>();
      n.output = jn.at("output").get<EdgeId>();
      g.nodes.push_back(std::move(n));
    }
    for (const auto& jp : j.at("params")) {
      ParamInfo info;
      info.shape = jp.at("shape").get<Shape>();
      info.dtype = dtype_from_name(jp.at("dtype").get<std::string>());
      info.synth = jp.at("synth").get<bool>();
      if (info.synth) info.fill = jp.at("fill").get<double>();
      const auto name = jp.at("name").get<std::string>();
      if (!g.params.emplace(name, std::move(info)).second) {
        throw FormatError("duplicate param '" + name + "' in graph json");
      }
    }
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("graph json is malformed: ") + e.what());
  }
}

void save_graph(const Graph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for write");
  out << graph_to_json_string(g);
  if (!out) throw FormatError("failed writing " + path.string());
}

Graph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return graph_from_json_string(ss.str());
}

}  // namespace convform
