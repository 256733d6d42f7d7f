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

#include "convform/rewrite.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "convform/error.hpp"
#include "json.hpp"

namespace convform {

namespace {

void check_clean(const Graph& g, const std::string& pass) {
  const auto diags = validate(g);
  if (!diags.empty()) {
    throw PassError(pass + " produced an invalid graph: " + diags.front());
  }
}

std::vector<std::int64_t> attr_shape(const OpNode& n) {
  return n.attr_ints("shape");
}

}  // namespace

Graph layout_to_nchw(const Graph& original, PassRecord& rec) {
  rec.pass = "layout_to_nchw";
  Graph g = original;
  if (g.layout == Layout::ChannelsFirst) return g;

  std::vector<NodeId> ape_ids;
  for (const auto& n : g.nodes) {
    if (n.kind == OpKind::AddPosEmbed) ape_ids.push_back(n.id);
  }
  if (ape_ids.size() != 1) {
    throw PassError("layout pass expects exactly one AddPosEmbed, found " +
                    std::to_string(ape_ids.size()));
  }
  const EdgeId stream_root = g.node(ape_ids[0]).output;
  const Shape root_shape = g.edge(stream_root).shape;
  if (root_shape.size() != 3) {
    throw PassError("token stream must be rank 3, got " +
                    shape_str(root_shape));
  }
  const std::int64_t B = root_shape[0];
  const Shape out_shape = g.edge(g.output).shape;
  if (out_shape.size() != 2) {
    throw PassError("graph output must be (B, K) logits, got " +
                    shape_str(out_shape));
  }

  std::vector<EdgeId> stream_sources;

  // retarget the attention merge chains: Reshape(B,h,N,d) <- MatMulAV,
  // Permute(0,2,1,3), Reshape(B,N,C) becomes Permute(0,1,3,2),
  // Reshape(B,C,1,N)
  const std::vector<std::int64_t> perm_0213{0, 2, 1, 3};
  const std::vector<std::int64_t> perm_0132{0, 1, 3, 2};
  for (auto& r2 : g.nodes) {
    if (r2.kind != OpKind::Reshape || attr_shape(r2).size() != 3) continue;
    const auto p_id = g.producer(r2.inputs.at(0));
    if (!p_id) continue;
    OpNode& p = g.node(*p_id);
    if (p.kind != OpKind::Permute || p.attr_ints("perm") != perm_0213) {
      continue;
    }
    const auto r1_id = g.producer(p.inputs.at(0));
    if (!r1_id) continue;
    const OpNode& r1 = g.node(*r1_id);
    if (r1.kind != OpKind::Reshape || attr_shape(r1).size() != 4) continue;
    const auto av_id = g.producer(r1.inputs.at(0));
    if (!av_id || g.node(*av_id).kind != OpKind::MatMulAV) continue;

    const auto target = attr_shape(r2);  // (B, N, C)
    p.attrs["perm"] = perm_0132;
    r2.attrs["shape"] =
        std::vector<std::int64_t>{target[0], target[2], 1, target[1]};
    rec.applied.push_back({p.id, {p.id}});
    rec.applied.push_back({r2.id, {r2.id}});
    stream_sources.push_back(r2.output);
  }

  // transpose the stream once, right after the positional embedding
  const NodeId base_id = g.fresh_node_id();
  OpNode pn;
  pn.id = base_id;
  pn.kind = OpKind::Permute;
  pn.attrs["perm"] = std::vector<std::int64_t>{0, 2, 1};
  pn.inputs = {stream_root};
  pn.output = g.add_edge({root_shape[0], root_shape[2], root_shape[1]});
  OpNode rn;
  rn.id = base_id + 1;
  rn.kind = OpKind::Reshape;
  rn.attrs["shape"] = std::vector<std::int64_t>{root_shape[0], root_shape[2],
                                                1, root_shape[1]};
  rn.inputs = {pn.output};
  rn.output = g.add_edge({root_shape[0], root_shape[2], 1, root_shape[1]});
  const EdgeId nchw_root = rn.output;
  for (auto& n : g.nodes) {
    for (EdgeId& e : n.inputs) {
      if (e == stream_root) e = nchw_root;
    }
  }
  const auto ape_ix = g.node_index(ape_ids[0]).value();
  g.nodes.insert(g.nodes.begin() + static_cast<std::ptrdiff_t>(ape_ix) + 1,
                 {pn, rn});
  rec.applied.push_back({ape_ids[0], {pn.id, rn.id}});

  // walk the stream and relabel axis-sensitive consumers
  std::set<EdgeId> visited;
  std::vector<EdgeId> worklist = {nchw_root};
  worklist.insert(worklist.end(), stream_sources.begin(),
                  stream_sources.end());
  std::vector<NodeId> token_slices;
  while (!worklist.empty()) {
    const EdgeId e = worklist.back();
    worklist.pop_back();
    if (!visited.insert(e).second) continue;
    for (NodeId cid : g.consumers(e)) {
      OpNode& n = g.node(cid);
      switch (n.kind) {
        case OpKind::LayerNorm:
        case OpKind::Linear:
        case OpKind::Gelu:
        case OpKind::Add:
        case OpKind::MulScalar:
          worklist.push_back(n.output);
          break;
        case OpKind::Slice: {
          const std::int64_t axis = n.attr_int("axis");
          if (axis == 2) {
            // feature split: channels moved to dim 1
            n.attrs["axis"] = std::int64_t{1};
            rec.applied.push_back({n.id, {n.id}});
            worklist.push_back(n.output);
          } else if (axis == 1) {
            // token pick: tokens moved to dim 3
            n.attrs["axis"] = std::int64_t{3};
            rec.applied.push_back({n.id, {n.id}});
            token_slices.push_back(n.id);
          } else {
            throw PassError("slice on axis " + std::to_string(axis) +
                            " in the token stream is not supported");
          }
          break;
        }
        case OpKind::Reshape: {
          // head split entry: (B, N, h, d) becomes (B, h, d, N)
          const auto target = attr_shape(n);
          if (target.size() != 4) {
            throw PassError("reshape on the token stream must split heads");
          }
          n.attrs["shape"] =
              std::vector<std::int64_t>{B, target[2], target[3], target[1]};
          rec.applied.push_back({n.id, {n.id}});
          const auto perms = g.consumers(n.output);
          if (perms.size() != 1 ||
              g.node(perms[0]).kind != OpKind::Permute ||
              g.node(perms[0]).attr_ints("perm") != perm_0213) {
            throw PassError("head split reshape (node " +
                            std::to_string(n.id) +
                            ") must feed a (0,2,1,3) permute");
          }
          g.node(perms[0]).attrs["perm"] = perm_0132;
          rec.applied.push_back({perms[0], {perms[0]}});
          break;
        }
        default:
          throw PassError(std::string("layout pass cannot move ") +
                          op_kind_name(n.kind) + " node " +
                          std::to_string(n.id) + " to channels-first");
      }
    }
  }

  // classifier tail: Slice now yields (B, C, 1, 1); keep the Reshape as a
  // no-op view so the Head sees a rank-4 activation
  for (NodeId sid : token_slices) {
    const auto rs = g.consumers(g.node(sid).output);
    if (rs.size() != 1 || g.node(rs[0]).kind != OpKind::Reshape) {
      throw PassError("token slice must feed a single reshape");
    }
    OpNode& rt = g.node(rs[0]);
    const auto target = attr_shape(rt);  // (B, C)
    if (target.size() != 2) {
      throw PassError("classifier reshape must target (B, C)");
    }
    rt.attrs["shape"] = std::vector<std::int64_t>{B, target[1], 1, 1};
    rec.applied.push_back({rt.id, {rt.id}});
  }

  // logits are (B, K, 1, 1) now; restore (B, K) at the very end
  const NodeId out_producer = g.producer(g.output).value();
  OpNode fr;
  fr.id = g.fresh_node_id();
  fr.kind = OpKind::Reshape;
  fr.attrs["shape"] = std::vector<std::int64_t>{out_shape[0], out_shape[1]};
  fr.inputs = {g.output};
  fr.output = g.add_edge(out_shape);
  g.output = fr.output;
  g.nodes.push_back(std::move(fr));
  rec.applied.push_back({out_producer, {g.nodes.back().id}});

  g.layout = Layout::ChannelsFirst;
  infer_shapes(g);
  check_clean(g, rec.pass);
  return g;
}

Graph linear_to_conv(const Graph& original, PassRecord& rec) {
  rec.pass = "linear_to_conv";
  Graph g = original;
  for (auto& n : g.nodes) {
    if (n.kind != OpKind::Linear && n.kind != OpKind::Head) continue;
    const Shape& x = g.edge(n.inputs.at(0)).shape;
    if (x.size() != 4 || x[2] != 1) {
      throw PassError(std::string(op_kind_name(n.kind)) + " node " +
                      std::to_string(n.id) + " reads " + shape_str(x) +
                      "; run layout_to_nchw first");
    }
    ParamInfo& w = g.params.at(n.param_names.at(0));
    if (w.shape.size() != 2) {
      throw PassError("weight '" + n.param_names[0] + "' already rewritten");
    }
    w.shape = {w.shape[0], w.shape[1], 1, 1};
    n.kind = OpKind::Conv2d;
    n.attrs.erase("out_features");
    n.attrs["stride"] = std::int64_t{1};
    rec.applied.push_back({n.id, {n.id}});
  }
  infer_shapes(g);
  check_clean(g, rec.pass);
  return g;
}

Graph layernorm_to_conv(const Graph& original, PassRecord& rec) {
  rec.pass = "layernorm_to_conv";
  Graph g = original;

  std::vector<NodeId> ln_ids;
  for (const auto& n : g.nodes) {
    if (n.kind == OpKind::LayerNorm) ln_ids.push_back(n.id);
  }

  for (NodeId lid : ln_ids) {
    const OpNode ln = g.node(lid);  // copy; the node is replaced below
    const EdgeId x = ln.inputs.at(0);
    // Copy: add_edge below may reallocate g.edges.
    const Shape xs = g.edge(x).shape;
    if (xs.size() != 4) {
      throw PassError("layernorm node " + std::to_string(lid) + " reads " +
                      shape_str(xs) + "; run layout_to_nchw first");
    }
    const std::int64_t C = xs[1];
    const double eps = ln.attr_float("eps");
    const std::string& gamma = ln.param_names.at(0);
    const std::string& beta = ln.param_names.at(1);
    std::string prefix = gamma;
    const std::string suffix = ".gamma";
    if (prefix.size() > suffix.size() &&
        prefix.compare(prefix.size() - suffix.size(), suffix.size(),
                       suffix) == 0) {
      prefix.resize(prefix.size() - suffix.size());
    }
    const std::string mean1 = prefix + ".mean1.w";
    const std::string mean2 = prefix + ".mean2.w";

    g.params.at(gamma).shape = {1, C, 1, 1};
    g.params.at(beta).shape = {1, C, 1, 1};
    const double fill = 1.0 / static_cast<double>(C);
    if (!g.params.emplace(mean1, ParamInfo{{1, C, 1, 1}, DType::F32, true,
                                           fill}).second ||
        !g.params.emplace(mean2, ParamInfo{{1, C, 1, 1}, DType::F32, true,
                                           fill}).second) {
      throw PassError("mean weights for '" + prefix + "' already declared");
    }

    const Shape stat_shape{xs[0], 1, xs[2], xs[3]};
    const EdgeId e_mu = g.add_edge(stat_shape);
    const EdgeId e_d = g.add_edge(xs);
    const EdgeId e_sq = g.add_edge(xs);
    const EdgeId e_var = g.add_edge(stat_shape);
    const EdgeId e_r = g.add_edge(stat_shape);
    const EdgeId e_n = g.add_edge(xs);
    const EdgeId e_s = g.add_edge(xs);

    const NodeId base = g.fresh_node_id();
    const AttrMap mean_attrs{{"stride", std::int64_t{1}},
                             {"origin", std::string("ln_mean")}};
    std::vector<OpNode> sub(8);
    sub[0] = {base + 0, OpKind::Conv2d, mean_attrs, {x}, {mean1}, e_mu};
    sub[1] = {base + 1, OpKind::Sub, {}, {x, e_mu}, {}, e_d};
    sub[2] = {base + 2, OpKind::Square, {}, {e_d}, {}, e_sq};
    sub[3] = {base + 3, OpKind::Conv2d, mean_attrs, {e_sq}, {mean2}, e_var};
    sub[4] = {base + 4, OpKind::RsqrtEps, {{"eps", eps}}, {e_var}, {}, e_r};
    sub[5] = {base + 5, OpKind::Mul, {}, {e_d, e_r}, {}, e_n};
    sub[6] = {base + 6, OpKind::Mul, {}, {e_n}, {gamma}, e_s};
    sub[7] = {base + 7, OpKind::Add, {}, {e_s}, {beta}, ln.output};

    const auto ix = g.node_index(lid).value();
    g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(ix));
    g.nodes.insert(g.nodes.begin() + static_cast<std::ptrdiff_t>(ix),
                   sub.begin(), sub.end());

    NodeRewrite nr{lid, {}};
    for (const auto& s : sub) nr.new_ids.push_back(s.id);
    rec.applied.push_back(std::move(nr));
  }

  infer_shapes(g);
  check_clean(g, rec.pass);
  return g;
}

std::pair<Graph, RewritePlan> lower(const Graph& original) {
  if (original.dialect != Dialect::Original) {
    throw PassError("lower() expects an original-dialect graph");
  }
  RewritePlan plan;
  plan.passes.resize(3);
  Graph g = layout_to_nchw(original, plan.passes[0]);
  g = linear_to_conv(g, plan.passes[1]);
  g = layernorm_to_conv(g, plan.passes[2]);
  g.dialect = Dialect::Lowered;
  check_clean(g, "lower");
  return {std::move(g), std::move(plan)};
}

namespace {

using nlohmann::json;

}  // namespace

std::string plan_to_json_string(const RewritePlan& plan) {
  json passes = json::array();
  for (const auto& p : plan.passes) {
    json applied = json::array();
    for (const auto& a : p.applied) {
      applied.push_back({{"old", a.old_id}, {"new", a.new_ids}});
    }
    passes.push_back({{"pass", p.pass}, {"applied", std::move(applied)}});
  }
  return json{{"passes", std::move(passes)}}.dump(2) + "\n";
}

RewritePlan plan_from_json_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    RewritePlan plan;
    for (const auto& jp : j.at("passes")) {
      PassRecord rec;
      rec.pass = jp.at("pass").get<std::string>();
      for (const auto& ja : jp.at("applied")) {
        rec.applied.push_back({ja.at("old").get<NodeId>(),
                               ja.at("new").get<std::vector<NodeId>>()});
      }
      plan.passes.push_back(std::move(rec));
    }
    return plan;
  } catch (const json::exception& e) {
    throw FormatError(std::string("plan json is malformed: ") + e.what());
  }
}

void save_plan(const RewritePlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for write");
  out << plan_to_json_string(plan);
  if (!out) throw FormatError("failed writing " + path.string());
}

RewritePlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return plan_from_json_string(std::move(ss).str());
}

}  // namespace convform
