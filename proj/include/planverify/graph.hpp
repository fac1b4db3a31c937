#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "planverify/errors.hpp"

namespace planverify {

using ToolId = std::string;

struct Tool {
  ToolId id;
  std::string description;
  std::set<std::string> input_types;
  std::set<std::string> output_types;
};

inline bool io_compatible(const Tool& from, const Tool& to) {
  for (const auto& t : from.output_types)
    if (to.input_types.count(t)) return true;
  return false;
}

/// Global tool graph. Edges are only admitted between I/O-compatible pairs;
/// this is validated at construction and on load.
class DependencyGraph {
 public:
  DependencyGraph() = default;

  static DependencyGraph create(std::vector<Tool> tools,
                                std::set<std::pair<ToolId, ToolId>> edges) {
    DependencyGraph g;
    for (auto& t : tools) {
      if (t.id.empty()) throw SchemaError("tool with empty id");
      for (const auto& tag : t.input_types)
        if (tag.empty()) throw SchemaError("empty input type tag on tool " + t.id);
      for (const auto& tag : t.output_types)
        if (tag.empty()) throw SchemaError("empty output type tag on tool " + t.id);
      ToolId id = t.id;
      if (!g.tools_.emplace(id, std::move(t)).second)
        throw SchemaError("duplicate tool id: " + id);
    }
    for (const auto& [u, v] : edges) {
      auto iu = g.tools_.find(u);
      auto iv = g.tools_.find(v);
      if (iu == g.tools_.end()) throw SchemaError("edge endpoint not a known tool: " + u);
      if (iv == g.tools_.end()) throw SchemaError("edge endpoint not a known tool: " + v);
      if (!io_compatible(iu->second, iv->second))
        throw SchemaError("edge violates I/O compatibility: " + u + " -> " + v);
      g.out_[u].push_back(v);
      g.in_[v].push_back(u);
    }
    g.edges_ = std::move(edges);
    for (auto& [id, nbrs] : g.out_) std::sort(nbrs.begin(), nbrs.end());
    for (auto& [id, nbrs] : g.in_) std::sort(nbrs.begin(), nbrs.end());
    return g;
  }

  bool has_tool(const ToolId& id) const { return tools_.count(id) != 0; }

  const Tool& tool(const ToolId& id) const {
    auto it = tools_.find(id);
    if (it == tools_.end()) throw UnknownTool("unknown tool: " + id);
    return it->second;
  }

  bool has_edge(const ToolId& u, const ToolId& v) const {
    return edges_.count({u, v}) != 0;
  }

  const std::vector<ToolId>& out_neighbors(const ToolId& t) const {
    static const std::vector<ToolId> empty;
    auto it = out_.find(t);
    return it == out_.end() ? empty : it->second;
  }

  const std::vector<ToolId>& in_neighbors(const ToolId& t) const {
    static const std::vector<ToolId> empty;
    auto it = in_.find(t);
    return it == in_.end() ? empty : it->second;
  }

  std::size_t tool_count() const { return tools_.size(); }
  const std::map<ToolId, Tool>& tools() const { return tools_; }
  const std::set<std::pair<ToolId, ToolId>>& edges() const { return edges_; }

  /// Lexicographically sorted tool ids.
  std::vector<ToolId> tool_ids() const {
    std::vector<ToolId> ids;
    ids.reserve(tools_.size());
    for (const auto& [id, t] : tools_) ids.push_back(id);
    return ids;
  }

 private:
  std::map<ToolId, Tool> tools_;
  std::set<std::pair<ToolId, ToolId>> edges_;
  std::map<ToolId, std::vector<ToolId>> out_, in_;
};

constexpr int kStartNodeId = 0;

/// One tool-invocation instance. The virtual Start node carries no tool and an
/// empty step text; it always sits at node id 0.
struct PlanNode {
  int node_id = 0;
  std::optional<ToolId> tool;  // nullopt marks the Start node
  std::string step_text;

  bool is_start() const { return !tool.has_value(); }
};

/// Directed plan for one request. Node ids are dense indices into `nodes`;
/// edges are (node_id, node_id) pairs. Immutable after construction by
/// convention: mutating helpers return new graphs.
struct PlanGraph {
  std::string request;
  std::vector<PlanNode> nodes;
  std::set<std::pair<int, int>> edges;

  std::size_t tool_node_count() const { return nodes.empty() ? 0 : nodes.size() - 1; }

  const PlanNode& node(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes.size())
      throw BadIndex("plan node id out of range: " + std::to_string(id));
    return nodes[static_cast<std::size_t>(id)];
  }

  std::vector<int> predecessors(int id) const {
    std::vector<int> out;
    for (const auto& [u, v] : edges)
      if (v == id) out.push_back(u);
    return out;
  }

  std::vector<int> successors(int id) const {
    std::vector<int> out;
    for (const auto& [u, v] : edges)
      if (u == id) out.push_back(v);
    return out;
  }

  /// Tool ids in node order, Start excluded.
  std::vector<ToolId> tool_sequence() const {
    std::vector<ToolId> seq;
    for (const auto& n : nodes)
      if (!n.is_start()) seq.push_back(*n.tool);
    return seq;
  }

  /// Directed (tool_u, tool_v) pairs over non-Start edges, in edge order.
  std::vector<std::pair<ToolId, ToolId>> tool_edges() const {
    std::vector<std::pair<ToolId, ToolId>> out;
    for (const auto& [u, v] : edges) {
      if (u == kStartNodeId) continue;
      out.emplace_back(*node(u).tool, *node(v).tool);
    }
    return out;
  }

  /// True if the non-Start edge set contains a directed cycle. Cyclic plans
  /// are accepted structurally; this is a diagnostic only.
  bool has_cycle() const {
    enum class Mark { None, Open, Done };
    std::vector<Mark> mark(nodes.size(), Mark::None);
    std::vector<std::vector<int>> adj(nodes.size());
    for (const auto& [u, v] : edges)
      if (u != kStartNodeId) adj[static_cast<std::size_t>(u)].push_back(v);
    // Iterative DFS with open/closed coloring.
    for (std::size_t s = 0; s < nodes.size(); ++s) {
      if (mark[s] != Mark::None) continue;
      std::vector<std::pair<int, std::size_t>> stack{{static_cast<int>(s), 0}};
      mark[s] = Mark::Open;
      while (!stack.empty()) {
        auto& [u, next] = stack.back();
        if (next < adj[static_cast<std::size_t>(u)].size()) {
          int w = adj[static_cast<std::size_t>(u)][next++];
          if (mark[static_cast<std::size_t>(w)] == Mark::Open) return true;
          if (mark[static_cast<std::size_t>(w)] == Mark::None) {
            mark[static_cast<std::size_t>(w)] = Mark::Open;
            stack.emplace_back(w, 0);
          }
        } else {
          mark[static_cast<std::size_t>(u)] = Mark::Done;
          stack.pop_back();
        }
      }
    }
    return false;
  }
};

/// Build a plan graph from aligned steps/tools and 0-based link indices over
/// the tool nodes. Inserts the Start node and wires it to every tool node
/// with zero in-degree under the raw link set.
inline PlanGraph build_plan_graph(const std::string& request,
                                  const std::vector<std::string>& steps,
                                  const std::vector<ToolId>& tools,
                                  const std::set<std::pair<int, int>>& links) {
  if (steps.size() != tools.size())
    throw LengthMismatch("steps and tools differ in length: " + std::to_string(steps.size()) +
                         " vs " + std::to_string(tools.size()));
  const int m = static_cast<int>(tools.size());
  PlanGraph g;
  g.request = request;
  g.nodes.push_back(PlanNode{kStartNodeId, std::nullopt, ""});
  for (int i = 0; i < m; ++i)
    g.nodes.push_back(PlanNode{i + 1, tools[static_cast<std::size_t>(i)],
                               steps[static_cast<std::size_t>(i)]});
  std::vector<bool> has_pred(static_cast<std::size_t>(m), false);
  for (const auto& [u, v] : links) {
    if (u < 0 || u >= m || v < 0 || v >= m)
      throw BadIndex("link index out of range: (" + std::to_string(u) + "," + std::to_string(v) + ")");
    if (u == v) throw BadIndex("self-loop link at index " + std::to_string(u));
    g.edges.emplace(u + 1, v + 1);
    has_pred[static_cast<std::size_t>(v)] = true;
  }
  for (int i = 0; i < m; ++i)
    if (!has_pred[static_cast<std::size_t>(i)]) g.edges.emplace(kStartNodeId, i + 1);
  return g;
}

struct DependencyViolation {
  std::pair<int, int> edge;       // plan node ids
  ToolId from_tool, to_tool;
  std::string reason;
};

/// One report per non-Start edge missing from the dependency graph. Empty
/// result means the plan is type-executable.
inline std::vector<DependencyViolation> validate_against_dependency_graph(
    const PlanGraph& plan, const DependencyGraph& dep) {
  for (const auto& n : plan.nodes)
    if (!n.is_start() && !dep.has_tool(*n.tool))
      throw UnknownTool("plan references tool absent from dependency graph: " + *n.tool);
  std::vector<DependencyViolation> out;
  for (const auto& [u, v] : plan.edges) {
    if (u == kStartNodeId) continue;
    const ToolId& tu = *plan.node(u).tool;
    const ToolId& tv = *plan.node(v).tool;
    if (!dep.has_edge(tu, tv))
      out.push_back({{u, v}, tu, tv, "edge not present in dependency graph"});
  }
  return out;
}

}  // namespace planverify
