#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "planverify/graph.hpp"

namespace planverify {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dependency graph wire format:
// {"nodes":[{"id":str,"desc":str,"input-type":[str],"output-type":[str]}],
//  "links":[{"source":str,"target":str}]}
// ---------------------------------------------------------------------------

namespace detail {

inline const json& require_field(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path.empty() ? key : path + "." + key);
  return *it;
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path + ": expected string");
  return j.get<std::string>();
}

}  // namespace detail

inline json dependency_graph_to_json(const DependencyGraph& dep) {
  json nodes = json::array();
  for (const auto& [id, t] : dep.tools()) {
    nodes.push_back({{"id", t.id},
                     {"desc", t.description},
                     {"input-type", t.input_types},
                     {"output-type", t.output_types}});
  }
  json links = json::array();
  for (const auto& [u, v] : dep.edges()) links.push_back({{"source", u}, {"target", v}});
  return {{"nodes", nodes}, {"links", links}};
}

inline DependencyGraph dependency_graph_from_json(const json& j) {
  const json& nodes = detail::require_field(j, "nodes", "");
  const json& links = detail::require_field(j, "links", "");
  if (!nodes.is_array()) throw SchemaError("nodes: expected array");
  if (!links.is_array()) throw SchemaError("links: expected array");
  std::vector<Tool> tools;
  std::size_t i = 0;
  for (const auto& n : nodes) {
    const std::string path = "nodes[" + std::to_string(i++) + "]";
    Tool t;
    t.id = detail::as_string(detail::require_field(n, "id", path), path + ".id");
    t.description = detail::as_string(detail::require_field(n, "desc", path), path + ".desc");
    for (const auto& tag : detail::require_field(n, "input-type", path))
      t.input_types.insert(detail::as_string(tag, path + ".input-type[]"));
    for (const auto& tag : detail::require_field(n, "output-type", path))
      t.output_types.insert(detail::as_string(tag, path + ".output-type[]"));
    tools.push_back(std::move(t));
  }
  std::set<std::pair<ToolId, ToolId>> edges;
  i = 0;
  for (const auto& l : links) {
    const std::string path = "links[" + std::to_string(i++) + "]";
    edges.emplace(detail::as_string(detail::require_field(l, "source", path), path + ".source"),
                  detail::as_string(detail::require_field(l, "target", path), path + ".target"));
  }
  return DependencyGraph::create(std::move(tools), std::move(edges));
}

// ---------------------------------------------------------------------------
// Plan instance wire format:
// {"id":str,"request":str,"task_steps":[str],"task_nodes":[{"task":str}],
//  "task_links":[{"source":str,"target":str}]}
// Links name tools, not node indices. On load each link binds to the first
// occurrence pair not already present (documented convention for plans that
// invoke the same tool more than once).
// ---------------------------------------------------------------------------

struct PlanInstance {
  std::string id;
  PlanGraph graph;
};

inline json plan_instance_to_json(const PlanInstance& inst) {
  const PlanGraph& g = inst.graph;
  json steps = json::array();
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    if (n.is_start()) continue;
    steps.push_back(n.step_text);
    nodes.push_back({{"task", *n.tool}});
  }
  json links = json::array();
  for (const auto& [u, v] : g.edges) {
    if (u == kStartNodeId) continue;  // Start wiring is derived, not stored
    links.push_back({{"source", *g.node(u).tool}, {"target", *g.node(v).tool}});
  }
  return {{"id", inst.id},
          {"request", g.request},
          {"task_steps", steps},
          {"task_nodes", nodes},
          {"task_links", links}};
}

inline PlanInstance plan_instance_from_json(const json& j) {
  const json& steps_j = detail::require_field(j, "task_steps", "");
  const json& nodes_j = detail::require_field(j, "task_nodes", "");
  const json& links_j = detail::require_field(j, "task_links", "");
  const std::string request =
      detail::as_string(detail::require_field(j, "request", ""), "request");
  std::string id = j.contains("id") ? detail::as_string(j.at("id"), "id") : "";

  std::vector<std::string> steps;
  for (const auto& s : steps_j) steps.push_back(detail::as_string(s, "task_steps[]"));
  std::vector<ToolId> tools;
  std::size_t i = 0;
  for (const auto& n : nodes_j) {
    const std::string path = "task_nodes[" + std::to_string(i++) + "]";
    tools.push_back(detail::as_string(detail::require_field(n, "task", path), path + ".task"));
  }
  if (steps.size() != tools.size())
    throw SchemaError("task_steps and task_nodes differ in length");

  // Map tool-name links to node-index links: first unmatched occurrence wins.
  std::set<std::pair<int, int>> links;
  i = 0;
  for (const auto& l : links_j) {
    const std::string path = "task_links[" + std::to_string(i++) + "]";
    const std::string src =
        detail::as_string(detail::require_field(l, "source", path), path + ".source");
    const std::string dst =
        detail::as_string(detail::require_field(l, "target", path), path + ".target");
    std::vector<int> src_idx, dst_idx;
    for (std::size_t k = 0; k < tools.size(); ++k) {
      if (tools[k] == src) src_idx.push_back(static_cast<int>(k));
      if (tools[k] == dst) dst_idx.push_back(static_cast<int>(k));
    }
    if (src_idx.empty()) throw SchemaError(path + ".source: tool not invoked by plan: " + src);
    if (dst_idx.empty()) throw SchemaError(path + ".target: tool not invoked by plan: " + dst);
    bool placed = false;
    for (int a : src_idx) {
      for (int b : dst_idx) {
        if (a == b || links.count({a, b})) continue;
        links.emplace(a, b);
        placed = true;
        break;
      }
      if (placed) break;
    }
    // A link duplicating every representable pair is dropped (idempotent).
  }
  return PlanInstance{std::move(id), build_plan_graph(request, steps, tools, links)};
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open file: " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline void save_json_file(const std::string& path, const json& j, int indent = 2) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open file for writing: " + path);
  os << j.dump(indent) << "\n";
}

/// One JSON object per line.
inline std::vector<json> load_jsonl_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open file: " + path);
  std::vector<json> out;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw SchemaError(path + ":" + std::to_string(ln) + ": " + e.what());
    }
  }
  return out;
}

inline void save_jsonl_file(const std::string& path, const std::vector<json>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open file for writing: " + path);
  for (const auto& row : rows) os << row.dump() << "\n";
}

}  // namespace planverify
