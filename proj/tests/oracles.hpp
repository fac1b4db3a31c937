#pragma once

// Test-only oracles, independent of the library's computation paths: finite
// differences for gradients, brute-force enumeration for path statistics,
// confusion-matrix F1, and multiset plan metrics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "planverify/graph.hpp"
#include "planverify/nn.hpp"

namespace oracle {

/// Central finite-difference derivative of scalar function f at x[i].
inline double central_difference(const std::function<double()>& f, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double hi = f();
  x = saved - eps;
  const double lo = f();
  x = saved;
  return (hi - lo) / (2.0 * eps);
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compare analytic grads of `loss_fn` (a fresh forward pass each call)
/// against central differences for every coordinate of every trainable
/// parameter in the store. Relative error uses a small absolute floor so
/// near-zero gradients do not blow up the ratio.
inline GradCheckResult finite_difference_check(planverify::nn::ParameterStore& store,
                                               const std::function<planverify::nn::Tensor()>& loss_fn,
                                               double eps = 1e-4, double atol = 1e-8) {
  using planverify::nn::backward;
  store.zero_grads();
  planverify::nn::Tensor loss = loss_fn();
  backward(loss);
  std::map<std::string, std::vector<double>> analytic;
  for (const auto& [name, t] : store.all()) analytic[name] = t.grad();

  GradCheckResult result;
  auto value_fn = [&]() { return loss_fn().item(); };
  for (auto& [name, t] : store.all()) {
    if (!t.requires_grad()) continue;
    auto& vals = t.node()->value;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double numeric = central_difference(value_fn, vals[i], eps);
      const double a = analytic[name].empty() ? 0.0 : analytic[name][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), atol});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

/// All directed tool paths of node count in [2, max_len] by explicit
/// recursion over plan edges, Start excluded.
inline std::map<std::vector<planverify::ToolId>, std::uint64_t> brute_force_paths(
    const std::vector<planverify::PlanGraph>& plans, std::size_t max_len = 4) {
  std::map<std::vector<planverify::ToolId>, std::uint64_t> counts;
  for (const auto& plan : plans) {
    std::function<void(int, std::vector<planverify::ToolId>&)> visit =
        [&](int node, std::vector<planverify::ToolId>& path) {
          if (path.size() >= 2) counts[path] += 1;
          if (path.size() == max_len) return;
          for (const auto& [u, v] : plan.edges) {
            if (u != node || u == planverify::kStartNodeId) continue;
            path.push_back(*plan.node(v).tool);
            visit(v, path);
            path.pop_back();
          }
        };
    for (const auto& n : plan.nodes) {
      if (n.is_start()) continue;
      std::vector<planverify::ToolId> path{*n.tool};
      visit(n.node_id, path);
    }
  }
  return counts;
}

/// F1 of (score >= threshold) as positive predictor, by explicit confusion
/// matrix.
inline double f1_at_threshold(const std::vector<std::pair<double, int>>& scored, double threshold) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [score, label] : scored) {
    const bool pred = score >= threshold;
    if (pred && label == 1) ++tp;
    else if (pred && label == 0) ++fp;
    else if (!pred && label == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

/// Multiset intersection size.
template <typename T>
std::size_t multiset_overlap(std::vector<T> a, std::vector<T> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<T> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return common.size();
}

/// Brute-force n-F1 over tool multisets.
inline double node_f1_oracle(const planverify::PlanGraph& pred, const planverify::PlanGraph& gt) {
  auto p = pred.tool_sequence();
  auto g = gt.tool_sequence();
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  const double m = static_cast<double>(multiset_overlap(p, g));
  const double precision = m / static_cast<double>(p.size());
  const double recall = m / static_cast<double>(g.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

/// Brute-force l-F1 over directed tool-pair multisets.
inline double link_f1_oracle(const planverify::PlanGraph& pred, const planverify::PlanGraph& gt) {
  auto p = pred.tool_edges();
  auto g = gt.tool_edges();
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  const double m = static_cast<double>(multiset_overlap(p, g));
  const double precision = m / static_cast<double>(p.size());
  const double recall = m / static_cast<double>(g.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

inline int accuracy_oracle(const planverify::PlanGraph& pred, const planverify::PlanGraph& gt) {
  auto pn = pred.tool_sequence();
  auto gn = gt.tool_sequence();
  auto pe = pred.tool_edges();
  auto ge = gt.tool_edges();
  std::sort(pn.begin(), pn.end());
  std::sort(gn.begin(), gn.end());
  std::sort(pe.begin(), pe.end());
  std::sort(ge.begin(), ge.end());
  return pn == gn && pe == ge ? 1 : 0;
}

/// Area under the ROC curve via pairwise comparison (ties count half).
inline double roc_auc(const std::vector<std::pair<double, int>>& scored) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (const auto& [sp, lp] : scored) {
    if (lp != 1) continue;
    for (const auto& [sn, ln] : scored) {
      if (ln != 0) continue;
      ++pairs;
      if (sp > sn) wins += 1.0;
      else if (sp == sn) wins += 0.5;
    }
  }
  return pairs == 0 ? 0.5 : wins / static_cast<double>(pairs);
}

}  // namespace oracle
