#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "planverify/alignment.hpp"
#include "planverify/embedding.hpp"
#include "planverify/graph.hpp"
#include "planverify/nn.hpp"

namespace planverify {

// ---------------------------------------------------------------------------
// Edge feature formulas
// ---------------------------------------------------------------------------

/// Interface compatibility |out(u) n in(v)| / max(|in(v)|, 1).
inline double compat(const Tool& t_u, const Tool& t_v) {
  std::size_t overlap = 0;
  for (const auto& tag : t_u.output_types)
    if (t_v.input_types.count(tag)) ++overlap;
  const std::size_t denom = std::max<std::size_t>(t_v.input_types.size(), 1);
  return static_cast<double>(overlap) / static_cast<double>(denom);
}

/// Pairwise transition strength log(1 + f_2(u, v)).
inline double cooc(const PathStats& stats, const ToolId& t_u, const ToolId& t_v) {
  return std::log1p(static_cast<double>(stats.f2(t_u, t_v)));
}

/// Multi-step shortcut signal: max over observed 3- and 4-node sequences from
/// t_u to t_v of log(1 + f_n). Zero when no such sequence was observed.
inline double motif(const PathStats& stats, [[maybe_unused]] const DependencyGraph& dep,
                    const ToolId& t_u, const ToolId& t_v) {
  double best = 0.0;
  for (const auto& [seq, count] : stats.counts) {
    if (seq.size() < 3) continue;
    if (seq.front() == t_u && seq.back() == t_v)
      best = std::max(best, std::log1p(static_cast<double>(count)));
  }
  return best;
}

/// Precomputed (u, v) -> motif lookup; equals motif() on every pair.
class MotifIndex {
 public:
  MotifIndex() = default;
  explicit MotifIndex(const PathStats& stats) {
    for (const auto& [seq, count] : stats.counts) {
      if (seq.size() < 3) continue;
      auto& slot = index_[{seq.front(), seq.back()}];
      slot = std::max(slot, std::log1p(static_cast<double>(count)));
    }
  }
  double lookup(const ToolId& u, const ToolId& v) const {
    auto it = index_.find({u, v});
    return it == index_.end() ? 0.0 : it->second;
  }

 private:
  std::map<std::pair<ToolId, ToolId>, double> index_;
};

// ---------------------------------------------------------------------------
// Attributed-graph feature assembly
// ---------------------------------------------------------------------------

/// Shared type-tag vocabulary: the union of all in/out tags of the dependency
/// graph, sorted for stable multi-hot indexing.
class TypeVocab {
 public:
  TypeVocab() = default;
  explicit TypeVocab(const DependencyGraph& dep) {
    std::set<std::string> tags;
    for (const auto& [id, t] : dep.tools()) {
      tags.insert(t.input_types.begin(), t.input_types.end());
      tags.insert(t.output_types.begin(), t.output_types.end());
    }
    tags_.assign(tags.begin(), tags.end());
    for (std::size_t i = 0; i < tags_.size(); ++i) index_[tags_[i]] = i;
  }

  std::size_t size() const { return tags_.size(); }
  const std::vector<std::string>& tags() const { return tags_; }

  std::vector<double> multi_hot(const std::set<std::string>& tags) const {
    std::vector<double> v(tags_.size(), 0.0);
    for (const auto& t : tags) {
      auto it = index_.find(t);
      if (it != index_.end()) v[it->second] = 1.0;
    }
    return v;
  }

 private:
  std::vector<std::string> tags_;
  std::map<std::string, std::size_t> index_;
};

struct NodeFeatures {
  EmbeddingVector tool_emb;
  EmbeddingVector step_emb;
  std::vector<double> io_in;
  std::vector<double> io_out;
  double delta = 0.0;

  std::vector<double> concat() const {
    std::vector<double> v;
    v.reserve(tool_emb.size() + step_emb.size() + io_in.size() + io_out.size() + 1);
    v.insert(v.end(), tool_emb.begin(), tool_emb.end());
    v.insert(v.end(), step_emb.begin(), step_emb.end());
    v.insert(v.end(), io_in.begin(), io_in.end());
    v.insert(v.end(), io_out.begin(), io_out.end());
    v.push_back(delta);
    return v;
  }
};

struct EdgeFeatures {
  double compat = 0.0;
  double cooc = 0.0;
  double motif = 0.0;
};

/// Everything needed to attribute a plan graph: static context shared by
/// training, verification and correction.
struct FeatureContext {
  const DependencyGraph* dep = nullptr;
  const NeighborhoodMap* neighborhoods = nullptr;
  const PathStats* stats = nullptr;
  const AlignmentScorer* scorer = nullptr;
  const EmbeddingProvider* provider = nullptr;
  const TypeVocab* vocab = nullptr;
  MotifIndex motif_index;

  static FeatureContext make(const DependencyGraph& dep, const NeighborhoodMap& nbrs,
                             const PathStats& stats, const AlignmentScorer& scorer,
                             const EmbeddingProvider& provider, const TypeVocab& vocab) {
    FeatureContext ctx;
    ctx.dep = &dep;
    ctx.neighborhoods = &nbrs;
    ctx.stats = &stats;
    ctx.scorer = &scorer;
    ctx.provider = &provider;
    ctx.vocab = &vocab;
    ctx.motif_index = MotifIndex(stats);
    return ctx;
  }
};

inline NodeFeatures node_features(const FeatureContext& ctx, const PlanNode& node) {
  if (node.is_start()) throw BadIndex("node_features: Start node uses a learnable embedding");
  const Tool& tool = ctx.dep->tool(*node.tool);
  NodeFeatures f;
  f.tool_emb = ctx.provider->embed(tool.description);
  f.step_emb = ctx.provider->embed(node.step_text);
  f.io_in = ctx.vocab->multi_hot(tool.input_types);
  f.io_out = ctx.vocab->multi_hot(tool.output_types);
  auto it = ctx.neighborhoods->find(*node.tool);
  static const ToolNeighborhood kEmpty{};
  f.delta = alignment_margin(*ctx.scorer, node, it == ctx.neighborhoods->end() ? kEmpty : it->second,
                             *ctx.dep, *ctx.provider);
  return f;
}

inline EdgeFeatures edge_features(const FeatureContext& ctx, const ToolId& t_u, const ToolId& t_v) {
  EdgeFeatures f;
  f.compat = compat(ctx.dep->tool(t_u), ctx.dep->tool(t_v));
  f.cooc = cooc(*ctx.stats, t_u, t_v);
  f.motif = ctx.motif_index.lookup(t_u, t_v);
  return f;
}

/// Learned projections from raw features to model width, plus the learnable
/// Start node/edge embeddings.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;

  FeatureEncoder(nn::ParameterStore& store, std::size_t provider_dim, std::size_t vocab_size,
                 std::size_t width, Rng& rng, double dropout_p = 0.0)
      : width_(width) {
    const std::size_t node_in = 2 * provider_dim + 2 * vocab_size + 1;
    node_mlp_ = nn::Mlp(store, "feat.node", {node_in, width}, rng, /*output_relu=*/true, dropout_p);
    edge_mlp_ = nn::Mlp(store, "feat.edge", {3, width}, rng, /*output_relu=*/true, dropout_p);
    start_node_ = store.create("feat.start_node", {1, width}, xavier_row(width, rng));
    start_edge_ = store.create("feat.start_edge", {1, width}, xavier_row(width, rng));
  }

  std::size_t width() const { return width_; }
  const nn::Mlp& node_mlp() const { return node_mlp_; }
  const nn::Mlp& edge_mlp() const { return edge_mlp_; }
  nn::Tensor start_node_embedding() const { return start_node_; }
  nn::Tensor start_edge_embedding() const { return start_edge_; }

  /// x_v for a tool node's assembled features.
  nn::Tensor node_embedding(const NodeFeatures& f, bool train = false, Rng* rng = nullptr) const {
    auto flat = f.concat();
    return node_mlp_.forward(nn::Tensor::matrix(1, flat.size(), std::move(flat)), train, rng);
  }

  /// x_uv for a non-Start edge's features.
  nn::Tensor edge_embedding(const EdgeFeatures& f, bool train = false, Rng* rng = nullptr) const {
    return edge_mlp_.forward(nn::Tensor::matrix(1, 3, {f.compat, f.cooc, f.motif}), train, rng);
  }

 private:
  static std::vector<double> xavier_row(std::size_t width, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(1 + width));
    std::vector<double> v(width);
    for (double& x : v) x = rng.uniform(-limit, limit);
    return v;
  }

  std::size_t width_ = 0;
  nn::Mlp node_mlp_, edge_mlp_;
  nn::Tensor start_node_, start_edge_;
};

}  // namespace planverify
