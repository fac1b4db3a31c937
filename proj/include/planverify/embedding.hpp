#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "planverify/errors.hpp"
#include "planverify/graph.hpp"
#include "planverify/rng.hpp"

namespace planverify {

using EmbeddingVector = std::vector<double>;

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw ShapeMismatch("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Text-embedding provider contract: deterministic per (provider, input),
/// fixed dimension, unit-norm output. Implementations must be callable from
/// multiple threads after construction.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;

  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }
};

/// Signed feature hashing of lowercased word tokens, L2-normalized. Pure in
/// (seed, dim, text) across processes; the stand-in for a real text encoder
/// in hermetic runs.
class HashingEmbedder : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dim = 256, std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw Error("HashingEmbedder: dim must be positive");
  }

  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed(std::string_view text) const override {
    EmbeddingVector v(dim_, 0.0);
    std::size_t tokens = 0;
    std::string word;
    auto flush = [&] {
      if (word.empty()) return;
      const std::uint64_t h = mix64(fnv1a64(word, seed_));
      const std::size_t bucket = static_cast<std::size_t>(h % dim_);
      const double sign = (h >> 63) ? -1.0 : 1.0;
      v[bucket] += sign;
      ++tokens;
      word.clear();
    };
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c)))
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      else
        flush();
    }
    flush();
    if (tokens == 0) {
      // Fixed null-text vector: first basis direction.
      v[0] = 1.0;
      return v;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      v.assign(dim_, 0.0);
      v[0] = 1.0;
      return v;
    }
    for (double& x : v) x /= norm;
    return v;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Memoizing wrapper; safe for concurrent use. Embeddings of repeated texts
/// (tool descriptions, step templates) dominate the pipelines.
class CachingProvider : public EmbeddingProvider {
 public:
  explicit CachingProvider(std::shared_ptr<const EmbeddingProvider> inner)
      : inner_(std::move(inner)) {}

  std::size_t dim() const override { return inner_->dim(); }

  EmbeddingVector embed(std::string_view text) const override {
    const std::string key(text);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    EmbeddingVector v = inner_->embed(text);
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(key, std::move(v)).first->second;
  }

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::mutex mu_;
  mutable std::map<std::string, EmbeddingVector> cache_;
};

// ---------------------------------------------------------------------------
// Semantic neighborhoods
// ---------------------------------------------------------------------------

struct ToolNeighborhood {
  ToolId tool;
  std::vector<std::pair<ToolId, double>> neighbors;  // cosine descending

  bool contains(const ToolId& id) const {
    for (const auto& [t, s] : neighbors)
      if (t == id) return true;
    return false;
  }
};

using NeighborhoodMap = std::map<ToolId, ToolNeighborhood>;

/// Top-K semantic neighborhood per tool by description cosine. Each list has
/// min(K, |tools|-1) entries; ties broken by tool id.
inline NeighborhoodMap topk_neighborhood(const DependencyGraph& dep,
                                         const EmbeddingProvider& provider, std::size_t k) {
  if (k == 0) throw Error("topk_neighborhood: K must be >= 1");
  const auto ids = dep.tool_ids();
  std::map<ToolId, EmbeddingVector> embs;
  for (const auto& id : ids) embs[id] = provider.embed(dep.tool(id).description);
  NeighborhoodMap out;
  for (const auto& id : ids) {
    std::vector<std::pair<ToolId, double>> scored;
    for (const auto& other : ids) {
      if (other == id) continue;
      scored.emplace_back(other, cosine(embs[id], embs[other]));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (scored.size() > k) scored.resize(k);
    out[id] = ToolNeighborhood{id, std::move(scored)};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tool-sequence path statistics
// ---------------------------------------------------------------------------

/// Occurrence counts of directed tool sequences of length 2..4 (node count)
/// along plan edges, summed over the training plans. Start is excluded.
struct PathStats {
  std::map<std::vector<ToolId>, std::uint64_t> counts;

  std::uint64_t count(const std::vector<ToolId>& seq) const {
    auto it = counts.find(seq);
    return it == counts.end() ? 0 : it->second;
  }

  std::uint64_t f2(const ToolId& u, const ToolId& v) const { return count({u, v}); }
};

inline PathStats build_path_stats(const std::vector<PlanGraph>& train_plans) {
  PathStats stats;
  for (const auto& plan : train_plans) {
    std::vector<std::vector<int>> adj(plan.nodes.size());
    for (const auto& [u, v] : plan.edges)
      if (u != kStartNodeId) adj[static_cast<std::size_t>(u)].push_back(v);
    // Enumerate all directed edge-paths of 2..4 nodes from each tool node.
    for (std::size_t s = 1; s < plan.nodes.size(); ++s) {
      std::vector<ToolId> path{*plan.nodes[s].tool};
      std::vector<std::pair<int, std::size_t>> stack{{static_cast<int>(s), 0}};
      while (!stack.empty()) {
        auto& [u, next] = stack.back();
        const auto& nbrs = adj[static_cast<std::size_t>(u)];
        if (path.size() < 4 && next < nbrs.size()) {
          const int w = nbrs[next++];
          path.push_back(*plan.node(w).tool);
          stats.counts[path] += 1;
          stack.emplace_back(w, 0);
        } else {
          path.pop_back();
          stack.pop_back();
        }
      }
    }
  }
  return stats;
}

inline double request_tool_similarity(const std::string& request, const Tool& tool,
                                      const EmbeddingProvider& provider) {
  return cosine(provider.embed(request), provider.embed(tool.description));
}

}  // namespace planverify
