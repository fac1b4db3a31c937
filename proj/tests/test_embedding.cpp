#include "planverify/embedding.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace planverify;
using Catch::Approx;

namespace {

DependencyGraph tiny_dep(std::size_t n) {
  std::vector<Tool> tools;
  for (std::size_t i = 0; i < n; ++i) {
    tools.push_back(Tool{"tool" + std::to_string(i),
                         "convert item number " + std::to_string(i) + " payload",
                         {"x"},
                         {"x"}});
  }
  std::set<std::pair<ToolId, ToolId>> edges;
  for (std::size_t i = 0; i + 1 < n; ++i)
    edges.emplace("tool" + std::to_string(i), "tool" + std::to_string(i + 1));
  return DependencyGraph::create(std::move(tools), std::move(edges));
}

}  // namespace

TEST_CASE("hashing embedder basics") {
  HashingEmbedder emb(64, 7);
  SECTION("deterministic") {
    REQUIRE(emb.embed("resize the image") == emb.embed("resize the image"));
  }
  SECTION("unit norm") {
    auto v = emb.embed("detect objects in a photo");
    REQUIRE(cosine(v, v) == Approx(1.0).margin(1e-9));
    double n = 0;
    for (double x : v) n += x * x;
    REQUIRE(std::sqrt(n) == Approx(1.0).margin(1e-12));
  }
  SECTION("empty text maps to the fixed null vector") {
    auto v = emb.embed("");
    REQUIRE(v[0] == 1.0);
    for (std::size_t i = 1; i < v.size(); ++i) REQUIRE(v[i] == 0.0);
    REQUIRE(emb.embed("   .,!") == v);
  }
  SECTION("pure across instances: same (seed, dim, text) -> same vector") {
    HashingEmbedder other(64, 7);
    REQUIRE(other.embed("Mix the Audio tracks") == emb.embed("mix the audio tracks"));
  }
  SECTION("disjoint hash buckets give cosine zero") {
    // Single-token texts land in exactly one bucket each; distinct buckets
    // are orthogonal by construction.
    EmbeddingVector a = emb.embed("alpha");
    EmbeddingVector b;
    const char* words[] = {"beta", "gamma", "delta", "epsilon", "zeta"};
    for (const char* w : words) {
      b = emb.embed(w);
      bool same_bucket = false;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != 0.0 && b[i] != 0.0) same_bucket = true;
      if (!same_bucket) break;
    }
    REQUIRE(cosine(a, b) == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("request_tool_similarity") {
  HashingEmbedder emb(64, 7);
  Tool t{"t", "translate text to french", {"a"}, {"b"}};
  SECTION("identical texts score one") {
    REQUIRE(request_tool_similarity("translate text to french", t, emb) ==
            Approx(1.0).margin(1e-9));
  }
  SECTION("cosine symmetry") {
    auto a = emb.embed("one two three");
    auto b = emb.embed("four five");
    REQUIRE(cosine(a, b) == Approx(cosine(b, a)).margin(1e-15));
  }
}

TEST_CASE("topk neighborhoods") {
  HashingEmbedder emb(64, 3);
  SECTION("capped by tool count") {
    auto dep = tiny_dep(3);
    auto nbrs = topk_neighborhood(dep, emb, 10);
    for (const auto& [id, nb] : nbrs) {
      REQUIRE(nb.neighbors.size() == 2);
      for (const auto& [other, score] : nb.neighbors) {
        REQUIRE(other != id);
        REQUIRE(score >= -1.0);
        REQUIRE(score <= 1.0);
      }
    }
  }
  SECTION("capped at K") {
    auto dep = tiny_dep(15);
    auto nbrs = topk_neighborhood(dep, emb, 10);
    for (const auto& [id, nb] : nbrs) REQUIRE(nb.neighbors.size() == 10);
  }
  SECTION("sorted descending with deterministic ties") {
    auto dep = tiny_dep(12);
    auto nbrs = topk_neighborhood(dep, emb, 11);
    for (const auto& [id, nb] : nbrs) {
      for (std::size_t i = 1; i < nb.neighbors.size(); ++i) {
        REQUIRE(nb.neighbors[i - 1].second >= nb.neighbors[i].second);
        if (nb.neighbors[i - 1].second == nb.neighbors[i].second)
          REQUIRE(nb.neighbors[i - 1].first < nb.neighbors[i].first);
      }
    }
  }
  SECTION("identical descriptions rank each other first with cosine one") {
    std::vector<Tool> tools{Tool{"a", "exactly the same words", {"x"}, {"x"}},
                            Tool{"b", "exactly the same words", {"x"}, {"x"}},
                            Tool{"c", "completely different phrasing here", {"x"}, {"x"}}};
    auto dep = DependencyGraph::create(std::move(tools), {});
    auto nbrs = topk_neighborhood(dep, emb, 10);
    REQUIRE(nbrs["a"].neighbors[0].first == "b");
    REQUIRE(nbrs["a"].neighbors[0].second == Approx(1.0).margin(1e-12));
    REQUIRE(nbrs["b"].neighbors[0].first == "a");
  }
}

TEST_CASE("path stats") {
  SECTION("single chain t1->t2->t3") {
    auto g = build_plan_graph("r", {"a", "b", "c"}, {"t1", "t2", "t3"}, {{0, 1}, {1, 2}});
    auto stats = build_path_stats({g});
    REQUIRE(stats.f2("t1", "t2") == 1);
    REQUIRE(stats.f2("t2", "t3") == 1);
    REQUIRE(stats.count({"t1", "t2", "t3"}) == 1);
    for (const auto& [seq, c] : stats.counts) REQUIRE(seq.size() <= 3);
  }
  SECTION("counts add over plans") {
    auto g = build_plan_graph("r", {"a", "b"}, {"t1", "t2"}, {{0, 1}});
    auto stats = build_path_stats({g, g});
    REQUIRE(stats.f2("t1", "t2") == 2);
  }
  SECTION("empty training set") {
    REQUIRE(build_path_stats({}).counts.empty());
  }
  SECTION("matches brute-force enumeration on random plans") {
    Rng rng(99);
    const std::vector<ToolId> pool{"u", "v", "w", "x"};
    for (int trial = 0; trial < 60; ++trial) {
      std::vector<PlanGraph> plans;
      const int plan_count = 1 + static_cast<int>(rng.uniform_int(3));
      for (int p = 0; p < plan_count; ++p) {
        const int m = 1 + static_cast<int>(rng.uniform_int(6));
        std::vector<std::string> steps;
        std::vector<ToolId> tools;
        for (int i = 0; i < m; ++i) {
          steps.push_back("s");
          tools.push_back(pool[rng.uniform_int(pool.size())]);
        }
        std::set<std::pair<int, int>> links;
        for (int u = 0; u < m; ++u)
          for (int v = u + 1; v < m; ++v)
            if (rng.bernoulli(0.4)) links.emplace(u, v);
        plans.push_back(build_plan_graph("r", steps, tools, links));
      }
      auto stats = build_path_stats(plans);
      auto expected = oracle::brute_force_paths(plans, 4);
      REQUIRE(stats.counts == expected);
    }
  }
}
