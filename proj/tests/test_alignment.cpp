#include "planverify/alignment.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace planverify;
using Catch::Approx;

namespace {

// Tools whose descriptions share a family word but differ in a distinctive
// verb, so step text (= the description) separates them cleanly.
DependencyGraph synth_dep() {
  std::vector<Tool> tools;
  const std::vector<std::string> verbs{"resize", "crop",  "rotate", "sharpen",
                                       "encode", "decode", "mix",    "split"};
  for (const auto& v : verbs)
    tools.push_back(Tool{v, v + " the media payload carefully", {"x"}, {"x"}});
  return DependencyGraph::create(std::move(tools), {});
}

std::vector<PlanGraph> synth_plans(const DependencyGraph& dep) {
  std::vector<PlanGraph> plans;
  for (const auto& [id, tool] : dep.tools()) {
    plans.push_back(build_plan_graph("use " + id, {tool.description}, {id}, {}));
  }
  return plans;
}

}  // namespace

TEST_CASE("untrained scorer with zero output layer gives logit zero") {
  nn::ParameterStore store;
  Rng rng(1);
  AlignmentScorer scorer(store, 32, 16, rng);
  HashingEmbedder emb(32, 5);
  Tool t{"t", "any tool description", {"a"}, {"b"}};
  REQUIRE(scorer.score("some step", t, emb) == 0.0);
  REQUIRE(scorer.score("another step", t, emb) == 0.0);
  REQUIRE_FALSE(scorer.trained());
}

TEST_CASE("score is deterministic and order-sensitive") {
  nn::ParameterStore store;
  Rng rng(2);
  AlignmentScorer scorer(store, 16, 8, rng);
  // Give the output layer nonzero weights so logits are informative.
  auto w2 = store.get("align.l1.w");
  for (std::size_t i = 0; i < w2.size(); ++i) w2.data()[i] = 0.1 * static_cast<double>(i + 1);
  HashingEmbedder emb(16, 5);
  Tool a{"a", "first description", {"x"}, {"x"}};
  SECTION("same input twice gives identical logit") {
    REQUIRE(scorer.score("step", a, emb) == scorer.score("step", a, emb));
  }
  SECTION("swapping the concat halves changes the logit") {
    const double ab = scorer.score_embedded(emb.embed("first description"),
                                            emb.embed("second description"));
    const double ba = scorer.score_embedded(emb.embed("second description"),
                                            emb.embed("first description"));
    REQUIRE(ab != ba);
  }
}

TEST_CASE("alignment margin") {
  nn::ParameterStore store;
  Rng rng(3);
  AlignmentScorer scorer(store, 16, 8, rng);
  HashingEmbedder emb(16, 5);
  auto dep = DependencyGraph::create({Tool{"a", "alpha words", {"x"}, {"x"}},
                                      Tool{"b", "beta words", {"x"}, {"x"}},
                                      Tool{"c", "gamma words", {"x"}, {"x"}}},
                                     {});
  PlanNode node{1, ToolId("a"), "alpha words"};
  SECTION("empty neighborhood gives zero by convention") {
    ToolNeighborhood empty{"a", {}};
    REQUIRE(alignment_margin(scorer, node, empty, dep, emb) == 0.0);
  }
  SECTION("margin equals positive minus best neighbor logit") {
    auto w2 = store.get("align.l1.w");
    for (std::size_t i = 0; i < w2.size(); ++i) w2.data()[i] = (i % 2 == 0) ? 0.2 : -0.1;
    ToolNeighborhood nb{"a", {{"b", 0.9}, {"c", 0.8}}};
    const double expected =
        scorer.score("alpha words", dep.tool("a"), emb) -
        std::max(scorer.score("alpha words", dep.tool("b"), emb),
                 scorer.score("alpha words", dep.tool("c"), emb));
    REQUIRE(alignment_margin(scorer, node, nb, dep, emb) == Approx(expected).margin(1e-12));
  }
  SECTION("margin is zero when the positive ties the best neighbor") {
    // Zero output layer: every logit is 0, so the margin is 0 - 0.
    ToolNeighborhood nb{"a", {{"b", 0.9}}};
    REQUIRE(alignment_margin(scorer, node, nb, dep, emb) == 0.0);
  }
  SECTION("margin is invariant to neighborhood order") {
    auto w2 = store.get("align.l1.w");
    for (std::size_t i = 0; i < w2.size(); ++i) w2.data()[i] = 0.05 * static_cast<double>(i);
    ToolNeighborhood fwd{"a", {{"b", 0.9}, {"c", 0.8}}};
    ToolNeighborhood rev{"a", {{"c", 0.8}, {"b", 0.9}}};
    REQUIRE(alignment_margin(scorer, node, fwd, dep, emb) ==
            alignment_margin(scorer, node, rev, dep, emb));
  }
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  Rng rng(11);
  nn::ParameterStore store;
  AlignmentScorer scorer(store, 8, 6, rng);
  // Random output layer so gradients flow everywhere.
  auto w2 = store.get("align.l1.w");
  for (auto& v : w2.data()) v = rng.uniform(-0.5, 0.5);
  HashingEmbedder emb(8, 17);
  std::vector<EmbeddingVector> cands{emb.embed("one"), emb.embed("two"), emb.embed("three")};
  EmbeddingVector step = emb.embed("query step");
  auto loss_fn = [&] {
    std::vector<double> rows;
    for (const auto& c : cands) {
      rows.insert(rows.end(), step.begin(), step.end());
      rows.insert(rows.end(), c.begin(), c.end());
    }
    nn::Tensor in = nn::Tensor::matrix(3, 16, rows);
    return nn::softmax_cross_entropy(scorer.forward(in), 0);
  };
  auto result = oracle::finite_difference_check(store, loss_fn);
  REQUIRE(result.max_rel_error < 1e-3);
}

TEST_CASE("training on separable synthetic data") {
  auto dep = synth_dep();
  auto plans = synth_plans(dep);
  HashingEmbedder emb(64, 9);
  auto nbrs = topk_neighborhood(dep, emb, 10);
  nn::ParameterStore store;
  Rng rng(21);
  AlignmentScorer scorer(store, 64, 32, rng);
  AlignmentTrainConfig cfg;
  cfg.hidden = 32;
  cfg.lr = 5e-3;
  cfg.max_epochs = 300;
  auto report = train_alignment(scorer, plans, dep, nbrs, emb, cfg, store);
  REQUIRE(scorer.trained());

  SECTION("loss curve is non-increasing until patience triggers") {
    double best = report.loss_curve.front();
    for (double v : report.loss_curve) {
      REQUIRE(v <= best + 1e-6);
      best = std::min(best, v);
    }
    REQUIRE(report.loss_curve.back() < report.loss_curve.front());
  }
  SECTION("positive beats every neighbor on >=95% of training nodes") {
    std::size_t wins = 0, total = 0;
    for (const auto& plan : plans) {
      for (const auto& node : plan.nodes) {
        if (node.is_start()) continue;
        ++total;
        const double pos = scorer.score(node.step_text, dep.tool(*node.tool), emb);
        bool beat_all = true;
        for (const auto& [other, cosv] : nbrs.at(*node.tool).neighbors) {
          (void)cosv;
          beat_all = beat_all && pos > scorer.score(node.step_text, dep.tool(other), emb);
        }
        wins += beat_all ? 1 : 0;
      }
    }
    REQUIRE(static_cast<double>(wins) >= 0.95 * static_cast<double>(total));
  }
}

TEST_CASE("training with a singleton candidate set yields zero loss") {
  // One tool, no neighbors: softmax over a single logit is certainty.
  auto dep = DependencyGraph::create({Tool{"only", "the only tool", {"x"}, {"x"}}}, {});
  auto plan = build_plan_graph("r", {"the only tool"}, {"only"}, {});
  HashingEmbedder emb(16, 4);
  NeighborhoodMap nbrs;  // empty: K candidates beyond the positive do not exist
  nn::ParameterStore store;
  Rng rng(5);
  AlignmentScorer scorer(store, 16, 8, rng);
  AlignmentTrainConfig cfg;
  cfg.max_epochs = 3;
  auto report = train_alignment(scorer, {plan}, dep, nbrs, emb, cfg, store);
  for (double v : report.loss_curve) REQUIRE(v == Approx(0.0).margin(1e-12));
}

TEST_CASE("empty training set throws") {
  auto dep = synth_dep();
  HashingEmbedder emb(16, 4);
  nn::ParameterStore store;
  Rng rng(5);
  AlignmentScorer scorer(store, 16, 8, rng);
  AlignmentTrainConfig cfg;
  REQUIRE_THROWS_AS(train_alignment(scorer, {}, dep, {}, emb, cfg, store), EmptyTrainingSet);
}
