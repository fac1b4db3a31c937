#pragma once

#include <limits>
#include <string>
#include <vector>

#include "planverify/embedding.hpp"
#include "planverify/graph.hpp"
#include "planverify/nn.hpp"

namespace planverify {

/// Step--tool alignment scorer: one hidden layer over [e(step); e(tool)] to a
/// scalar logit. The output layer is zero-initialized so an untrained scorer
/// yields logit 0 for every input.
class AlignmentScorer {
 public:
  AlignmentScorer() = default;

  AlignmentScorer(nn::ParameterStore& store, std::size_t provider_dim, std::size_t hidden,
                  Rng& rng)
      : provider_dim_(provider_dim) {
    w1_ = store.xavier("align.l0.w", 2 * provider_dim, hidden, rng);
    b1_ = store.zeros("align.l0.b", {hidden});
    w2_ = store.zeros("align.l1.w", {hidden, 1});
    b2_ = store.zeros("align.l1.b", {1});
  }

  std::size_t provider_dim() const { return provider_dim_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  /// Tape-recorded logits for a batch of concatenated [e(s); e(t)] rows.
  nn::Tensor forward(const nn::Tensor& inputs) const {
    using namespace nn;
    Tensor h = relu(add_bias(matmul(inputs, w1_), b1_));
    return add_bias(matmul(h, w2_), b2_);
  }

  /// Raw alignment logit g(s, t) from precomputed embeddings.
  double score_embedded(const EmbeddingVector& step_emb, const EmbeddingVector& tool_emb) const {
    std::vector<double> in;
    in.reserve(step_emb.size() + tool_emb.size());
    in.insert(in.end(), step_emb.begin(), step_emb.end());
    in.insert(in.end(), tool_emb.begin(), tool_emb.end());
    const std::size_t hidden = w1_.shape()[1];
    std::vector<double> h(b1_.data());
    const auto& w1 = w1_.data();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double x = in[i];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < hidden; ++j) h[j] += x * w1[i * hidden + j];
    }
    double out = b2_.data()[0];
    const auto& w2 = w2_.data();
    for (std::size_t j = 0; j < hidden; ++j)
      if (h[j] > 0.0) out += h[j] * w2[j];
    return out;
  }

  double score(const std::string& step, const Tool& tool, const EmbeddingProvider& provider) const {
    return score_embedded(provider.embed(step), provider.embed(tool.description));
  }

 private:
  std::size_t provider_dim_ = 0;
  nn::Tensor w1_, b1_, w2_, b2_;
  bool trained_ = false;
};

/// Alignment margin of a node: the positive logit minus the best neighbor
/// logit. Zero by convention when the neighborhood is empty.
inline double alignment_margin(const AlignmentScorer& scorer, const PlanNode& node,
                               const ToolNeighborhood& neighborhood, const DependencyGraph& dep,
                               const EmbeddingProvider& provider) {
  if (node.is_start()) throw BadIndex("alignment_margin: Start node has no margin");
  if (neighborhood.neighbors.empty()) return 0.0;
  const EmbeddingVector step_emb = provider.embed(node.step_text);
  const double positive =
      scorer.score_embedded(step_emb, provider.embed(dep.tool(*node.tool).description));
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [id, cos] : neighborhood.neighbors) {
    (void)cos;
    best = std::max(best,
                    scorer.score_embedded(step_emb, provider.embed(dep.tool(id).description)));
  }
  return positive - best;
}

struct AlignmentTrainConfig {
  std::size_t hidden = 1024;
  double lr = 2e-5;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
};

struct AlignmentTrainReport {
  std::vector<double> loss_curve;
  std::size_t epochs_run = 0;
};

/// Softmax cross-entropy training over candidate sets {t_i} u N_K(t_i); the
/// ground-truth tool is the positive. Early-stops on training loss with the
/// configured patience.
inline AlignmentTrainReport train_alignment(AlignmentScorer& scorer,
                                            const std::vector<PlanGraph>& train_plans,
                                            const DependencyGraph& dep,
                                            const NeighborhoodMap& neighborhoods,
                                            const EmbeddingProvider& provider,
                                            const AlignmentTrainConfig& cfg,
                                            nn::ParameterStore& store) {
  struct Example {
    EmbeddingVector step_emb;
    std::vector<EmbeddingVector> candidate_embs;  // index 0 is the positive
  };
  std::vector<Example> examples;
  for (const auto& plan : train_plans) {
    for (const auto& node : plan.nodes) {
      if (node.is_start()) continue;
      Example ex;
      ex.step_emb = provider.embed(node.step_text);
      ex.candidate_embs.push_back(provider.embed(dep.tool(*node.tool).description));
      auto it = neighborhoods.find(*node.tool);
      if (it != neighborhoods.end())
        for (const auto& [id, cos] : it->second.neighbors) {
          (void)cos;
          ex.candidate_embs.push_back(provider.embed(dep.tool(id).description));
        }
      examples.push_back(std::move(ex));
    }
  }
  if (examples.empty()) throw EmptyTrainingSet("train_alignment: no training nodes");

  store.set_trainable([](const std::string& n) { return n.rfind("align.", 0) == 0; });
  nn::AdamOptimizer opt(cfg.lr);
  AlignmentTrainReport report;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    store.zero_grads();
    std::vector<nn::Tensor> losses;
    for (const auto& ex : examples) {
      std::vector<double> rows;
      const std::size_t width = 2 * ex.step_emb.size();
      rows.reserve(ex.candidate_embs.size() * width);
      for (const auto& cand : ex.candidate_embs) {
        rows.insert(rows.end(), ex.step_emb.begin(), ex.step_emb.end());
        rows.insert(rows.end(), cand.begin(), cand.end());
      }
      nn::Tensor inputs = nn::Tensor::matrix(ex.candidate_embs.size(), width, std::move(rows));
      nn::Tensor logits = scorer.forward(inputs);
      losses.push_back(nn::softmax_cross_entropy(logits, 0));
    }
    nn::Tensor loss = nn::scale(nn::add_n(losses), 1.0 / static_cast<double>(losses.size()));
    report.loss_curve.push_back(loss.item());
    nn::backward(loss);
    opt.step(store);
    ++report.epochs_run;
    if (loss.item() < best - 1e-12) {
      best = loss.item();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  scorer.mark_trained();
  return report;
}

}  // namespace planverify
