#pragma once

#include <map>
#include <string>
#include <vector>

#include "planverify/features.hpp"
#include "planverify/graph.hpp"
#include "planverify/nn.hpp"

namespace planverify {

/// Constant per-plan inputs: raw feature rows and the request embedding.
/// Computable once per plan and reused across epochs.
struct PlanFeatures {
  std::vector<std::vector<double>> node_rows;        // per tool node, concat'd features
  std::vector<std::pair<int, int>> edge_list;        // all edges, ascending
  std::vector<std::vector<double>> edge_rows;        // per non-Start edge [compat, cooc, motif]
  std::vector<std::size_t> edge_slot;                // per edge: 0 = Start row, else 1+rank
  EmbeddingVector request_emb;
};

inline PlanFeatures precompute_plan_features(const FeatureContext& ctx, const PlanGraph& plan) {
  PlanFeatures pf;
  pf.request_emb = ctx.provider->embed(plan.request);
  for (const auto& n : plan.nodes) {
    if (n.is_start()) continue;
    pf.node_rows.push_back(node_features(ctx, n).concat());
  }
  std::size_t non_start = 0;
  for (const auto& e : plan.edges) {
    pf.edge_list.push_back(e);
    if (e.first == kStartNodeId) {
      pf.edge_slot.push_back(0);
    } else {
      const EdgeFeatures f =
          edge_features(ctx, *plan.node(e.first).tool, *plan.node(e.second).tool);
      pf.edge_rows.push_back({f.compat, f.cooc, f.motif});
      pf.edge_slot.push_back(1 + non_start++);
    }
  }
  return pf;
}

struct VerifierConfig {
  std::size_t layers = 3;
  std::size_t width = 1024;
  std::size_t request_dim = 256;  // provider dimension
  double dropout = 0.1;
};

/// Directed, edge-aware message-passing encoder with learnable epsilon per
/// layer, plus the three scoring heads.
class VerifierModel {
 public:
  VerifierModel() = default;

  VerifierModel(nn::ParameterStore& store, const VerifierConfig& cfg, Rng& rng) : cfg_(cfg) {
    const std::size_t h = cfg.width;
    const std::size_t msg_in = 2 * h + cfg.request_dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string p = "gnn.l" + std::to_string(l);
      Layer layer;
      layer.phi_in = nn::Mlp(store, p + ".in", {msg_in, h, h}, rng, false, cfg.dropout);
      layer.phi_out = nn::Mlp(store, p + ".out", {msg_in, h, h}, rng, false, cfg.dropout);
      layer.update = nn::Mlp(store, p + ".upd", {h, h, h}, rng, false, cfg.dropout);
      layer.eps = store.zeros(p + ".eps", {1});
      layers_.push_back(std::move(layer));
    }
    f_g_ = nn::Mlp(store, "head.g", {h, 1}, rng);
    f_v_ = nn::Mlp(store, "head.v", {h, 1}, rng);
    f_e_ = nn::Mlp(store, "head.e", {3 * h, 1}, rng);
  }

  const VerifierConfig& config() const { return cfg_; }

  struct Encoded {
    nn::Tensor node_states;   // [n, H]
    nn::Tensor graph_state;   // [1, H]
    nn::Tensor edge_embs;     // [E, H] in edge_list order
    std::vector<std::pair<int, int>> edge_list;
  };

  /// Message passing over the attributed plan graph. `encoder` supplies the
  /// feature projections and Start embeddings.
  Encoded encode(const FeatureEncoder& encoder, const PlanGraph& plan, const PlanFeatures& pf,
                 bool train = false, Rng* rng = nullptr) const {
    using namespace nn;
    const std::size_t n = plan.nodes.size();
    const std::size_t tool_count = pf.node_rows.size();

    // Initial node states: learnable Start row stacked over projected tool rows.
    Tensor x;
    if (tool_count > 0) {
      std::vector<double> flat;
      const std::size_t fdim = pf.node_rows[0].size();
      flat.reserve(tool_count * fdim);
      for (const auto& row : pf.node_rows) flat.insert(flat.end(), row.begin(), row.end());
      Tensor features = Tensor::matrix(tool_count, fdim, std::move(flat));
      x = concat_rows({encoder.start_node_embedding(), encoder.node_mlp().forward(features, train, rng)});
    } else {
      x = encoder.start_node_embedding();
    }

    // Edge embeddings: gather Start parameter or projected feature rows.
    const std::size_t e_count = pf.edge_list.size();
    Tensor edge_embs;
    if (e_count > 0) {
      Tensor bank;
      if (!pf.edge_rows.empty()) {
        std::vector<double> flat;
        flat.reserve(pf.edge_rows.size() * 3);
        for (const auto& row : pf.edge_rows) flat.insert(flat.end(), row.begin(), row.end());
        Tensor feats = Tensor::matrix(pf.edge_rows.size(), 3, std::move(flat));
        bank = concat_rows({encoder.start_edge_embedding(), encoder.edge_mlp().forward(feats, train, rng)});
      } else {
        bank = encoder.start_edge_embedding();
      }
      edge_embs = gather_rows(bank, pf.edge_slot);
    } else {
      edge_embs = Tensor::zeros({0, cfg_.width});
    }

    std::vector<std::size_t> src, dst;
    for (const auto& [u, v] : pf.edge_list) {
      src.push_back(static_cast<std::size_t>(u));
      dst.push_back(static_cast<std::size_t>(v));
    }

    // Request embedding replicated per edge; constant input to every message.
    Tensor request_block;
    if (e_count > 0) {
      std::vector<double> rep;
      rep.reserve(e_count * pf.request_emb.size());
      for (std::size_t i = 0; i < e_count; ++i)
        rep.insert(rep.end(), pf.request_emb.begin(), pf.request_emb.end());
      request_block = Tensor::matrix(e_count, pf.request_emb.size(), std::move(rep));
    }

    for (const auto& layer : layers_) {
      Tensor combined;
      if (e_count > 0) {
        Tensor h_src = gather_rows(x, src);
        Tensor h_dst = gather_rows(x, dst);
        Tensor msg_in = layer.phi_in.forward(concat_cols({h_src, edge_embs, request_block}),
                                             train, rng);
        Tensor msg_out = layer.phi_out.forward(concat_cols({h_dst, edge_embs, request_block}),
                                               train, rng);
        Tensor m_in = scatter_sum_rows(msg_in, dst, n);
        Tensor m_out = scatter_sum_rows(msg_out, src, n);
        combined = add(scale_one_plus(x, layer.eps), add(m_in, m_out));
      } else {
        combined = scale_one_plus(x, layer.eps);
      }
      x = layer.update.forward(combined, train, rng);
    }

    Encoded enc;
    enc.node_states = x;
    enc.graph_state = mean_rows(x);
    enc.edge_embs = edge_embs;
    enc.edge_list = pf.edge_list;
    return enc;
  }

  struct ScoredTensors {
    nn::Tensor graph_logit;   // [1, 1]
    nn::Tensor node_logits;   // [n, 1], row order = node ids (Start included)
    nn::Tensor edge_logits;   // [E, 1] in edge_list order
  };

  ScoredTensors score_tensors(const Encoded& enc, bool train = false, Rng* rng = nullptr) const {
    using namespace nn;
    ScoredTensors out;
    out.graph_logit = f_g_.forward(enc.graph_state, train, rng);
    out.node_logits = f_v_.forward(enc.node_states, train, rng);
    if (!enc.edge_list.empty()) {
      std::vector<std::size_t> src, dst;
      for (const auto& [u, v] : enc.edge_list) {
        src.push_back(static_cast<std::size_t>(u));
        dst.push_back(static_cast<std::size_t>(v));
      }
      Tensor h_u = gather_rows(enc.node_states, src);
      Tensor h_v = gather_rows(enc.node_states, dst);
      out.edge_logits = f_e_.forward(concat_cols({h_u, h_v, enc.edge_embs}), train, rng);
    } else {
      out.edge_logits = Tensor::zeros({0, 1});
    }
    return out;
  }

 private:
  struct Layer {
    nn::Mlp phi_in, phi_out, update;
    nn::Tensor eps;
  };
  VerifierConfig cfg_;
  std::vector<Layer> layers_;
  nn::Mlp f_g_, f_v_, f_e_;
};

/// Probabilistic verifier outputs plus the raw logits used by the losses.
struct VerifierOutput {
  double graph_score = 0.5;
  double graph_logit = 0.0;
  std::map<int, double> node_risk;
  std::map<int, double> node_logit;
  std::map<std::pair<int, int>, double> edge_risk;
  std::map<std::pair<int, int>, double> edge_logit;
};

inline double sigmoid_value(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Eval-mode scoring of one plan: graph score, per-node and per-edge risks.
/// Node risk is computed for every node including Start; downstream editing
/// never thresholds the Start entry.
inline VerifierOutput score_plan(const VerifierModel& model, const FeatureEncoder& encoder,
                                 const FeatureContext& ctx, const PlanGraph& plan) {
  const PlanFeatures pf = precompute_plan_features(ctx, plan);
  const auto enc = model.encode(encoder, plan, pf);
  const auto scored = model.score_tensors(enc);
  VerifierOutput out;
  out.graph_logit = scored.graph_logit.item();
  out.graph_score = sigmoid_value(out.graph_logit);
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const double z = scored.node_logits.data()[i];
    out.node_logit[static_cast<int>(i)] = z;
    out.node_risk[static_cast<int>(i)] = sigmoid_value(z);
  }
  for (std::size_t e = 0; e < enc.edge_list.size(); ++e) {
    const double z = scored.edge_logits.data()[e];
    out.edge_logit[enc.edge_list[e]] = z;
    out.edge_risk[enc.edge_list[e]] = sigmoid_value(z);
  }
  return out;
}

}  // namespace planverify
