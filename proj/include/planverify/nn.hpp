#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "planverify/tensor.hpp"

namespace planverify::nn {

/// Named trainable tensors in stable insertion order. Names are unique; the
/// iteration order drives checkpoint layout and optimizer determinism.
class ParameterStore {
 public:
  Tensor create(const std::string& name, std::vector<std::size_t> shape,
                std::vector<double> values) {
    if (index_.count(name)) throw Error("parameter name already used: " + name);
    Tensor t = Tensor::from_values(std::move(shape), std::move(values), /*requires_grad=*/true);
    index_[name] = params_.size();
    params_.emplace_back(name, t);
    return t;
  }

  Tensor zeros(const std::string& name, std::vector<std::size_t> shape) {
    std::size_t total = 1;
    for (std::size_t d : shape) total *= d;
    return create(name, std::move(shape), std::vector<double>(total, 0.0));
  }

  /// Xavier-uniform initialized matrix [fan_in, fan_out].
  Tensor xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(fan_in * fan_out);
    for (double& x : v) x = rng.uniform(-limit, limit);
    return create(name, {fan_in, fan_out}, std::move(v));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter: " + name);
    return params_[it->second].second;
  }

  const std::vector<std::pair<std::string, Tensor>>& all() const { return params_; }

  void zero_grads() {
    for (auto& [name, t] : params_) {
      (void)name;
      t.node()->grad.assign(t.size(), 0.0);
    }
  }

  /// Enable gradient updates only for parameters whose name passes the filter.
  template <typename Pred>
  void set_trainable(Pred&& pred) {
    for (auto& [name, t] : params_) t.set_requires_grad(pred(name));
  }

  void set_all_trainable(bool b) {
    for (auto& [name, t] : params_) {
      (void)name;
      t.set_requires_grad(b);
    }
  }

  std::vector<double> snapshot() const {
    std::vector<double> flat;
    for (const auto& [name, t] : params_) {
      (void)name;
      flat.insert(flat.end(), t.data().begin(), t.data().end());
    }
    return flat;
  }

  void restore(const std::vector<double>& flat) {
    std::size_t off = 0;
    for (auto& [name, t] : params_) {
      (void)name;
      if (off + t.size() > flat.size()) throw Error("restore: snapshot too small");
      std::copy_n(flat.begin() + off, t.size(), t.data().begin());
      off += t.size();
    }
    if (off != flat.size()) throw Error("restore: snapshot size mismatch");
  }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::map<std::string, std::size_t> index_;
};

/// Feed-forward block with ReLU between layers. `output_relu` controls the
/// activation after the final layer; dropout applies after each hidden ReLU
/// in train mode.
class Mlp {
 public:
  Mlp() = default;

  Mlp(ParameterStore& store, const std::string& prefix, const std::vector<std::size_t>& dims,
      Rng& rng, bool output_relu = false, double dropout_p = 0.0)
      : output_relu_(output_relu), dropout_p_(dropout_p) {
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const std::string id = prefix + ".l" + std::to_string(l);
      weights_.push_back(store.xavier(id + ".w", dims[l], dims[l + 1], rng));
      biases_.push_back(store.zeros(id + ".b", {dims[l + 1]}));
    }
  }

  std::size_t layer_count() const { return weights_.size(); }
  std::size_t input_dim() const { return weights_.front().shape()[0]; }
  std::size_t output_dim() const { return weights_.back().shape()[1]; }

  /// Tape-recorded forward over a [m, in] matrix.
  Tensor forward(const Tensor& x, bool train_mode = false, Rng* rng = nullptr) const {
    Tensor h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = add_bias(matmul(h, weights_[l]), biases_[l]);
      const bool last = l + 1 == weights_.size();
      if (!last || output_relu_) h = relu(h);
      if (!last && dropout_p_ > 0.0) h = dropout(h, dropout_p_, train_mode, rng);
    }
    return h;
  }

  /// Tape-free eval forward for hot non-training paths. Matches forward() in
  /// eval mode exactly.
  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> h(x.begin(), x.end());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const std::size_t in = weights_[l].shape()[0];
      const std::size_t out = weights_[l].shape()[1];
      if (h.size() != in) throw ShapeMismatch("Mlp::apply: input width mismatch");
      std::vector<double> next(biases_[l].data());
      const auto& w = weights_[l].data();
      for (std::size_t i = 0; i < in; ++i) {
        const double hi = h[i];
        if (hi == 0.0) continue;
        for (std::size_t j = 0; j < out; ++j) next[j] += hi * w[i * out + j];
      }
      const bool last = l + 1 == weights_.size();
      if (!last || output_relu_)
        for (double& v : next) v = v > 0.0 ? v : 0.0;
      h = std::move(next);
    }
    return h;
  }

 private:
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  bool output_relu_ = false;
  double dropout_p_ = 0.0;
};

/// Adam with bias correction; moment buffers keyed by parameter name so the
/// same optimizer survives freezing/unfreezing subsets.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterStore& store) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : store.all()) {
      if (!p.requires_grad()) continue;
      auto node = p.node();
      if (node->grad.size() != node->value.size()) continue;  // never touched
      auto& m = moments_[name];
      if (m.m.size() != node->value.size()) {
        m.m.assign(node->value.size(), 0.0);
        m.v.assign(node->value.size(), 0.0);
      }
      for (std::size_t i = 0; i < node->value.size(); ++i) {
        const double g = node->grad[i];
        m.m[i] = beta1_ * m.m[i] + (1.0 - beta1_) * g;
        m.v[i] = beta2_ * m.v[i] + (1.0 - beta2_) * g * g;
        const double mhat = m.m[i] / bc1;
        const double vhat = m.v[i] / bc2;
        node->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  double learning_rate() const { return lr_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

// ---------------------------------------------------------------------------
// Checkpoint container: magic, format version, JSON metadata, raw parameters.
// Payload doubles are little-endian (asserted at build time for this target).
// ---------------------------------------------------------------------------

namespace ckpt {

constexpr char kMagic[6] = {'P', 'V', 'C', 'K', 'P', 'T'};
constexpr std::uint16_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian target");

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CorruptFile("checkpoint truncated");
  return v;
}

}  // namespace ckpt

inline void save_checkpoint(const std::string& path, const ParameterStore& store,
                            const nlohmann::json& metadata) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  os.write(ckpt::kMagic, sizeof(ckpt::kMagic));
  ckpt::write_raw(os, ckpt::kFormatVersion);
  const std::string meta = metadata.dump();
  ckpt::write_raw<std::uint64_t>(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  ckpt::write_raw<std::uint64_t>(os, store.all().size());
  for (const auto& [name, t] : store.all()) {
    ckpt::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    ckpt::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) ckpt::write_raw<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw Error("checkpoint write failed: " + path);
}

struct CheckpointData {
  nlohmann::json metadata;
  std::vector<std::pair<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>>>
      params;
};

inline CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptFile("cannot open checkpoint: " + path);
  char magic[sizeof(ckpt::kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, ckpt::kMagic, sizeof(magic)) != 0)
    throw CorruptFile("not a checkpoint file: " + path);
  const auto version = ckpt::read_raw<std::uint16_t>(is);
  if (version != ckpt::kFormatVersion)
    throw VersionMismatch("unsupported checkpoint format version " + std::to_string(version));
  const auto meta_len = ckpt::read_raw<std::uint64_t>(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw CorruptFile("checkpoint truncated in metadata");
  CheckpointData out;
  try {
    out.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile(std::string("checkpoint metadata unparsable: ") + e.what());
  }
  const auto count = ckpt::read_raw<std::uint64_t>(is);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = ckpt::read_raw<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = ckpt::read_raw<std::uint32_t>(is);
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(ckpt::read_raw<std::uint64_t>(is));
      total *= d;
    }
    std::vector<double> values(total);
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!is) throw CorruptFile("checkpoint truncated in parameter " + name);
    out.params.emplace_back(std::move(name), std::make_pair(std::move(shape), std::move(values)));
  }
  return out;
}

/// Copy checkpoint values into an existing store with identical layout.
inline void load_into_store(const CheckpointData& data, ParameterStore& store) {
  if (data.params.size() != store.all().size())
    throw CorruptFile("checkpoint parameter count does not match model");
  for (const auto& [name, payload] : data.params) {
    if (!store.has(name)) throw CorruptFile("checkpoint has unknown parameter: " + name);
    Tensor t = store.get(name);
    if (payload.first != t.shape())
      throw CorruptFile("checkpoint shape mismatch for parameter: " + name);
    std::copy(payload.second.begin(), payload.second.end(), t.data().begin());
  }
}

}  // namespace planverify::nn
