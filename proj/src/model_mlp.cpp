#include <algorithm>
#include <cmath>
#include <vector>

#include "model_impl.hpp"

namespace orchestra::detail {
namespace {

/// Weight of the prefix bag at a position that has seen `count` tokens.
double bag_scale(std::size_t count) { return count == 0 ? 0.0 : 1.0 / static_cast<double>(count); }

/// One-hidden-layer network over the last `window` tokens (one embedding
/// table per slot, PAD before the start) plus the mean embedding of every
/// token in the prefix, so that instruction fields stay visible however long
/// the history grows.
class MlpModel final : public SequenceModel {
 public:
  explicit MlpModel(const ModelDims& dims) : SequenceModel(dims, mlp_param_count(dims)) {
    const auto V = vsize(), H = hsize(), W = static_cast<std::size_t>(dims.window);
    slot_ = 0;
    bag_ = slot_ + W * (V + 1) * H;
    hidden_b_ = bag_ + V * H;
    out_w_ = hidden_b_ + H;
    out_b_ = out_w_ + V * H;
  }

  std::vector<ParamBlock> layout() const override {
    const auto V = vsize(), H = hsize(), W = static_cast<std::size_t>(dims_.window);
    return {{"slot_w", slot_, W * (V + 1) * H},
            {"bag_w", bag_, V * H},
            {"hidden_b", hidden_b_, H},
            {"out_w", out_w_, V * H},
            {"out_b", out_b_, V}};
  }

  double sequence_logprob(std::span<const int> tokens, std::size_t target_begin) const override {
    check_input(tokens, target_begin);
    return run(tokens, target_begin, 0.0, {});
  }

  double accumulate_logprob_grad(std::span<const int> tokens, std::size_t target_begin,
                                 double scale, std::span<double> grad) const override {
    check_input(tokens, target_begin);
    return run(tokens, target_begin, scale, grad);
  }

  void next_logits(std::span<const int> prefix, std::span<double> logits) const override {
    check_input(prefix, prefix.size());
    std::vector<double> hid(hsize());
    hidden_at_end(prefix, hid);
    project(hid, logits);
  }

  std::size_t feature_dim() const override { return hsize(); }

  void features(std::span<const int> tokens, std::span<double> out) const override {
    check_input(tokens, tokens.size());
    hidden_at_end(tokens, out);
  }

  void accumulate_feature_grad(std::span<const int> tokens, std::span<const double> dfeat,
                               std::span<double> grad) const override {
    check_input(tokens, tokens.size());
    const auto H = hsize();
    std::vector<double> hid(H), dpre(H);
    hidden_at_end(tokens, hid);
    for (std::size_t h = 0; h < H; ++h) dpre[h] = dfeat[h] * (1.0 - hid[h] * hid[h]);
    backprop_pre(tokens, tokens.size(), dpre, grad);
    const double bs = bag_scale(tokens.size());
    for (int tok : tokens) {
      double* g = grad.data() + bag_ + static_cast<std::size_t>(tok) * H;
      for (std::size_t h = 0; h < H; ++h) g[h] += bs * dpre[h];
    }
  }

  std::unique_ptr<SequenceModel> clone() const override { return std::make_unique<MlpModel>(*this); }

 private:
  std::size_t vsize() const { return static_cast<std::size_t>(dims_.vocab_size); }
  std::size_t hsize() const { return static_cast<std::size_t>(dims_.hidden); }

  std::size_t slot_row(std::size_t k, std::span<const int> tokens, std::size_t p) const {
    const auto V = vsize();
    const std::size_t tok = p >= k + 1 ? static_cast<std::size_t>(tokens[p - 1 - k]) : V;
    return slot_ + (k * (V + 1) + tok) * hsize();
  }

  /// pre-activation at position p given the summed bag of tokens[0..p).
  void preactivation(std::span<const int> tokens, std::size_t p, std::span<const double> bag_acc,
                     std::span<double> pre) const {
    const auto H = hsize();
    const double bs = bag_scale(p);
    for (std::size_t h = 0; h < H; ++h) pre[h] = params_[hidden_b_ + h] + bs * bag_acc[h];
    for (std::size_t k = 0; k < static_cast<std::size_t>(dims_.window); ++k) {
      const double* w = params_.data() + slot_row(k, tokens, p);
      for (std::size_t h = 0; h < H; ++h) pre[h] += w[h];
    }
  }

  void hidden_at_end(std::span<const int> tokens, std::span<double> hid) const {
    const auto H = hsize();
    std::vector<double> bag_acc(H, 0.0);
    for (int tok : tokens) add_bag(tok, bag_acc);
    preactivation(tokens, tokens.size(), bag_acc, hid);
    for (auto& v : hid) v = std::tanh(v);
  }

  void add_bag(int tok, std::span<double> bag_acc) const {
    const double* w = params_.data() + bag_ + static_cast<std::size_t>(tok) * hsize();
    for (std::size_t h = 0; h < hsize(); ++h) bag_acc[h] += w[h];
  }

  void project(std::span<const double> hid, std::span<double> logits) const {
    const auto V = vsize(), H = hsize();
    for (std::size_t v = 0; v < V; ++v) {
      const double* w = params_.data() + out_w_ + v * H;
      double acc = params_[out_b_ + v];
      for (std::size_t h = 0; h < H; ++h) acc += w[h] * hid[h];
      logits[v] = acc;
    }
  }

  /// Adds dpre into the hidden bias and the slot rows read at position p.
  void backprop_pre(std::span<const int> tokens, std::size_t p, std::span<const double> dpre,
                    std::span<double> grad) const {
    const auto H = hsize();
    for (std::size_t h = 0; h < H; ++h) grad[hidden_b_ + h] += dpre[h];
    for (std::size_t k = 0; k < static_cast<std::size_t>(dims_.window); ++k) {
      double* g = grad.data() + slot_row(k, tokens, p);
      for (std::size_t h = 0; h < H; ++h) g[h] += dpre[h];
    }
  }

  double run(std::span<const int> tokens, std::size_t target_begin, double scale,
             std::span<double> grad) const {
    const auto V = vsize(), H = hsize();
    const std::size_t n = tokens.size();
    const bool want_grad = !grad.empty();
    std::vector<double> bag_acc(H, 0.0), pre(H), logits(V), dhid(H);
    std::vector<double> dpre_store;
    if (want_grad) dpre_store.assign(n * H, 0.0);
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p >= target_begin) {
        preactivation(tokens, p, bag_acc, pre);
        for (auto& v : pre) v = std::tanh(v);
        project(pre, logits);
        log_softmax(logits);
        const auto y = static_cast<std::size_t>(tokens[p]);
        total += logits[y];
        if (want_grad) {
          // d logp / d logit = onehot(y) - softmax
          std::fill(dhid.begin(), dhid.end(), 0.0);
          for (std::size_t v = 0; v < V; ++v) {
            const double d = scale * ((v == y ? 1.0 : 0.0) - std::exp(logits[v]));
            grad[out_b_ + v] += d;
            double* gw = grad.data() + out_w_ + v * H;
            const double* w = params_.data() + out_w_ + v * H;
            for (std::size_t h = 0; h < H; ++h) {
              gw[h] += d * pre[h];
              dhid[h] += d * w[h];
            }
          }
          double* dpre = dpre_store.data() + p * H;
          for (std::size_t h = 0; h < H; ++h) dpre[h] = dhid[h] * (1.0 - pre[h] * pre[h]);
          backprop_pre(tokens, p, std::span<const double>(dpre, H), grad);
        }
      }
      add_bag(tokens[p], bag_acc);
    }
    if (want_grad) {
      // Token j feeds the bag of every later position p with weight 1/p.
      std::vector<double> suffix(H, 0.0);
      for (std::size_t j = n; j-- > 0;) {
        double* g = grad.data() + bag_ + static_cast<std::size_t>(tokens[j]) * H;
        for (std::size_t h = 0; h < H; ++h) g[h] += suffix[h];
        const double* dpre = dpre_store.data() + j * H;
        const double bs = bag_scale(j);
        for (std::size_t h = 0; h < H; ++h) suffix[h] += bs * dpre[h];
      }
    }
    return total;
  }

  std::size_t slot_ = 0, bag_ = 0, hidden_b_ = 0, out_w_ = 0, out_b_ = 0;
};

}  // namespace

std::size_t mlp_param_count(const ModelDims& dims) {
  const auto V = static_cast<std::size_t>(dims.vocab_size);
  const auto H = static_cast<std::size_t>(dims.hidden);
  const auto W = static_cast<std::size_t>(dims.window);
  return W * (V + 1) * H + V * H + H + V * H + V;
}

std::unique_ptr<SequenceModel> make_mlp(const ModelDims& dims) {
  return std::make_unique<MlpModel>(dims);
}

}  // namespace orchestra::detail
