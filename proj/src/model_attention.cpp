#include <algorithm>
#include <cmath>
#include <vector>

#include "orchestra/errors.hpp"
#include "model_impl.hpp"

namespace orchestra::detail {
namespace {

/// Single causal self-attention head with learned token and position
/// embeddings, a residual connection, and a tanh readout. The state at
/// position i predicts token i + 1, so predictions need a non-empty prefix.
class AttentionModel final : public SequenceModel {
 public:
  explicit AttentionModel(const ModelDims& dims)
      : SequenceModel(dims, attention_param_count(dims)) {
    const auto V = vsize(), D = dsize(), L = static_cast<std::size_t>(dims.max_len);
    tok_ = 0;
    pos_ = tok_ + V * D;
    wq_ = pos_ + L * D;
    wk_ = wq_ + D * D;
    wv_ = wk_ + D * D;
    wo_ = wv_ + D * D;
    out_w_ = wo_ + D * D;
    out_b_ = out_w_ + V * D;
  }

  std::vector<ParamBlock> layout() const override {
    const auto V = vsize(), D = dsize(), L = static_cast<std::size_t>(dims_.max_len);
    return {{"tok_emb", tok_, V * D}, {"pos_emb", pos_, L * D}, {"query_w", wq_, D * D},
            {"key_w", wk_, D * D},    {"value_w", wv_, D * D},  {"mix_w", wo_, D * D},
            {"out_w", out_w_, V * D}, {"out_b", out_b_, V}};
  }

  double sequence_logprob(std::span<const int> tokens, std::size_t target_begin) const override {
    return logprob(tokens, target_begin, 0.0, {});
  }

  double accumulate_logprob_grad(std::span<const int> tokens, std::size_t target_begin,
                                 double scale, std::span<double> grad) const override {
    return logprob(tokens, target_begin, scale, grad);
  }

  void next_logits(std::span<const int> prefix, std::span<double> logits) const override {
    check_input(prefix, prefix.size());
    if (prefix.empty()) throw ValidationError("tiny-attention needs a non-empty prefix");
    Cache c;
    forward(prefix, prefix.size(), c);
    project(c.h.data() + (prefix.size() - 1) * dsize(), logits);
  }

  std::size_t feature_dim() const override { return dsize(); }

  void features(std::span<const int> tokens, std::span<double> out) const override {
    check_input(tokens, tokens.size());
    if (tokens.empty()) throw ValidationError("tiny-attention needs a non-empty sequence");
    Cache c;
    forward(tokens, tokens.size(), c);
    std::copy_n(c.h.begin() + static_cast<std::ptrdiff_t>((tokens.size() - 1) * dsize()), dsize(),
                out.begin());
  }

  void accumulate_feature_grad(std::span<const int> tokens, std::span<const double> dfeat,
                               std::span<double> grad) const override {
    check_input(tokens, tokens.size());
    if (tokens.empty()) throw ValidationError("tiny-attention needs a non-empty sequence");
    const std::size_t m = tokens.size();
    Cache c;
    forward(tokens, m, c);
    std::vector<double> dh(m * dsize(), 0.0);
    std::copy(dfeat.begin(), dfeat.end(), dh.begin() + static_cast<std::ptrdiff_t>((m - 1) * dsize()));
    backward(tokens, c, dh, grad);
  }

  std::unique_ptr<SequenceModel> clone() const override {
    return std::make_unique<AttentionModel>(*this);
  }

 private:
  struct Cache {
    std::size_t m = 0;
    std::vector<double> e, q, k, v, a, z, h;
  };

  std::size_t vsize() const { return static_cast<std::size_t>(dims_.vocab_size); }
  std::size_t dsize() const { return static_cast<std::size_t>(dims_.hidden); }

  const double* at(std::size_t off) const { return params_.data() + off; }

  static void matvec(const double* w, const double* x, double* y, std::size_t D) {
    for (std::size_t r = 0; r < D; ++r) {
      double acc = 0.0;
      for (std::size_t col = 0; col < D; ++col) acc += w[r * D + col] * x[col];
      y[r] = acc;
    }
  }

  /// y += W^T x
  static void matvec_t_add(const double* w, const double* x, double* y, std::size_t D) {
    for (std::size_t r = 0; r < D; ++r)
      for (std::size_t col = 0; col < D; ++col) y[col] += w[r * D + col] * x[r];
  }

  /// G += x y^T
  static void outer_add(double* g, const double* x, const double* y, std::size_t D) {
    for (std::size_t r = 0; r < D; ++r)
      for (std::size_t col = 0; col < D; ++col) g[r * D + col] += x[r] * y[col];
  }

  void forward(std::span<const int> tokens, std::size_t m, Cache& c) const {
    const auto D = dsize();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(D));
    c.m = m;
    c.e.assign(m * D, 0.0);
    c.q.assign(m * D, 0.0);
    c.k.assign(m * D, 0.0);
    c.v.assign(m * D, 0.0);
    c.a.assign(m * m, 0.0);
    c.z.assign(m * D, 0.0);
    c.h.assign(m * D, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double* e = &c.e[i * D];
      const double* te = at(tok_ + static_cast<std::size_t>(tokens[i]) * D);
      const double* pe = at(pos_ + i * D);
      for (std::size_t d = 0; d < D; ++d) e[d] = te[d] + pe[d];
      matvec(at(wq_), e, &c.q[i * D], D);
      matvec(at(wk_), e, &c.k[i * D], D);
      matvec(at(wv_), e, &c.v[i * D], D);
    }
    std::vector<double> o(D);
    for (std::size_t i = 0; i < m; ++i) {
      double* a = &c.a[i * m];
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) s += c.q[i * D + d] * c.k[j * D + d];
        a[j] = s * inv_sqrt;
      }
      softmax(std::span<double>(a, i + 1));
      double* z = &c.z[i * D];
      for (std::size_t j = 0; j <= i; ++j)
        for (std::size_t d = 0; d < D; ++d) z[d] += a[j] * c.v[j * D + d];
      matvec(at(wo_), z, o.data(), D);
      for (std::size_t d = 0; d < D; ++d) c.h[i * D + d] = std::tanh(c.e[i * D + d] + o[d]);
    }
  }

  void project(const double* h, std::span<double> logits) const {
    const auto V = vsize(), D = dsize();
    for (std::size_t t = 0; t < V; ++t) {
      const double* w = at(out_w_ + t * D);
      double acc = params_[out_b_ + t];
      for (std::size_t d = 0; d < D; ++d) acc += w[d] * h[d];
      logits[t] = acc;
    }
  }

  double logprob(std::span<const int> tokens, std::size_t target_begin, double scale,
                 std::span<double> grad) const {
    check_input(tokens, target_begin);
    const std::size_t n = tokens.size();
    if (target_begin >= n) return 0.0;
    if (target_begin == 0) throw ValidationError("tiny-attention needs a non-empty context");
    const auto V = vsize(), D = dsize();
    const std::size_t m = n - 1;
    Cache c;
    forward(tokens, m, c);
    const bool want_grad = !grad.empty();
    std::vector<double> dh;
    if (want_grad) dh.assign(m * D, 0.0);
    std::vector<double> logits(V);
    double total = 0.0;
    for (std::size_t p = target_begin; p < n; ++p) {
      const double* h = &c.h[(p - 1) * D];
      project(h, logits);
      log_softmax(logits);
      const auto y = static_cast<std::size_t>(tokens[p]);
      total += logits[y];
      if (!want_grad) continue;
      double* dhp = &dh[(p - 1) * D];
      for (std::size_t t = 0; t < V; ++t) {
        const double d = scale * ((t == y ? 1.0 : 0.0) - std::exp(logits[t]));
        grad[out_b_ + t] += d;
        double* gw = grad.data() + out_w_ + t * D;
        const double* w = at(out_w_ + t * D);
        for (std::size_t k = 0; k < D; ++k) {
          gw[k] += d * h[k];
          dhp[k] += d * w[k];
        }
      }
    }
    if (want_grad) backward(tokens, c, dh, grad);
    return total;
  }

  void backward(std::span<const int> tokens, const Cache& c, std::span<const double> dh,
                std::span<double> grad) const {
    const auto D = dsize();
    const std::size_t m = c.m;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(D));
    std::vector<double> de(m * D, 0.0), dq(m * D, 0.0), dk(m * D, 0.0), dv(m * D, 0.0);
    std::vector<double> dr(D), dz(D), da(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double* h = &c.h[i * D];
      bool any = false;
      for (std::size_t d = 0; d < D; ++d) {
        dr[d] = dh[i * D + d] * (1.0 - h[d] * h[d]);
        any = any || dr[d] != 0.0;
      }
      if (!any) continue;
      for (std::size_t d = 0; d < D; ++d) de[i * D + d] += dr[d];
      // o = Wo z
      outer_add(grad.data() + wo_, dr.data(), &c.z[i * D], D);
      std::fill(dz.begin(), dz.end(), 0.0);
      matvec_t_add(at(wo_), dr.data(), dz.data(), D);
      const double* a = &c.a[i * m];
      double dot = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
          s += dz[d] * c.v[j * D + d];
          dv[j * D + d] += a[j] * dz[d];
        }
        da[j] = s;
        dot += a[j] * s;
      }
      for (std::size_t j = 0; j <= i; ++j) {
        const double ds = a[j] * (da[j] - dot) * inv_sqrt;
        for (std::size_t d = 0; d < D; ++d) {
          dq[i * D + d] += ds * c.k[j * D + d];
          dk[j * D + d] += ds * c.q[i * D + d];
        }
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double* e = &c.e[i * D];
      outer_add(grad.data() + wq_, &dq[i * D], e, D);
      outer_add(grad.data() + wk_, &dk[i * D], e, D);
      outer_add(grad.data() + wv_, &dv[i * D], e, D);
      double* dei = &de[i * D];
      matvec_t_add(at(wq_), &dq[i * D], dei, D);
      matvec_t_add(at(wk_), &dk[i * D], dei, D);
      matvec_t_add(at(wv_), &dv[i * D], dei, D);
      double* gt = grad.data() + tok_ + static_cast<std::size_t>(tokens[i]) * D;
      double* gp = grad.data() + pos_ + i * D;
      for (std::size_t d = 0; d < D; ++d) {
        gt[d] += dei[d];
        gp[d] += dei[d];
      }
    }
  }

  std::size_t tok_ = 0, pos_ = 0, wq_ = 0, wk_ = 0, wv_ = 0, wo_ = 0, out_w_ = 0, out_b_ = 0;
};

}  // namespace

std::size_t attention_param_count(const ModelDims& dims) {
  const auto V = static_cast<std::size_t>(dims.vocab_size);
  const auto D = static_cast<std::size_t>(dims.hidden);
  const auto L = static_cast<std::size_t>(dims.max_len);
  return V * D + L * D + 4 * D * D + V * D + V;
}

std::unique_ptr<SequenceModel> make_attention(const ModelDims& dims) {
  return std::make_unique<AttentionModel>(dims);
}

}  // namespace orchestra::detail
