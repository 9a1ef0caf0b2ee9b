#include <algorithm>
#include <cmath>
#include <vector>

#include "model_impl.hpp"

namespace orchestra::detail {
namespace {

/// Logits depend on the previous token only; row V stands for the empty prefix.
class BigramModel final : public SequenceModel {
 public:
  explicit BigramModel(const ModelDims& dims) : SequenceModel(dims, bigram_param_count(dims)) {}

  std::vector<ParamBlock> layout() const override { return {{"table", 0, params_.size()}}; }

  double sequence_logprob(std::span<const int> tokens, std::size_t target_begin) const override {
    check_input(tokens, target_begin);
    const auto V = static_cast<std::size_t>(vocab_size());
    std::vector<double> row(V);
    double total = 0.0;
    for (std::size_t p = target_begin; p < tokens.size(); ++p) {
      load_row(p == 0 ? V : static_cast<std::size_t>(tokens[p - 1]), row);
      log_softmax(row);
      total += row[static_cast<std::size_t>(tokens[p])];
    }
    return total;
  }

  double accumulate_logprob_grad(std::span<const int> tokens, std::size_t target_begin,
                                 double scale, std::span<double> grad) const override {
    check_input(tokens, target_begin);
    const auto V = static_cast<std::size_t>(vocab_size());
    std::vector<double> row(V);
    double total = 0.0;
    for (std::size_t p = target_begin; p < tokens.size(); ++p) {
      const std::size_t r = p == 0 ? V : static_cast<std::size_t>(tokens[p - 1]);
      load_row(r, row);
      log_softmax(row);
      const auto y = static_cast<std::size_t>(tokens[p]);
      total += row[y];
      double* g = grad.data() + r * V;
      for (std::size_t v = 0; v < V; ++v) g[v] -= scale * std::exp(row[v]);
      g[y] += scale;
    }
    return total;
  }

  void next_logits(std::span<const int> prefix, std::span<double> logits) const override {
    check_input(prefix, prefix.size());
    const auto V = static_cast<std::size_t>(vocab_size());
    load_row(prefix.empty() ? V : static_cast<std::size_t>(prefix.back()), logits);
  }

  std::size_t feature_dim() const override { return static_cast<std::size_t>(vocab_size()); }

  void features(std::span<const int> tokens, std::span<double> out) const override {
    next_logits(tokens, out);
  }

  void accumulate_feature_grad(std::span<const int> tokens, std::span<const double> dfeat,
                               std::span<double> grad) const override {
    check_input(tokens, tokens.size());
    const auto V = static_cast<std::size_t>(vocab_size());
    const std::size_t r = tokens.empty() ? V : static_cast<std::size_t>(tokens.back());
    for (std::size_t v = 0; v < V; ++v) grad[r * V + v] += dfeat[v];
  }

  std::unique_ptr<SequenceModel> clone() const override {
    return std::make_unique<BigramModel>(*this);
  }

 private:
  void load_row(std::size_t r, std::span<double> out) const {
    const auto V = static_cast<std::size_t>(vocab_size());
    std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(r * V), V, out.begin());
  }
};

}  // namespace

std::size_t bigram_param_count(const ModelDims& dims) {
  const auto V = static_cast<std::size_t>(dims.vocab_size);
  return (V + 1) * V;
}

std::unique_ptr<SequenceModel> make_bigram(const ModelDims& dims) {
  return std::make_unique<BigramModel>(dims);
}

}  // namespace orchestra::detail
