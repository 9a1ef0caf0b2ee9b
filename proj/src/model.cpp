#include "orchestra/model.hpp"

#include <algorithm>
#include <cmath>

#include "orchestra/errors.hpp"
#include "orchestra/rng.hpp"
#include "model_impl.hpp"

namespace orchestra {

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::Bigram: return "tabular-bigram";
    case Arch::Mlp: return "mlp-context-window";
    case Arch::Attention: return "tiny-attention";
  }
  return "?";
}

Arch parse_arch(std::string_view name) {
  if (name == "tabular-bigram") return Arch::Bigram;
  if (name == "mlp-context-window") return Arch::Mlp;
  if (name == "tiny-attention") return Arch::Attention;
  throw ConfigError("unknown architecture: " + std::string(name));
}

SequenceModel::SequenceModel(ModelDims dims, std::size_t num_params)
    : dims_(dims), params_(num_params, 0.0) {}

void SequenceModel::check_input(std::span<const int> tokens, std::size_t target_begin) const {
  if (tokens.size() > static_cast<std::size_t>(dims_.max_len))
    throw ValidationError("sequence of " + std::to_string(tokens.size()) +
                          " tokens exceeds the context window of " + std::to_string(dims_.max_len));
  if (target_begin > tokens.size()) throw ValidationError("target start past end of sequence");
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] < 0 || tokens[i] >= dims_.vocab_size)
      throw ValidationError("token id " + std::to_string(tokens[i]) + " out of range at position " +
                            std::to_string(i));
}

double log_softmax(std::span<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (double& v : logits) v -= lse;
  return lse;
}

void softmax(std::span<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

std::size_t param_count(const ModelDims& dims) {
  switch (dims.arch) {
    case Arch::Bigram: return detail::bigram_param_count(dims);
    case Arch::Mlp: return detail::mlp_param_count(dims);
    case Arch::Attention: return detail::attention_param_count(dims);
  }
  return 0;
}

std::unique_ptr<SequenceModel> make_model(const ModelDims& dims, Init init, std::uint64_t seed,
                                          double init_scale) {
  if (dims.vocab_size < 2) throw ValidationError("vocabulary must have at least two tokens");
  if (dims.max_len < 2) throw ValidationError("max_len must be at least 2");
  if (dims.arch != Arch::Bigram && dims.hidden < 1) throw ValidationError("hidden width must be positive");
  if (dims.arch == Arch::Mlp && dims.window < 1) throw ValidationError("window must be positive");
  std::unique_ptr<SequenceModel> model;
  switch (dims.arch) {
    case Arch::Bigram: model = detail::make_bigram(dims); break;
    case Arch::Mlp: model = detail::make_mlp(dims); break;
    case Arch::Attention: model = detail::make_attention(dims); break;
  }
  if (init == Init::Random) {
    Rng rng(derive_seed(seed, "init"));
    auto p = model->params();
    for (const auto& block : model->layout()) {
      if (detail::is_bias(block.name)) continue;
      for (std::size_t i = 0; i < block.size; ++i) p[block.offset + i] = init_scale * rng.normal();
    }
  }
  return model;
}

}  // namespace orchestra
