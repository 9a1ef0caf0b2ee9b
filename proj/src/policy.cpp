#include "orchestra/policy.hpp"

#include <algorithm>
#include <cmath>

#include "orchestra/errors.hpp"

namespace orchestra {

PolicyModel::PolicyModel(std::unique_ptr<SequenceModel> net, std::string vocab_hash)
    : net_(std::move(net)), vocab_hash_(std::move(vocab_hash)) {
  if (!net_) throw ValidationError("PolicyModel without a network");
}

PolicyModel::PolicyModel(const PolicyModel& other)
    : net_(other.net_->clone()), vocab_hash_(other.vocab_hash_), provenance_(other.provenance_) {}

PolicyModel& PolicyModel::operator=(const PolicyModel& other) {
  if (this != &other) {
    net_ = other.net_->clone();
    vocab_hash_ = other.vocab_hash_;
    provenance_ = other.provenance_;
  }
  return *this;
}

double PolicyModel::sequence_logprob(std::span<const int> context,
                                     std::span<const int> target) const {
  TokenSeq joined(context.begin(), context.end());
  joined.insert(joined.end(), target.begin(), target.end());
  return net_->sequence_logprob(joined, context.size());
}

FrozenPolicy snapshot_reference(const PolicyModel& model) {
  return std::make_shared<const PolicyModel>(model);
}

PolicyModel make_policy(const Vocabulary& vocab, const ModelDims& shape, Init init,
                        std::uint64_t seed, double init_scale) {
  ModelDims dims = shape;
  dims.vocab_size = vocab.size();
  return PolicyModel(make_model(dims, init, seed, init_scale), vocab.hash());
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::vector<double> next_distribution(const SequenceModel& model, std::span<const int> prefix,
                                      double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  std::vector<double> logits(static_cast<std::size_t>(model.vocab_size()));
  model.next_logits(prefix, logits);
  for (auto& v : logits) v /= temperature;
  softmax(logits);
  return logits;
}

TokenSeq sample_continuation(const SequenceModel& model, std::span<const int> context, int eos,
                             const SampleOptions& options, Rng& rng) {
  if (!options.greedy && !(options.temperature > 0.0))
    throw ValidationError("temperature must be positive");
  TokenSeq seq(context.begin(), context.end());
  std::vector<double> logits(static_cast<std::size_t>(model.vocab_size()));
  const std::size_t room =
      static_cast<std::size_t>(std::max(0, model.dims().max_len - static_cast<int>(context.size())));
  const std::size_t limit = std::min(static_cast<std::size_t>(std::max(0, options.max_len)), room);
  TokenSeq out;
  while (out.size() < limit) {
    model.next_logits(seq, logits);
    std::size_t tok;
    if (options.greedy) {
      tok = argmax_lowest(logits);
    } else {
      for (auto& v : logits) v /= options.temperature;
      softmax(logits);
      tok = rng.categorical(logits);
    }
    out.push_back(static_cast<int>(tok));
    seq.push_back(static_cast<int>(tok));
    if (static_cast<int>(tok) == eos) break;
  }
  return out;
}

TokenSeq sample_call(const SequenceModel& model, const Vocabulary& vocab,
                     std::span<const int> context, double temperature, Rng& rng) {
  TokenSeq seq(context.begin(), context.end());
  auto dist = next_distribution(model, seq, temperature);
  const int first = static_cast<int>(rng.categorical(dist));
  TokenSeq out{first};
  const ToolSpec* spec = vocab.tool(first);
  if (spec && spec->param_arity == 1) {
    seq.push_back(first);
    dist = next_distribution(model, seq, temperature);
    out.push_back(static_cast<int>(rng.categorical(dist)));
  }
  return out;
}

}  // namespace orchestra
