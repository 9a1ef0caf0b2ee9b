#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "orchestra/model.hpp"
#include "orchestra/rng.hpp"
#include "orchestra/vocab.hpp"

namespace orchestra {

/// A sequence model bound to a vocabulary (by hash) with a record of the
/// training stages that produced it. Copies are deep.
class PolicyModel {
 public:
  PolicyModel(std::unique_ptr<SequenceModel> net, std::string vocab_hash);
  PolicyModel(const PolicyModel& other);
  PolicyModel& operator=(const PolicyModel& other);
  PolicyModel(PolicyModel&&) noexcept = default;
  PolicyModel& operator=(PolicyModel&&) noexcept = default;

  const SequenceModel& net() const { return *net_; }
  SequenceModel& net() { return *net_; }
  const std::string& vocab_hash() const { return vocab_hash_; }

  const std::vector<std::string>& provenance() const { return provenance_; }
  void add_provenance(std::string stage) { provenance_.push_back(std::move(stage)); }

  double sequence_logprob(std::span<const int> context, std::span<const int> target) const;

 private:
  std::unique_ptr<SequenceModel> net_;
  std::string vocab_hash_;
  std::vector<std::string> provenance_;
};

using FrozenPolicy = std::shared_ptr<const PolicyModel>;

/// Deep immutable copy, used as a DPO reference.
FrozenPolicy snapshot_reference(const PolicyModel& model);

PolicyModel make_policy(const Vocabulary& vocab, const ModelDims& shape, Init init,
                        std::uint64_t seed, double init_scale = 0.1);

struct SampleOptions {
  double temperature = 1.0;
  int max_len = 96;
  /// Argmax decoding with lowest-index tie-break.
  bool greedy = false;
};

/// Generates tokens after `context` until `eos` (included) or max_len tokens.
TokenSeq sample_continuation(const SequenceModel& model, std::span<const int> context, int eos,
                             const SampleOptions& options, Rng& rng);

/// Next-token distribution after `prefix` at the given temperature.
std::vector<double> next_distribution(const SequenceModel& model, std::span<const int> prefix,
                                      double temperature = 1.0);

/// Draws the tokens of a single tool call: a first token and, when that token
/// names a tool with a parameter, one more.
TokenSeq sample_call(const SequenceModel& model, const Vocabulary& vocab,
                     std::span<const int> context, double temperature, Rng& rng);

std::size_t argmax_lowest(std::span<const double> values);

}  // namespace orchestra
