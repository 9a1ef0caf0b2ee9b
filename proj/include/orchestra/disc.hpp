#pragma once

#include <span>
#include <vector>

#include "orchestra/policy.hpp"

namespace orchestra {

/// Trajectory ranker: a sequence-model backbone read out by a linear head.
/// Each candidate is scored on its own (context, <bot>, candidate) sequence,
/// so reordering candidates reorders the scores and nothing else.
class DiscScorer {
 public:
  DiscScorer(PolicyModel backbone, int bot_token, std::uint64_t seed, double init_scale = 0.1);
  DiscScorer(PolicyModel backbone, int bot_token, std::vector<double> head);

  const PolicyModel& backbone() const { return backbone_; }
  PolicyModel& backbone() { return backbone_; }
  std::span<const double> head() const { return head_; }
  std::span<double> head() { return head_; }
  int bot_token() const { return bot_; }

  TokenSeq input(std::span<const int> context, std::span<const int> candidate) const;

  double score(std::span<const int> context, std::span<const int> candidate) const;

  std::vector<double> scores(std::span<const int> context, std::span<const TokenSeq> candidates) const;

  /// Adds scale * d score / d params into the two gradient buffers.
  double accumulate_score_grad(std::span<const int> context, std::span<const int> candidate,
                               double scale, std::span<double> backbone_grad,
                               std::span<double> head_grad) const;

 private:
  PolicyModel backbone_;
  int bot_;
  std::vector<double> head_;  // feature weights followed by the bias
};

/// Index of the highest-scoring candidate (the softmax argmax); lowest
/// index on ties. Throws ValidationError for an empty list.
std::size_t disc_select(const DiscScorer& scorer, std::span<const int> context,
                        std::span<const TokenSeq> candidates);

}  // namespace orchestra
