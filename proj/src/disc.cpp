#include "orchestra/disc.hpp"

#include "orchestra/errors.hpp"

namespace orchestra {

DiscScorer::DiscScorer(PolicyModel backbone, int bot_token, std::uint64_t seed, double init_scale)
    : backbone_(std::move(backbone)), bot_(bot_token) {
  const std::size_t f = backbone_.net().feature_dim();
  head_.assign(f + 1, 0.0);
  Rng rng(derive_seed(seed, "disc-head"));
  for (std::size_t i = 0; i < f; ++i) head_[i] = init_scale * rng.normal();
}

DiscScorer::DiscScorer(PolicyModel backbone, int bot_token, std::vector<double> head)
    : backbone_(std::move(backbone)), bot_(bot_token), head_(std::move(head)) {
  if (head_.size() != backbone_.net().feature_dim() + 1)
    throw ValidationError("scoring head size does not match the backbone feature width");
}

TokenSeq DiscScorer::input(std::span<const int> context, std::span<const int> candidate) const {
  TokenSeq seq(context.begin(), context.end());
  seq.push_back(bot_);
  seq.insert(seq.end(), candidate.begin(), candidate.end());
  return seq;
}

double DiscScorer::score(std::span<const int> context, std::span<const int> candidate) const {
  const TokenSeq seq = input(context, candidate);
  const std::size_t f = backbone_.net().feature_dim();
  std::vector<double> phi(f);
  backbone_.net().features(seq, phi);
  double s = head_[f];
  for (std::size_t i = 0; i < f; ++i) s += head_[i] * phi[i];
  return s;
}

std::vector<double> DiscScorer::scores(std::span<const int> context,
                                       std::span<const TokenSeq> candidates) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(score(context, c));
  return out;
}

double DiscScorer::accumulate_score_grad(std::span<const int> context,
                                         std::span<const int> candidate, double scale,
                                         std::span<double> backbone_grad,
                                         std::span<double> head_grad) const {
  const TokenSeq seq = input(context, candidate);
  const std::size_t f = backbone_.net().feature_dim();
  std::vector<double> phi(f), dphi(f);
  backbone_.net().features(seq, phi);
  double s = head_[f];
  for (std::size_t i = 0; i < f; ++i) {
    s += head_[i] * phi[i];
    head_grad[i] += scale * phi[i];
    dphi[i] = scale * head_[i];
  }
  head_grad[f] += scale;
  backbone_.net().accumulate_feature_grad(seq, dphi, backbone_grad);
  return s;
}

std::size_t disc_select(const DiscScorer& scorer, std::span<const int> context,
                        std::span<const TokenSeq> candidates) {
  if (candidates.empty()) throw ValidationError("disc_select: no candidates");
  const auto s = scorer.scores(context, candidates);
  // softmax is monotone, so its argmax is the score argmax.
  return argmax_lowest(s);
}

}  // namespace orchestra
