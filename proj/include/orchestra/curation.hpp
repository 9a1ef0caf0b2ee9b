#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "orchestra/env.hpp"
#include "orchestra/policy.hpp"
#include "orchestra/vocab.hpp"

namespace orchestra {

enum class ExampleKind { Stepwise, Trajectory };

std::string_view kind_name(ExampleKind kind);
ExampleKind parse_kind(std::string_view name);

struct SftExample {
  TokenSeq context;
  TokenSeq target;
  ExampleKind kind = ExampleKind::Stepwise;
  std::string instr_id;
  int replicate = 0;
  /// 1-based rollout step the target ends at.
  int step = 0;

  friend bool operator==(const SftExample&, const SftExample&) = default;
};

struct DpoTriplet {
  TokenSeq context;
  TokenSeq chosen;
  TokenSeq rejected;
  ExampleKind kind = ExampleKind::Stepwise;
  /// Absolute score difference; +inf when the rejected call was unexecutable.
  double score_gap = 0.0;
  std::string instr_id;

  friend bool operator==(const DpoTriplet&, const DpoTriplet&) = default;
};

struct DiscExample {
  TokenSeq context;
  std::vector<TokenSeq> candidates;
  int label = 0;
  std::vector<double> candidate_c;
  std::vector<double> candidate_t;
  std::string instr_id;

  friend bool operator==(const DiscExample&, const DiscExample&) = default;
};

struct Thresholds {
  double tau1 = 3.0;
  double tau2 = 7.5;
  double tau3 = 3.0;
  double tau4 = 3.0;
};

/// Instructions that a builder could not use, with the reason.
struct SkipReport {
  std::vector<std::pair<std::string, std::string>> skipped;
  std::size_t count() const { return skipped.size(); }
};

/// Everything a builder needs besides rollouts and seeds.
class CurationContext {
 public:
  CurationContext(const Vocabulary& vocab, const Environment& env,
                  std::span<const Instruction> instructions);

  const Vocabulary& vocab() const { return vocab_; }
  const Environment& env() const { return env_; }
  /// Throws ValidationError for an unknown id.
  const Instruction& instruction(const std::string& id) const;

 private:
  const Vocabulary& vocab_;
  const Environment& env_;
  std::map<std::string, Instruction> instructions_;
};

/// True for calls that belong to a trajectory plan: everything except the
/// review inserted by the execution loop and the explicit stop.
bool is_plan_call(const ToolCall& call);

/// Plan calls among the first `t` steps of a rollout.
std::vector<ToolCall> plan_prefix(const Rollout& rollout, std::size_t t);

/// Label of a candidate set: highest composition score, then lower runtime,
/// then lower index.
int best_candidate(std::span<const double> scores, std::span<const double> times);

/// Random stream for one curation site; seeded only by its identity.
Rng site_rng(std::uint64_t seed, std::string_view tag, const std::string& key,
             std::uint64_t index = 0);

std::vector<SftExample> build_stepwise_sft(const CurationContext& ctx,
                                           std::span<const Rollout> rollouts, double tau1);

std::vector<SftExample> build_trajectory_sft(const CurationContext& ctx,
                                             std::span<const Rollout> rollouts, double tau2,
                                             std::uint64_t seed, int draws = 1);

/// Proposes the tokens of one alternative call given a stepwise context.
using CallProposer = std::function<TokenSeq(std::span<const int> context, Rng& rng)>;

CallProposer policy_proposer(const PolicyModel& policy, const Vocabulary& vocab,
                             double temperature = 1.0);

std::vector<DpoTriplet> build_stepwise_dpo(const CurationContext& ctx,
                                           std::span<const Rollout> rollouts,
                                           const CallProposer& propose, double tau1, double tau3,
                                           std::uint64_t seed, int samples = 1);

struct TrajectoryDpoResult {
  std::vector<DpoTriplet> triplets;
  SkipReport skips;
};

TrajectoryDpoResult build_trajectory_dpo(const CurationContext& ctx,
                                         std::span<const Rollout> rollouts, double tau4,
                                         std::uint64_t seed, int pair_cap = 6);

struct DiscBuildResult {
  std::vector<DiscExample> examples;
  SkipReport skips;
};

DiscBuildResult build_disc_data(const CurationContext& ctx, std::span<const Rollout> rollouts,
                                int k, std::uint64_t seed);

/// Each instruction followed by `variants_per` rephrasings with ids
/// "<id>~v<n>"; the structured fields are unchanged.
std::vector<Instruction> augment_instructions(std::span<const Instruction> instrs,
                                              int variants_per);

}  // namespace orchestra

namespace orchestra {

/// A generated trajectory checked against the plan grammar: calls ending in
/// <eos>, starting with init_room, containing neither review nor stop, and
/// at most `max_steps` calls.
struct PlanCheck {
  std::vector<ToolCall> calls;
  std::optional<DecodeError> error;

  bool ok() const { return !error.has_value(); }
};

PlanCheck check_plan(const Vocabulary& vocab, std::span<const int> tokens, int max_steps);

}  // namespace orchestra
