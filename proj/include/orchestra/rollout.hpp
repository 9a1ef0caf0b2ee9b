#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "orchestra/env.hpp"
#include "orchestra/rng.hpp"

namespace orchestra {

/// Rule-based stand-in for an LLM orchestrator running an
/// execute-review-reflect loop.
struct HeuristicConfig {
  /// Probability of replacing the rule's choice with a uniformly random call.
  double epsilon = 0.25;
  /// A visual dimension is refined only while its score is below this value.
  double refine_target = 8.0;
  /// Insert a review call after every executed tool.
  bool insert_review = true;
};

/// Chooses the next call for an initialised scene.
ToolCall heuristic_policy(const SceneState& state, const Instruction& instr,
                          const Registry& registry, const HeuristicConfig& config, Rng& rng);

/// The deterministic part of heuristic_policy (epsilon = 0).
ToolCall fix_then_grow(const SceneState& state, const Instruction& instr,
                       const HeuristicConfig& config);

/// Runs the heuristic from an empty scene until stop or max_steps executed
/// calls (reviews included).
Rollout run_heuristic(const Environment& env, const Instruction& instr,
                      const HeuristicConfig& config, std::uint64_t seed);

std::uint64_t rollout_seed(std::uint64_t base_seed, const std::string& instr_id, int replicate);

/// `per_instruction` rollouts for every instruction, sorted by instruction
/// id then replicate index.
std::vector<Rollout> collect_rollouts(const Environment& env, std::span<const Instruction> instrs,
                                      int per_instruction, std::uint64_t base_seed,
                                      const HeuristicConfig& config);

/// Throws ValidationError if `r` breaks a rollout invariant: non-decreasing
/// runtime (strict except across stop), composition consistent with quality
/// and runtime, valid states.
void check_rollout(const Rollout& r, const ScoreParams& params);

}  // namespace orchestra
