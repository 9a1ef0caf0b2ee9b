#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls the library's transition, scoring, or builder
// code; only seeds and encodings are shared.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orchestra/curation.hpp"
#include "orchestra/env.hpp"
#include "orchestra/instruction.hpp"
#include "orchestra/vocab.hpp"

namespace oracle {

using orchestra::Instruction;
using orchestra::Rollout;
using orchestra::ToolCall;

struct Scene {
  bool init = false;
  int obj = 0, oob = 0, col = 0;
  double real = 0, func = 0, lay = 0;
};

struct Step {
  Scene scene;
  double dt = 0;
};

/// Scripted transition table. nullopt for an unknown tool, a bad parameter,
/// or a call before init_room.
std::optional<Step> step(const Scene& s, const ToolCall& call);

double q_total(const Scene& s, int target, double alpha = 4.0, double lambda = 0.1);
double c_score(double q, double t, double gamma = 0.05);

Scene to_scene(const orchestra::SceneState& s);

/// Runs `calls` through the scripted table: per-step (scene, T, C).
struct Trace {
  std::vector<Scene> scenes;
  std::vector<double> t;
  std::vector<double> c;
  std::optional<int> failure_step;
};
Trace run(const Instruction& instr, const std::vector<ToolCall>& calls);

/// `count` random plans of at most `max_len` calls (init_room first, then
/// any tool including review and stop), executed by `env`, spread
/// round-robin over `instrs` with increasing replicate numbers.
std::vector<Rollout> random_rollouts(const orchestra::Environment& env,
                                     const std::vector<Instruction>& instrs, int count,
                                     std::uint64_t seed, int max_len = 12);

/// A handful of instructions with small targets so that random plans reach
/// high completeness.
std::vector<Instruction> small_instructions(int n, std::uint64_t seed);

// Structured view of curated examples; builder output is decoded into the
// same shape before comparison.
struct Sft {
  std::string instr_id;
  std::vector<ToolCall> history;
  std::vector<ToolCall> target;
  bool eos = false;
  bool operator==(const Sft&) const = default;
};

struct Pair {
  std::string instr_id;
  std::vector<ToolCall> history;
  std::vector<ToolCall> chosen, rejected;
  /// Token-level copies for malformed proposals that do not decode.
  orchestra::TokenSeq chosen_tokens, rejected_tokens;
  double gap = 0;
  bool operator==(const Pair&) const = default;
};

struct Disc {
  std::string instr_id;
  std::vector<std::vector<ToolCall>> candidates;
  int label = 0;
  bool operator==(const Disc&) const = default;
};

std::vector<Sft> stepwise_sft(const std::vector<Rollout>& rollouts, double tau1);
std::vector<Sft> trajectory_sft(const std::vector<Rollout>& rollouts, double tau2,
                                std::uint64_t seed, int draws);

/// Deterministic stand-in for a policy: draws one of every valid call,
/// review, stop, <eos>, a bare parameter token, or add_objects missing its
/// parameter.
orchestra::TokenSeq propose(const orchestra::Vocabulary& vocab, orchestra::Rng& rng);

std::vector<Pair> stepwise_dpo(const orchestra::Vocabulary& vocab,
                               const std::vector<Instruction>& instrs,
                               const std::vector<Rollout>& rollouts, double tau1, double tau3,
                               std::uint64_t seed, int samples);
std::vector<Pair> trajectory_dpo(const std::vector<Rollout>& rollouts, double tau4,
                                 std::uint64_t seed, int pair_cap, int* skipped = nullptr);
std::vector<Disc> disc_data(const std::vector<Rollout>& rollouts, int k, std::uint64_t seed,
                            int* skipped = nullptr);

// Decoders for builder output.
std::vector<Sft> view(const orchestra::Vocabulary& vocab,
                      const std::vector<orchestra::SftExample>& xs);
std::vector<Pair> view(const orchestra::Vocabulary& vocab,
                       const std::vector<orchestra::DpoTriplet>& xs);
std::vector<Disc> view(const orchestra::Vocabulary& vocab,
                       const std::vector<orchestra::DiscExample>& xs);

/// Every consecutive-step C difference (signed) and every C value in the
/// batch, for picking boundary thresholds.
std::vector<double> step_diffs(const std::vector<Rollout>& rollouts);
std::vector<double> c_values(const std::vector<Rollout>& rollouts);

/// Runs all five builders against the references over `n_rollouts` random
/// rollouts for one seed and a range of thresholds including exact-boundary
/// values. Returns an empty string on success, else the first mismatch.
std::string check_builders(std::uint64_t seed, int n_rollouts = 100);

}  // namespace oracle
