#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orchestra/disc.hpp"
#include "orchestra/env.hpp"
#include "orchestra/policy.hpp"
#include "orchestra/rollout.hpp"

namespace orchestra {

struct InferConfig {
  SampleOptions sample;
  /// Sampled regenerations after an invalid generation, before the greedy fallback.
  int retries = 3;
  int max_steps = 40;
  /// Candidates drawn for discriminator best-of-m inference.
  int best_of_m = 4;
};

struct InferResult {
  Rollout rollout;
  /// Generations tried, including the fallback.
  int attempts = 0;
  bool retried = false;
  bool greedy_fallback = false;
  bool failed = false;
  std::string failure_reason;
  /// Why each rejected generation was rejected, in order.
  std::vector<std::string> attempt_errors;
};

/// One-shot inference: decode a whole plan from the instruction-only
/// context, check it, execute it. Invalid generations are regenerated up to
/// `retries` times, then greedy decoding is tried once more.
InferResult infer_and_execute(const PolicyModel& orchestrator, const Vocabulary& vocab,
                              const Environment& env, const Instruction& instr,
                              const InferConfig& config, std::uint64_t seed);

/// Samples up to m plans, keeps the valid distinct ones, executes the one the
/// discriminator ranks highest. Falls back to infer_and_execute when no
/// sample is valid.
InferResult infer_best_of_m(const PolicyModel& orchestrator, const DiscScorer& discriminator,
                            const Vocabulary& vocab, const Environment& env,
                            const Instruction& instr, const InferConfig& config,
                            std::uint64_t seed);

struct EvalRow {
  std::string instr_id;
  std::string room_type;
  int repeat = 0;
  double n_obj = 0.0;
  double n_oob = 0.0;
  double n_col = 0.0;
  double real = 0.0;
  double func = 0.0;
  double lay = 0.0;
  double comp = 0.0;
  double runtime = 0.0;
  double composition = 0.0;
  std::size_t review_calls = 0;
  bool retried = false;
  bool failed = false;
};

/// Metric row of an executed rollout's final state. A rollout with no steps
/// gives an all-zero row.
EvalRow row_from_rollout(const Rollout& r, const Instruction& instr, int repeat);

struct EvalReport {
  std::string method;
  std::vector<EvalRow> rows;
  EvalRow mean;
  std::size_t failures = 0;
  std::size_t retries = 0;
};

/// Arithmetic mean of every numeric column.
EvalRow mean_row(std::span<const EvalRow> rows);

/// A policy to evaluate: the heuristic baseline, a one-shot orchestrator, or
/// an orchestrator with discriminator best-of-m selection.
struct Method {
  std::string tag;
  const PolicyModel* orchestrator = nullptr;
  const DiscScorer* discriminator = nullptr;
  HeuristicConfig heuristic;
};

/// `repeats` runs per instruction with seeds derived from (seed, id, repeat).
EvalReport evaluate(const Method& method, std::span<const Instruction> instrs, int repeats,
                    const Environment& env, const Vocabulary& vocab, const InferConfig& config,
                    std::uint64_t seed);

/// Mean runtime of `report` divided by that of `baseline`.
double runtime_ratio(const EvalReport& report, const EvalReport& baseline);

/// Aligned text: one line per room type and an aggregate line.
std::string format_report(const EvalReport& report);

/// Baseline rollout with its review calls removed and re-executed.
Rollout strip_reviews(const Environment& env, const Instruction& instr, const Rollout& r);

}  // namespace orchestra
