#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orchestra/config.hpp"
#include "orchestra/eval.hpp"
#include "orchestra/vocab.hpp"

namespace orchestra {

struct InstructionSplits {
  /// Phase-1 instructions after augmentation.
  std::vector<Instruction> train;
  std::vector<Instruction> s2;
  std::vector<Instruction> s3;
  /// Unseen and seen room types, instructions distinct from training.
  std::vector<Instruction> test;
};

InstructionSplits make_splits(const RunConfig& config);

Environment make_environment(const RunConfig& config);

/// Orchestrator or discriminator backbone with the configured shape and a
/// seeded random initialisation.
PolicyModel init_model(const Vocabulary& vocab, const ModelConfig& model, std::uint64_t seed);
DiscScorer init_discriminator(const Vocabulary& vocab, const ModelConfig& model,
                              std::uint64_t seed);

/// Training configuration of one stage with its seed derived from the run seed.
TrainConfig seeded(const TrainConfig& base, std::uint64_t run_seed);

inline constexpr std::array<const char*, 5> kAblationRows{
    "w/o DPO", "w/o Stepwise", "w/o Discriminator", "Indep. only", "Full"};

struct AblationRow {
  std::string setting;
  /// S-SFT, T-SFT, S-DPO, T-DPO, Disc., Inter.
  std::array<bool, 6> stages{};
  EvalReport report;
};

/// Table-4 layout: stage checkmarks then #Obj, #OB, #CN, Real., Func., Lay., Comp.
std::string format_ablation(const std::vector<AblationRow>& rows);

struct PipelineOptions {
  bool ablation = false;
  bool write_files = true;
  bool verbose = false;
};

struct PipelineResult {
  InstructionSplits splits;
  std::size_t rollouts = 0;
  std::map<std::string, std::size_t> dataset_sizes;
  std::map<std::string, TrainReport> train_reports;
  std::vector<InterleaveCycleReport> interleave;
  EvalReport baseline;
  EvalReport ours;
  double runtime_ratio = 0.0;
  std::vector<AblationRow> ablation;
  double wall_seconds = 0.0;
};

/// rollout -> curate -> four orchestrator stages -> discriminator ->
/// interleave -> evaluation, writing every artifact under the output
/// directory. With `ablation`, also trains the trajectory-only branch and
/// evaluates all five Table-4 settings.
PipelineResult run_pipeline(const RunConfig& config, const PipelineOptions& options);

}  // namespace orchestra
