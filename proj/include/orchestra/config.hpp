#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "orchestra/curation.hpp"
#include "orchestra/eval.hpp"
#include "orchestra/model.hpp"
#include "orchestra/rollout.hpp"
#include "orchestra/scoring.hpp"
#include "orchestra/training.hpp"

namespace orchestra {

struct InstructionConfig {
  /// Training instructions before augmentation (phase-1 set).
  int train_count = 40;
  int variants_per = 1;
  int s2_count = 20;
  int s3_count = 20;
  int test_count = 50;
  int target_min = 4;
  int target_max = 24;
};

struct CurationConfig {
  int traj_sft_draws = 1;
  int dpo_samples = 1;
  int dpo_pair_cap = 6;
  int disc_k = 4;
  double proposal_temperature = 1.0;
};

struct ModelConfig {
  ModelDims dims;
  double init_scale = 0.1;
};

struct StageTraining {
  TrainConfig s_sft = stage_config(Stage::StepSft);
  TrainConfig t_sft = stage_config(Stage::TrajSft);
  TrainConfig s_dpo = stage_config(Stage::StepDpo);
  TrainConfig t_dpo = stage_config(Stage::TrajDpo);
  TrainConfig disc = stage_config(Stage::DiscSft);
};

struct EvalConfig {
  int repeats = 1;
  InferConfig infer;
  double baseline_epsilon = 0.25;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::filesystem::path output_dir = "runs/default";
  /// Optional instruction catalog for the test split; generated when absent.
  std::optional<std::filesystem::path> test_instructions;
  ScoreParams score;
  int max_steps = 40;
  InstructionConfig instructions;
  HeuristicConfig rollout;
  int rollouts_per_instruction = 6;
  Thresholds thresholds;
  CurationConfig curation;
  ModelConfig orchestrator;
  ModelConfig discriminator;
  StageTraining training;
  InterleaveConfig interleave;
  EvalConfig eval;
  std::vector<std::uint64_t> ablation_seeds{1, 2, 3, 4, 5};
};

/// Parses a run config; unknown keys, out-of-range values and missing input
/// files are ConfigErrors. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);

}  // namespace orchestra
