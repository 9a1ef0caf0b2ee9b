#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "orchestra/curation.hpp"
#include "orchestra/disc.hpp"
#include "orchestra/policy.hpp"

namespace orchestra {

enum class Stage { StepSft, TrajSft, StepDpo, TrajDpo, DiscSft, Interleave };

std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  Stage stage = Stage::StepSft;
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 16;
  double dpo_beta = 0.1;
  std::uint64_t seed = 0;
  /// Epochs without a training-loss improvement before stopping.
  int patience = 10;
  AdamConfig adam;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Default hyperparameters for `stage`.
inline TrainConfig stage_config(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  return c;
}

struct TrainReport {
  Stage stage = Stage::StepSft;
  std::vector<double> loss_curve;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t examples = 0;
  int epochs_run = 0;
  bool early_stopped = false;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Negative mean sequence log-likelihood of the targets, and its gradient.
LossGrad sft_loss_and_grad(const PolicyModel& model, std::span<const SftExample> batch);

/// Per-triplet loss -log sigmoid(beta * (chosen log-ratio - rejected log-ratio)).
double dpo_triplet_loss(double policy_chosen, double policy_rejected, double ref_chosen,
                        double ref_rejected, double beta);

/// Mean DPO loss; the gradient is with respect to `model` only.
LossGrad dpo_loss_and_grad(const PolicyModel& model, const PolicyModel& reference,
                           std::span<const DpoTriplet> batch, double beta);

struct DiscLossGrad {
  double loss = 0.0;
  std::vector<double> backbone_grad;
  std::vector<double> head_grad;
};

/// Mean cross-entropy of the labelled candidate under a softmax over scores.
DiscLossGrad disc_loss_and_grad(const DiscScorer& scorer, std::span<const DiscExample> batch);

class Adam {
 public:
  Adam(std::size_t size, double learning_rate, AdamConfig config = {});
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_;
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

using Dataset =
    std::variant<std::vector<SftExample>, std::vector<DpoTriplet>, std::vector<DiscExample>>;

struct PolicyStageResult {
  PolicyModel model;
  TrainReport report;
};

/// Trains an orchestrator stage starting from `in`. DPO stages use a
/// snapshot of `in` taken before the first update as the reference.
/// Throws ValidationError when the dataset does not fit the stage.
PolicyStageResult run_stage(const TrainConfig& config, const Dataset& data, const PolicyModel& in);

struct DiscStageResult {
  DiscScorer scorer;
  TrainReport report;
};

DiscStageResult run_disc_stage(const TrainConfig& config, std::span<const DiscExample> data,
                               const DiscScorer& in);

enum class LossKind { Sft, Dpo, Disc };

LossKind parse_loss_kind(std::string_view name);
std::string_view loss_kind_name(LossKind kind);

struct GradCheckReport {
  LossKind kind = LossKind::Sft;
  int trials = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::size_t params_checked = 0;
};

/// Compares analytic gradients with central differences over random small
/// models of every architecture.
GradCheckReport gradient_check(LossKind kind, int trials, double tolerance, std::uint64_t seed = 1,
                               double step = 1e-5);

/// Relative error used by gradient_check.
double relative_error(double analytic, double numeric);

struct InterleaveConfig {
  /// Trajectories sampled per instruction.
  int m = 4;
  int cycles = 1;
  double temperature = 1.0;
  int max_len = 96;
  int max_steps = 40;
  TrainConfig disc_train;
  TrainConfig dpo_train;
  std::uint64_t seed = 0;
};

struct InterleaveCycleReport {
  TrainReport disc_report;
  TrainReport dpo_report;
  std::size_t disc_examples = 0;
  std::size_t dpo_triplets = 0;
  SkipReport stage_a_skips;
  SkipReport stage_b_skips;
  std::uint64_t stage_a_env_calls = 0;
  std::uint64_t stage_b_env_calls = 0;
  std::vector<DiscExample> stage_a_data;
  std::vector<DpoTriplet> stage_b_data;
};

struct InterleaveResult {
  PolicyModel orchestrator;
  DiscScorer discriminator;
  std::vector<InterleaveCycleReport> cycles;
};

/// Discriminator adaptation on executed samples for `s2`, then
/// trajectory-level DPO on discriminator-ranked samples for `s3` without
/// executing them. Repeated `config.cycles` times.
InterleaveResult interleave_cycle(const PolicyModel& orchestrator, const DiscScorer& discriminator,
                                  std::span<const Instruction> s2, std::span<const Instruction> s3,
                                  const Environment& env, const Vocabulary& vocab,
                                  const InterleaveConfig& config);

}  // namespace orchestra
