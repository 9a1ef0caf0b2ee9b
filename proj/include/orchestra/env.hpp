#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orchestra/scene.hpp"
#include "orchestra/scoring.hpp"

namespace orchestra {

/// What a tool's runtime cost scales with.
enum class CostUnit { None, Param, Collisions, OutOfBounds };

struct ToolSpec {
  std::string name;
  int param_arity = 0;
  int param_min = 0;
  int param_max = 0;
  double cost_base = 0.0;
  double cost_per_unit = 0.0;
  CostUnit cost_unit = CostUnit::None;
};

struct ToolCall {
  std::string tool;
  std::optional<int> param;

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

std::string to_string(const ToolCall& call);

namespace tools {
inline constexpr const char* kInitRoom = "init_room";
inline constexpr const char* kAddObjects = "add_objects";
inline constexpr const char* kResolveCollisions = "resolve_collisions";
inline constexpr const char* kFitToBoundary = "fit_to_boundary";
inline constexpr const char* kRefineReal = "refine_real";
inline constexpr const char* kRefineFunc = "refine_func";
inline constexpr const char* kRefineLay = "refine_lay";
inline constexpr const char* kReview = "review";
inline constexpr const char* kStop = "stop";

const char* refine_tool(VisualDim d);
}  // namespace tools

class Registry {
 public:
  explicit Registry(std::vector<ToolSpec> specs);

  const std::vector<ToolSpec>& specs() const { return specs_; }
  const ToolSpec* find(std::string_view name) const;
  const ToolSpec& at(std::string_view name) const;

  /// Throws RegistryError for an unknown tool and ValidationError for a
  /// missing, superfluous, or out-of-range parameter.
  const ToolSpec& validate(const ToolCall& call) const;
  bool is_valid(const ToolCall& call) const noexcept;

  /// Every valid call, in registry order with ascending parameters.
  std::vector<ToolCall> enumerate_calls() const;

  /// Runtime of `call` when issued in `pre`.
  double cost(const ToolCall& call, const SceneState& pre) const;

 private:
  std::vector<ToolSpec> specs_;
};

Registry default_registry();

/// Scene a trajectory starts from before init_room has run. No tool other
/// than init_room may be applied to it.
using MaybeScene = std::optional<SceneState>;

struct ToolOutcome {
  SceneState state;
  double delta_time = 0.0;
};

ToolOutcome apply_tool(const Registry& registry, const MaybeScene& state, const ToolCall& call);

struct RolloutStep {
  ToolCall call;
  SceneState post_state;
  QualityBreakdown q;
  double t_cum = 0.0;
  double c = 0.0;

  friend bool operator==(const RolloutStep&, const RolloutStep&) = default;
};

struct RolloutFlags {
  bool valid = true;
  bool stopped = false;
  /// 1-based index of the first call that could not be executed.
  std::optional<int> failure_step;
  std::string failure_reason;

  friend bool operator==(const RolloutFlags&, const RolloutFlags&) = default;
};

/// One executed trajectory with per-step scores.
struct Rollout {
  std::string instr_id;
  std::uint64_t seed = 0;
  int replicate = 0;
  std::vector<RolloutStep> steps;
  RolloutFlags flags;

  std::vector<ToolCall> calls() const;
  std::size_t size() const { return steps.size(); }

  friend bool operator==(const Rollout&, const Rollout&) = default;
};

/// Immutable tool environment. The execution counter is instrumentation only.
class Environment {
 public:
  Environment(Registry registry, ScoreParams params, int max_steps = 40);
  Environment(const Environment& other);
  Environment& operator=(const Environment&) = delete;

  const Registry& registry() const { return registry_; }
  const ScoreParams& params() const { return params_; }
  int max_steps() const { return max_steps_; }

  /// Applies one tool and counts the invocation.
  ToolOutcome step(const MaybeScene& state, const ToolCall& call) const;

  /// Executes `calls` in order, scoring every step. Stops after the first
  /// stop call; an unexecutable call ends the rollout and flags it invalid
  /// while keeping the earlier steps.
  Rollout execute_trajectory(const Instruction& instr, std::span<const ToolCall> calls) const;

  /// Scores the state reached after `t_cum` units of runtime.
  RolloutStep score_step(const Instruction& instr, const ToolCall& call, const SceneState& post,
                         double t_cum) const;

  std::uint64_t tool_invocations() const { return invocations_.load(); }

 private:
  Registry registry_;
  ScoreParams params_;
  int max_steps_;
  mutable std::atomic<std::uint64_t> invocations_{0};
};

}  // namespace orchestra
