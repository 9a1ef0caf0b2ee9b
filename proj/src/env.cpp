#include "orchestra/env.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "orchestra/errors.hpp"

namespace orchestra {

std::string_view visual_dim_name(VisualDim d) {
  switch (d) {
    case VisualDim::Real: return "real";
    case VisualDim::Func: return "func";
    case VisualDim::Lay: return "lay";
  }
  return "?";
}

double SceneState::vis(VisualDim d) const {
  switch (d) {
    case VisualDim::Real: return vis_real;
    case VisualDim::Func: return vis_func;
    case VisualDim::Lay: return vis_lay;
  }
  return 0.0;
}

double& SceneState::vis(VisualDim d) {
  switch (d) {
    case VisualDim::Real: return vis_real;
    case VisualDim::Func: return vis_func;
    case VisualDim::Lay: break;
  }
  return vis_lay;
}

bool SceneState::valid() const {
  auto in_range = [](double v) { return v >= 0.0 && v <= 10.0; };
  return n_obj >= 0 && n_oob >= 0 && n_col >= 0 && in_range(vis_real) && in_range(vis_func) &&
         in_range(vis_lay);
}

double Emphasis::get(VisualDim d) const {
  switch (d) {
    case VisualDim::Real: return real;
    case VisualDim::Func: return func;
    case VisualDim::Lay: return lay;
  }
  return 0.0;
}

std::string to_string(const ToolCall& call) {
  if (call.param) return call.tool + "(" + std::to_string(*call.param) + ")";
  return call.tool;
}

namespace tools {
const char* refine_tool(VisualDim d) {
  switch (d) {
    case VisualDim::Real: return kRefineReal;
    case VisualDim::Func: return kRefineFunc;
    case VisualDim::Lay: return kRefineLay;
  }
  return kRefineLay;
}
}  // namespace tools

namespace {

enum class Effect { InitRoom, AddObjects, Resolve, Fit, Refine, NoOp };

struct EffectInfo {
  Effect effect;
  VisualDim dim = VisualDim::Real;
};

std::optional<EffectInfo> effect_of(std::string_view name) {
  using namespace tools;
  if (name == kInitRoom) return EffectInfo{Effect::InitRoom};
  if (name == kAddObjects) return EffectInfo{Effect::AddObjects};
  if (name == kResolveCollisions) return EffectInfo{Effect::Resolve};
  if (name == kFitToBoundary) return EffectInfo{Effect::Fit};
  if (name == kRefineReal) return EffectInfo{Effect::Refine, VisualDim::Real};
  if (name == kRefineFunc) return EffectInfo{Effect::Refine, VisualDim::Func};
  if (name == kRefineLay) return EffectInfo{Effect::Refine, VisualDim::Lay};
  if (name == kReview || name == kStop) return EffectInfo{Effect::NoOp};
  return std::nullopt;
}

}  // namespace

Registry::Registry(std::vector<ToolSpec> specs) : specs_(std::move(specs)) {
  std::set<std::string> seen;
  for (const auto& s : specs_) {
    if (!seen.insert(s.name).second) throw ValidationError("duplicate tool name: " + s.name);
    if (!effect_of(s.name)) throw RegistryError("tool has no known effect: " + s.name);
    if (s.cost_base < 0.0 || s.cost_per_unit < 0.0)
      throw ValidationError("negative cost for tool " + s.name);
    if (s.param_arity != 0 && s.param_arity != 1)
      throw ValidationError("arity must be 0 or 1 for tool " + s.name);
    if (s.param_arity == 1 && s.param_min > s.param_max)
      throw ValidationError("empty parameter range for tool " + s.name);
    if (s.cost_unit == CostUnit::Param && s.param_arity != 1)
      throw ValidationError("per-parameter cost on a tool without a parameter: " + s.name);
  }
}

const ToolSpec* Registry::find(std::string_view name) const {
  for (const auto& s : specs_)
    if (s.name == name) return &s;
  return nullptr;
}

const ToolSpec& Registry::at(std::string_view name) const {
  const ToolSpec* s = find(name);
  if (!s) throw RegistryError("unknown tool: " + std::string(name));
  return *s;
}

const ToolSpec& Registry::validate(const ToolCall& call) const {
  const ToolSpec& spec = at(call.tool);
  if (spec.param_arity == 0) {
    if (call.param) throw ValidationError(call.tool + " takes no parameter");
  } else {
    if (!call.param) throw ValidationError(call.tool + " requires a parameter");
    if (*call.param < spec.param_min || *call.param > spec.param_max)
      throw ValidationError(call.tool + " parameter " + std::to_string(*call.param) +
                            " outside [" + std::to_string(spec.param_min) + ", " +
                            std::to_string(spec.param_max) + "]");
  }
  return spec;
}

bool Registry::is_valid(const ToolCall& call) const noexcept {
  const ToolSpec* spec = find(call.tool);
  if (!spec) return false;
  if (spec->param_arity == 0) return !call.param.has_value();
  return call.param && *call.param >= spec->param_min && *call.param <= spec->param_max;
}

std::vector<ToolCall> Registry::enumerate_calls() const {
  std::vector<ToolCall> out;
  for (const auto& s : specs_) {
    if (s.param_arity == 0) {
      out.push_back({s.name, std::nullopt});
    } else {
      for (int p = s.param_min; p <= s.param_max; ++p) out.push_back({s.name, p});
    }
  }
  return out;
}

double Registry::cost(const ToolCall& call, const SceneState& pre) const {
  const ToolSpec& spec = validate(call);
  switch (spec.cost_unit) {
    case CostUnit::None: return spec.cost_base;
    case CostUnit::Param: return spec.cost_base + spec.cost_per_unit * *call.param;
    case CostUnit::Collisions: return spec.cost_base + spec.cost_per_unit * pre.n_col;
    case CostUnit::OutOfBounds: return spec.cost_base + spec.cost_per_unit * pre.n_oob;
  }
  return spec.cost_base;
}

Registry default_registry() {
  using namespace tools;
  return Registry({
      {kInitRoom, 0, 0, 0, 1.0, 0.0, CostUnit::None},
      {kAddObjects, 1, 1, 8, 0.0, 0.8, CostUnit::Param},
      {kResolveCollisions, 0, 0, 0, 2.0, 0.5, CostUnit::Collisions},
      {kFitToBoundary, 0, 0, 0, 1.5, 0.5, CostUnit::OutOfBounds},
      {kRefineReal, 0, 0, 0, 3.0, 0.0, CostUnit::None},
      {kRefineFunc, 0, 0, 0, 3.0, 0.0, CostUnit::None},
      {kRefineLay, 0, 0, 0, 3.0, 0.0, CostUnit::None},
      {kReview, 0, 0, 0, 2.5, 0.0, CostUnit::None},
      {kStop, 0, 0, 0, 0.0, 0.0, CostUnit::None},
  });
}

ToolOutcome apply_tool(const Registry& registry, const MaybeScene& state, const ToolCall& call) {
  registry.validate(call);
  const EffectInfo info = *effect_of(call.tool);
  if (!state) {
    if (info.effect != Effect::InitRoom)
      throw OrderingError(call.tool + " issued before " + tools::kInitRoom);
    SceneState fresh{0, 0, 0, 4.0, 4.0, 4.0};
    return {fresh, registry.cost(call, fresh)};
  }
  const SceneState& pre = *state;
  ToolOutcome out{pre, registry.cost(call, pre)};
  SceneState& s = out.state;
  switch (info.effect) {
    case Effect::InitRoom:
      s = SceneState{0, 0, 0, 4.0, 4.0, 4.0};
      break;
    case Effect::AddObjects: {
      const int n = *call.param;
      s.n_obj += n;
      s.n_col += n / 3;
      s.n_oob += n / 5;
      break;
    }
    case Effect::Resolve:
      s.n_col = 0;
      break;
    case Effect::Fit:
      s.n_oob = 0;
      break;
    case Effect::Refine: {
      double& v = s.vis(info.dim);
      v = v + 0.5 * (10.0 - v);
      break;
    }
    case Effect::NoOp:
      break;
  }
  return out;
}

std::vector<ToolCall> Rollout::calls() const {
  std::vector<ToolCall> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.call);
  return out;
}

Environment::Environment(Registry registry, ScoreParams params, int max_steps)
    : registry_(std::move(registry)), params_(params), max_steps_(max_steps) {
  if (!params_.valid()) throw ValidationError("score parameters must be non-negative");
  if (max_steps_ < 1) throw ValidationError("max_steps must be positive");
}

Environment::Environment(const Environment& other)
    : registry_(other.registry_), params_(other.params_), max_steps_(other.max_steps_) {}

ToolOutcome Environment::step(const MaybeScene& state, const ToolCall& call) const {
  invocations_.fetch_add(1, std::memory_order_relaxed);
  return apply_tool(registry_, state, call);
}

RolloutStep Environment::score_step(const Instruction& instr, const ToolCall& call,
                                    const SceneState& post, double t_cum) const {
  RolloutStep step{call, post, quality(post, instr, params_), t_cum, 0.0};
  step.c = composition(step.q.q_total, t_cum, params_);
  return step;
}

Rollout Environment::execute_trajectory(const Instruction& instr,
                                        std::span<const ToolCall> calls) const {
  if (calls.empty()) throw ValidationError("execute_trajectory: empty call list");
  Rollout r;
  r.instr_id = instr.id;
  MaybeScene state;
  double t_cum = 0.0;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const int step_no = static_cast<int>(i) + 1;
    if (step_no > max_steps_) {
      r.flags.valid = false;
      r.flags.failure_step = step_no;
      r.flags.failure_reason = "exceeds max_steps";
      break;
    }
    ToolOutcome out;
    try {
      out = step(state, calls[i]);
    } catch (const Error& e) {
      r.flags.valid = false;
      r.flags.failure_step = step_no;
      r.flags.failure_reason = e.what();
      break;
    }
    state = out.state;
    t_cum += out.delta_time;
    r.steps.push_back(score_step(instr, calls[i], out.state, t_cum));
    if (calls[i].tool == tools::kStop) {
      r.flags.stopped = true;
      break;
    }
  }
  return r;
}

}  // namespace orchestra
