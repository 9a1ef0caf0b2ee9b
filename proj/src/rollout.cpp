#include "orchestra/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "orchestra/errors.hpp"

namespace orchestra {

ToolCall fix_then_grow(const SceneState& state, const Instruction& instr,
                       const HeuristicConfig& config) {
  using namespace tools;
  if (state.n_col > 0) return {kResolveCollisions, std::nullopt};
  if (state.n_oob > 0) return {kFitToBoundary, std::nullopt};
  if (state.n_obj < instr.target_object_count)
    return {kAddObjects, std::min(8, instr.target_object_count - state.n_obj)};

  // Lowest visual score first; ties go to the dimension the instruction
  // emphasises more, then to the fixed dimension order.
  std::optional<VisualDim> pick;
  for (auto d : kVisualDims) {
    if (state.vis(d) >= config.refine_target) continue;
    if (!pick) {
      pick = d;
      continue;
    }
    const double v = state.vis(d), best = state.vis(*pick);
    if (v < best || (v == best && instr.emphasis.get(d) > instr.emphasis.get(*pick))) pick = d;
  }
  if (pick) return {refine_tool(*pick), std::nullopt};
  return {kStop, std::nullopt};
}

ToolCall heuristic_policy(const SceneState& state, const Instruction& instr,
                          const Registry& registry, const HeuristicConfig& config, Rng& rng) {
  if (config.epsilon > 0.0 && rng.bernoulli(config.epsilon)) {
    std::vector<const ToolSpec*> choices;
    for (const auto& s : registry.specs())
      if (s.name != tools::kReview) choices.push_back(&s);
    const ToolSpec& spec = *choices[rng.index(choices.size())];
    ToolCall call{spec.name, std::nullopt};
    if (spec.param_arity == 1) call.param = static_cast<int>(rng.uniform_int(spec.param_min, spec.param_max));
    return call;
  }
  return fix_then_grow(state, instr, config);
}

std::uint64_t rollout_seed(std::uint64_t base_seed, const std::string& instr_id, int replicate) {
  return derive_seed(base_seed, "rollout:" + instr_id, static_cast<std::uint64_t>(replicate));
}

Rollout run_heuristic(const Environment& env, const Instruction& instr,
                      const HeuristicConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  Rollout r;
  r.instr_id = instr.id;
  r.seed = seed;
  MaybeScene state;
  double t_cum = 0.0;
  const ToolCall review{tools::kReview, std::nullopt};

  auto exec = [&](const ToolCall& call) {
    const ToolOutcome out = env.step(state, call);
    state = out.state;
    t_cum += out.delta_time;
    r.steps.push_back(env.score_step(instr, call, out.state, t_cum));
  };
  auto budget_left = [&] { return static_cast<int>(r.steps.size()) < env.max_steps(); };

  exec({tools::kInitRoom, std::nullopt});
  while (budget_left()) {
    if (config.insert_review) {
      exec(review);
      if (!budget_left()) break;
    }
    const ToolCall call = heuristic_policy(*state, instr, env.registry(), config, rng);
    exec(call);
    if (call.tool == tools::kStop) {
      r.flags.stopped = true;
      break;
    }
  }
  return r;
}

std::vector<Rollout> collect_rollouts(const Environment& env, std::span<const Instruction> instrs,
                                      int per_instruction, std::uint64_t base_seed,
                                      const HeuristicConfig& config) {
  if (per_instruction < 1) throw ValidationError("rollouts_per_instr must be >= 1");
  std::vector<const Instruction*> order;
  for (const auto& i : instrs) order.push_back(&i);
  std::stable_sort(order.begin(), order.end(),
                   [](const Instruction* a, const Instruction* b) { return a->id < b->id; });
  std::vector<Rollout> out;
  out.reserve(order.size() * static_cast<std::size_t>(per_instruction));
  for (const Instruction* instr : order) {
    for (int rep = 0; rep < per_instruction; ++rep) {
      Rollout r = run_heuristic(env, *instr, config, rollout_seed(base_seed, instr->id, rep));
      r.replicate = rep;
      out.push_back(std::move(r));
    }
  }
  return out;
}

void check_rollout(const Rollout& r, const ScoreParams& params) {
  if (r.steps.empty() && r.flags.valid) throw ValidationError("rollout " + r.instr_id + ": no steps");
  double prev_t = 0.0;
  for (std::size_t k = 0; k < r.steps.size(); ++k) {
    const RolloutStep& s = r.steps[k];
    const std::string where = "rollout " + r.instr_id + " step " + std::to_string(k + 1);
    if (!s.post_state.valid()) throw ValidationError(where + ": invalid state");
    const bool is_stop = s.call.tool == tools::kStop;
    if (k > 0 && !(s.t_cum > prev_t) && !(is_stop && s.t_cum == prev_t))
      throw ValidationError(where + ": runtime not increasing");
    if (s.c != composition(s.q.q_total, s.t_cum, params))
      throw ValidationError(where + ": composition inconsistent");
    prev_t = s.t_cum;
  }
}

}  // namespace orchestra
