#include <doctest.h>

#include "orchestra/instruction.hpp"
#include "orchestra/jsonl.hpp"
#include "orchestra/rollout.hpp"

using namespace orchestra;

namespace {

Instruction instr(const std::string& id, int target) {
  InstructionFields f;
  f.room_type = room_catalog().front();
  f.target_object_count = target;
  return make_instruction(id, f);
}

}  // namespace

TEST_CASE("fix-then-grow rule branches") {
  const Registry reg = default_registry();
  HeuristicConfig cfg;
  cfg.epsilon = 0.0;
  Rng rng(1);
  const Instruction in = instr("a", 10);
  CHECK(heuristic_policy(SceneState{6, 0, 2, 4, 4, 4}, in, reg, cfg, rng).tool == "resolve_collisions");
  CHECK(heuristic_policy(SceneState{6, 2, 0, 4, 4, 4}, in, reg, cfg, rng).tool == "fit_to_boundary");
  const auto grow = heuristic_policy(SceneState{6, 0, 0, 4, 4, 4}, in, reg, cfg, rng);
  CHECK(grow == ToolCall{"add_objects", 4});
  CHECK(heuristic_policy(SceneState{10, 0, 0, 9, 5, 7}, in, reg, cfg, rng).tool == "refine_func");
  CHECK(heuristic_policy(SceneState{10, 0, 0, 10, 10, 10}, in, reg, cfg, rng).tool == "stop");
}

TEST_CASE("heuristic_policy is seeded") {
  const Registry reg = default_registry();
  HeuristicConfig cfg;
  cfg.epsilon = 0.9;
  const Instruction in = instr("a", 10);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng a(s), b(s);
    CHECK(heuristic_policy(SceneState{3, 0, 0, 4, 4, 4}, in, reg, cfg, a) ==
          heuristic_policy(SceneState{3, 0, 0, 4, 4, 4}, in, reg, cfg, b));
  }
}

TEST_CASE("collect_rollouts cardinality, order, determinism") {
  const Environment env(default_registry(), ScoreParams{}, 40);
  HeuristicConfig greedy;
  greedy.epsilon = 0.0;
  const std::vector<Instruction> one{instr("a", 12)};
  auto rs = collect_rollouts(env, one, 3, 9, greedy);
  REQUIRE(rs.size() == 3);
  CHECK(rs[0].calls() == rs[1].calls());
  CHECK(rs[1].calls() == rs[2].calls());
  const auto& last = rs[0].steps.back();
  CHECK(last.post_state.n_obj == 12);
  CHECK(last.post_state.n_col == 0);
  CHECK(last.post_state.n_oob == 0);
  CHECK(rs[0].flags.stopped);
  for (std::size_t i = 1; i < rs[0].steps.size(); i += 2) CHECK(rs[0].steps[i].call.tool == "review");

  const std::vector<Instruction> two{instr("b", 6), instr("a", 8)};
  HeuristicConfig noisy;
  rs = collect_rollouts(env, two, 2, 9, noisy);
  REQUIRE(rs.size() == 4);
  CHECK(rs[0].instr_id == "a");
  CHECK(rs[1].instr_id == "a");
  CHECK(rs[1].replicate == 1);
  CHECK(rs[2].instr_id == "b");
  for (const auto& r : rs) CHECK_NOTHROW(check_rollout(r, env.params()));

  const auto dump = [&](const std::vector<Rollout>& v) {
    std::string s;
    for (const auto& row : to_rows(std::span<const Rollout>(v))) s += row.dump() + "\n";
    return s;
  };
  CHECK(dump(rs) == dump(collect_rollouts(env, two, 2, 9, noisy)));
}

TEST_CASE("replicate seeds are isolated") {
  const Environment env(default_registry(), ScoreParams{}, 40);
  const Instruction in = instr("a", 15);
  HeuristicConfig cfg;
  const auto r0 = run_heuristic(env, in, cfg, rollout_seed(3, "a", 0));
  const auto r1 = run_heuristic(env, in, cfg, rollout_seed(3, "a", 1));
  const std::vector<Instruction> one{in};
  const auto all = collect_rollouts(env, one, 2, 3, cfg);
  CHECK(all[0].calls() == r0.calls());
  CHECK(all[1].calls() == r1.calls());
  CHECK(rollout_seed(3, "a", 0) != rollout_seed(3, "a", 1));
}

TEST_CASE("heuristic rollouts satisfy rollout invariants") {
  const Environment env(default_registry(), ScoreParams{}, 40);
  InstructionSetSpec spec;
  spec.rooms = room_catalog();
  spec.count = 30;
  const auto instrs = generate_instructions(spec, 4);
  const auto rs = collect_rollouts(env, instrs, 3, 4, HeuristicConfig{});
  for (const auto& r : rs) {
    CHECK_NOTHROW(check_rollout(r, env.params()));
    CHECK(static_cast<int>(r.size()) <= env.max_steps());
    CHECK(r.steps.front().call.tool == "init_room");
  }
}

TEST_CASE("check_rollout rejects inconsistent composition") {
  const Environment env(default_registry(), ScoreParams{}, 40);
  auto r = run_heuristic(env, instr("a", 5), HeuristicConfig{}, 1);
  r.steps.back().c += 1.0;
  CHECK_THROWS(check_rollout(r, env.params()));
}
