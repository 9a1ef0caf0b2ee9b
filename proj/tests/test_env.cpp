#include <doctest.h>

#include <set>

#include "oracle.hpp"
#include "orchestra/errors.hpp"
#include "orchestra/instruction.hpp"
#include "orchestra/rng.hpp"
#include "orchestra/scoring.hpp"

using namespace orchestra;

namespace {

Instruction instr_with_target(int target) {
  InstructionFields f;
  f.room_type = room_catalog().front();
  f.target_object_count = target;
  return make_instruction("t", f);
}

const ToolCall kInit{"init_room", std::nullopt};

}  // namespace

TEST_CASE("registry holds the nine tools with their costs") {
  const Registry reg = default_registry();
  std::set<std::string> names;
  for (const auto& s : reg.specs()) names.insert(s.name);
  CHECK(names == std::set<std::string>{"init_room", "add_objects", "resolve_collisions",
                                       "fit_to_boundary", "refine_real", "refine_func",
                                       "refine_lay", "review", "stop"});
  SceneState s;
  CHECK(reg.cost({"add_objects", 6}, s) == doctest::Approx(4.8));
  s.n_col = 4;
  CHECK(reg.cost({"resolve_collisions", std::nullopt}, s) == doctest::Approx(4.0));
}

TEST_CASE("apply_tool matches the transition table") {
  const Registry reg = default_registry();
  const SceneState fresh{0, 0, 0, 4.0, 4.0, 4.0};

  auto out = apply_tool(reg, fresh, {"add_objects", 6});
  CHECK(out.state == SceneState{6, 1, 2, 4.0, 4.0, 4.0});
  CHECK(out.delta_time == doctest::Approx(4.8));

  auto review = apply_tool(reg, out.state, {"review", std::nullopt});
  CHECK(review.state == out.state);
  CHECK(review.delta_time == 2.5);

  auto r1 = apply_tool(reg, fresh, {"refine_real", std::nullopt});
  CHECK(r1.state.vis_real == 7.0);
  auto r2 = apply_tool(reg, r1.state, {"refine_real", std::nullopt});
  CHECK(r2.state.vis_real == 8.5);

  CHECK_THROWS_AS(apply_tool(reg, fresh, {"addCrowd", std::nullopt}), RegistryError);
  CHECK_THROWS_AS(apply_tool(reg, fresh, {"add_objects", 9}), ValidationError);
  CHECK_THROWS_AS(apply_tool(reg, fresh, {"add_objects", std::nullopt}), ValidationError);
  CHECK_THROWS_AS(apply_tool(reg, fresh, {"stop", 1}), ValidationError);
  CHECK_THROWS_AS(apply_tool(reg, std::nullopt, {"add_objects", 2}), OrderingError);
}

TEST_CASE("apply_tool agrees with the scripted table on random sequences") {
  const Registry reg = default_registry();
  const auto pool = reg.enumerate_calls();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    MaybeScene lib;
    oracle::Scene ref;
    for (int i = 0; i < 30; ++i) {
      const ToolCall call = i == 0 ? kInit : pool[rng.index(pool.size())];
      const auto o = apply_tool(reg, lib, call);
      const auto e = oracle::step(ref, call);
      REQUIRE(e.has_value());
      lib = o.state;
      ref = e->scene;
      CHECK(o.delta_time == e->dt);
      CHECK(o.state.valid());
      const auto s = oracle::to_scene(o.state);
      CHECK(s.obj == ref.obj);
      CHECK(s.oob == ref.oob);
      CHECK(s.col == ref.col);
      CHECK(s.real == ref.real);
      CHECK(s.func == ref.func);
      CHECK(s.lay == ref.lay);
    }
  }
}

TEST_CASE("execute_trajectory examples") {
  const Environment env(default_registry(), ScoreParams{}, 40);
  const Instruction instr = instr_with_target(10);

  const ToolCall one[] = {kInit};
  auto r = env.execute_trajectory(instr, one);
  REQUIRE(r.size() == 1);
  CHECK(r.steps[0].t_cum == 1.0);
  CHECK(r.steps[0].post_state.n_obj == 0);

  const ToolCall two[] = {kInit, {"add_objects", 6}};
  r = env.execute_trajectory(instr, two);
  REQUIRE(r.size() == 2);
  CHECK(r.steps[1].post_state == SceneState{6, 1, 2, 4.0, 4.0, 4.0});
  CHECK(r.steps[1].t_cum == doctest::Approx(5.8));

  const ToolCall bad[] = {kInit, {"add_objects", 2}, {"addCrowd", std::nullopt}, {"stop", std::nullopt}};
  r = env.execute_trajectory(instr, bad);
  CHECK_FALSE(r.flags.valid);
  CHECK(r.flags.failure_step == 3);
  CHECK(r.size() == 2);

  CHECK_THROWS_AS(env.execute_trajectory(instr, std::span<const ToolCall>{}), ValidationError);

  const ToolCall stopped[] = {kInit, {"stop", std::nullopt}, {"add_objects", 2}};
  r = env.execute_trajectory(instr, stopped);
  CHECK(r.flags.stopped);
  CHECK(r.size() == 2);
  CHECK(r.steps[1].t_cum == r.steps[0].t_cum);
}

TEST_CASE("execute_trajectory is pure and time is monotone") {
  const Environment env(default_registry(), ScoreParams{}, 40);
  const auto instrs = oracle::small_instructions(4, 3);
  const auto a = oracle::random_rollouts(env, instrs, 40, 11);
  const auto b = oracle::random_rollouts(env, instrs, 40, 11);
  CHECK(a == b);
  for (const auto& r : a) {
    for (std::size_t t = 1; t < r.steps.size(); ++t) {
      if (r.steps[t].call.tool == "stop")
        CHECK(r.steps[t].t_cum == r.steps[t - 1].t_cum);
      else
        CHECK(r.steps[t].t_cum > r.steps[t - 1].t_cum);
    }
  }
}

TEST_CASE("review changes only runtime") {
  const Environment env(default_registry(), ScoreParams{}, 40);
  const Instruction instr = instr_with_target(8);
  const std::vector<ToolCall> base{kInit, {"add_objects", 5}, {"resolve_collisions", std::nullopt},
                                   {"refine_lay", std::nullopt}};
  const auto plain = env.execute_trajectory(instr, base);
  for (std::size_t pos = 1; pos <= base.size(); ++pos) {
    auto calls = base;
    calls.insert(calls.begin() + static_cast<long>(pos), {"review", std::nullopt});
    const auto rev = env.execute_trajectory(instr, calls);
    CHECK(rev.steps.back().q == plain.steps.back().q);
    CHECK(rev.steps.back().t_cum == doctest::Approx(plain.steps.back().t_cum + 2.5));
    CHECK(rev.steps.back().c == doctest::Approx(plain.steps.back().c - 0.05 * 2.5));
  }
}

TEST_CASE("env counts tool invocations") {
  const Environment env(default_registry(), ScoreParams{}, 40);
  const Instruction instr = instr_with_target(4);
  const auto before = env.tool_invocations();
  const ToolCall calls[] = {kInit, {"add_objects", 2}};
  env.execute_trajectory(instr, calls);
  CHECK(env.tool_invocations() == before + 2);
}

TEST_CASE("quality examples") {
  const ScoreParams p;
  auto q = quality(SceneState{6, 1, 2, 4, 4, 4}, instr_with_target(10), p);
  CHECK(q.q_phy == doctest::Approx(-6.0));
  CHECK(q.s_comp == doctest::Approx(6.0));
  CHECK(q.q_vis == doctest::Approx(4.5));
  CHECK(q.q_total == doctest::Approx(3.9));

  q = quality(SceneState{0, 0, 0, 0, 0, 0}, instr_with_target(10), p);
  CHECK(q.q_phy == 0.0);
  CHECK(q.q_vis == 0.0);
  CHECK(q.q_total == 0.0);

  q = quality(SceneState{20, 0, 0, 9, 9, 8}, instr_with_target(20), p);
  CHECK(q.s_comp == 10.0);
  CHECK(q.q_vis == doctest::Approx(9.0));
  CHECK(q.q_total == doctest::Approx(11.0));

  CHECK(completeness(30, 10) == 10.0);
}

TEST_CASE("quality agrees with the reference formula") {
  const ScoreParams p;
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const SceneState s{static_cast<int>(rng.uniform_int(0, 40)), static_cast<int>(rng.uniform_int(0, 8)),
                       static_cast<int>(rng.uniform_int(0, 8)), 10 * rng.uniform01(),
                       10 * rng.uniform01(), 10 * rng.uniform01()};
    const int target = static_cast<int>(rng.uniform_int(1, 40));
    const auto q = quality(s, instr_with_target(target), p);
    CHECK(q.q_total == oracle::q_total(oracle::to_scene(s), target));
    CHECK(q.q_total == p.lambda * q.q_phy + q.q_vis);
    SceneState worse = s;
    worse.n_col += 1;
    CHECK(quality(worse, instr_with_target(target), p).q_total ==
          doctest::Approx(q.q_total - p.lambda * p.alpha));
  }
}

TEST_CASE("composition examples and linearity") {
  const ScoreParams p;
  CHECK(composition(10.5, 30, p) == doctest::Approx(9.0));
  CHECK(composition(3.25, 0, p) == 3.25);
  CHECK(composition(0, 20, p) == doctest::Approx(-1.0));
  CHECK(composition(7.0, 12.0 + 5.0, p) == doctest::Approx(composition(7.0, 12.0, p) - p.gamma * 5.0));
}
