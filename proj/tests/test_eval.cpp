#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "orchestra/config.hpp"
#include "orchestra/errors.hpp"
#include "orchestra/eval.hpp"
#include "orchestra/instruction.hpp"
#include "orchestra/jsonl.hpp"
#include "orchestra/pipeline.hpp"

using namespace orchestra;
namespace fs = std::filesystem;

namespace {

const Registry& reg() {
  static const Registry r = default_registry();
  return r;
}

const Vocabulary& vocab() {
  static const Vocabulary v(reg());
  return v;
}

std::vector<Instruction> instrs(int n, std::uint64_t seed) {
  InstructionSetSpec spec;
  spec.rooms = room_catalog();
  spec.count = n;
  return generate_instructions(spec, seed);
}

ModelDims small() {
  ModelDims d;
  d.window = 4;
  d.hidden = 8;
  d.max_len = 160;
  return d;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("orchestra-test-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("baseline against itself and review stripping") {
  const Environment env(reg(), ScoreParams{}, 40);
  const auto is = instrs(10, 1);
  const Method base{"baseline", nullptr, nullptr, HeuristicConfig{}};
  const InferConfig cfg;
  const auto a = evaluate(base, is, 2, env, vocab(), cfg, 5);
  const auto b = evaluate(base, is, 2, env, vocab(), cfg, 5);
  CHECK(runtime_ratio(a, b) == 1.0);
  REQUIRE(a.rows.size() == 20);

  const EvalRow m = mean_row(a.rows);
  double sum = 0;
  for (const auto& r : a.rows) sum += r.composition;
  CHECK(m.composition == doctest::Approx(sum / 20).epsilon(1e-15));
  CHECK(a.mean.runtime == m.runtime);

  for (const auto& in : is) {
    const Rollout r = run_heuristic(env, in, HeuristicConfig{}, 3);
    const Rollout s = strip_reviews(env, in, r);
    std::size_t reviews = 0;
    for (const auto& st : r.steps) reviews += st.call.tool == "review";
    CHECK(reviews > 0);
    CHECK(s.steps.back().t_cum == doctest::Approx(r.steps.back().t_cum - 2.5 * reviews));
    CHECK(s.steps.back().q == r.steps.back().q);
    CHECK(s.steps.back().post_state == r.steps.back().post_state);
  }
}

TEST_CASE("one-shot inference") {
  const Environment env(reg(), ScoreParams{}, 40);
  const auto is = instrs(3, 2);
  InferConfig cfg;
  cfg.sample.greedy = true;

  const PolicyModel plan = make_policy(vocab(), small(), Init::Random, 5, 1.0);
  const auto r1 = infer_and_execute(plan, vocab(), env, is[0], cfg, 1);
  const auto r2 = infer_and_execute(plan, vocab(), env, is[0], cfg, 2);
  CHECK(r1.rollout.calls() == r2.rollout.calls());
  CHECK(r1.rollout.flags == r2.rollout.flags);
  CHECK(r1.attempts == r2.attempts);

  PolicyModel eos_only = make_policy(vocab(), small(), Init::Zero, 0);
  for (const auto& b : eos_only.net().layout())
    if (b.name == "out_b") eos_only.net().params()[b.offset + static_cast<std::size_t>(vocab().eos())] = 20.0;
  cfg.sample.greedy = false;
  const auto fail = infer_and_execute(eos_only, vocab(), env, is[0], cfg, 3);
  CHECK(fail.failed);
  CHECK(fail.retried);
  CHECK(fail.greedy_fallback);
  // First sample, `retries` sampled regenerations, one greedy decode.
  CHECK(fail.attempts == cfg.retries + 2);
  CHECK(fail.attempt_errors.size() == static_cast<std::size_t>(cfg.retries + 2));
  const EvalRow row = row_from_rollout(fail.rollout, is[0], 0);
  CHECK(row.composition == 0.0);
  CHECK(row.runtime == 0.0);
}

TEST_CASE("evaluated one-shot rollouts never contain reviews") {
  const Environment env(reg(), ScoreParams{}, 40);
  const auto is = instrs(10, 4);
  PolicyModel model = make_policy(vocab(), small(), Init::Random, 3, 1.0);
  const Method ours{"ours", &model, nullptr, {}};
  InferConfig cfg;
  const auto rep = evaluate(ours, is, 2, env, vocab(), cfg, 9);
  for (const auto& r : rep.rows) CHECK(r.review_calls == 0);
  CHECK(rep.failures <= rep.rows.size());
  const auto again = evaluate(ours, is, 2, env, vocab(), cfg, 9);
  CHECK(again.mean.composition == rep.mean.composition);
  CHECK(format_report(rep).find("mean") != std::string::npos);
}

TEST_CASE("rollouts and instructions round-trip through JSON") {
  const Environment env(reg(), ScoreParams{}, 40);
  const auto is = instrs(5, 3);
  for (const auto& in : is) {
    const json j = in;
    CHECK(j.get<Instruction>().text_tokens == in.text_tokens);
    Rollout r = run_heuristic(env, in, HeuristicConfig{}, 4);
    r.replicate = 2;
    const json rj = r;
    CHECK(json::parse(rj.dump()).get<Rollout>() == r);
  }
  json bad = is[0];
  bad["target_object_count"] = 0;
  CHECK_THROWS(bad.get<Instruction>());
  CHECK(registry_from_json(registry_to_json(reg())).specs().size() == reg().specs().size());
}

TEST_CASE("examples round-trip through JSON") {
  const auto ctx = encode_context(vocab(), instrs(1, 1)[0]);
  const TokenSeq a{vocab().id("init_room"), vocab().eos()};
  const TokenSeq b{vocab().id("init_room"), vocab().id("refine_real"), vocab().eos()};
  const SftExample sft{ctx, a, ExampleKind::Trajectory, "x", 1, 3};
  CHECK(sft_from_json(vocab(), json::parse(example_to_json(vocab(), sft).dump())) == sft);
  DpoTriplet dpo{ctx, a, b, ExampleKind::Stepwise, std::numeric_limits<double>::infinity(), "x"};
  CHECK(dpo_from_json(vocab(), json::parse(example_to_json(vocab(), dpo).dump())) == dpo);
  dpo.score_gap = 3.25;
  CHECK(dpo_from_json(vocab(), json::parse(example_to_json(vocab(), dpo).dump())) == dpo);
  const DiscExample disc{ctx, {a, b}, 1, {2.0, 3.0}, {1.0, 4.0}, "x"};
  CHECK(disc_example_from_json(vocab(), json::parse(example_to_json(vocab(), disc).dump())) == disc);
  CHECK_THROWS_AS(dpo_from_json(vocab(), example_to_json(vocab(), sft)), ValidationError);
}

TEST_CASE("checkpoints round-trip and check the vocabulary") {
  const fs::path dir = scratch("ckpt");
  PolicyModel model = make_policy(vocab(), small(), Init::Random, 3);
  model.add_provenance("s-sft");
  save_policy(dir / "p.json", model);
  const PolicyModel back = load_policy(dir / "p.json", vocab());
  CHECK(std::equal(back.net().params().begin(), back.net().params().end(),
                   model.net().params().begin(), model.net().params().end()));
  CHECK(back.provenance() == model.provenance());

  const DiscScorer disc(model, vocab().bot(), 4);
  save_disc(dir / "d.json", disc);
  const DiscScorer dback = load_disc(dir / "d.json", vocab());
  CHECK(std::equal(dback.head().begin(), dback.head().end(), disc.head().begin(), disc.head().end()));

  json j = read_json(dir / "p.json");
  j["vocab_hash"] = "0000";
  CHECK_THROWS(policy_from_json(j, vocab()));
  fs::remove_all(dir);
}

TEST_CASE("run config parsing") {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  write_text(dir / "c.json", R"({"seed": 3, "paths": {"output_dir": "out"}, "env": {"max_steps": 30}})");
  const RunConfig c = load_run_config(dir / "c.json");
  CHECK(c.seed == 3);
  CHECK(c.max_steps == 30);
  CHECK(c.output_dir == dir / "out");

  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"sed": 3})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"training": {"s-sft": {"lr": 1}}})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"paths": {"test_instructions": "missing.jsonl"}})"), dir),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"training": {"t-dpo": {"dpo_beta": 0}}})")), ConfigError);

  const RunConfig round = parse_run_config(run_config_to_json(c), dir);
  CHECK(run_config_to_json(round) == run_config_to_json(c));
  fs::remove_all(dir);
}

TEST_CASE("ablation table layout") {
  std::vector<AblationRow> rows;
  for (const char* name : kAblationRows) rows.push_back({name, {}, {}});
  const std::string t = format_ablation(rows);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < t.size()) {
    const auto nl = t.find('\n', pos);
    lines.push_back(t.substr(pos, nl - pos));
    pos = nl + 1;
  }
  REQUIRE(lines.size() == 6);
  for (std::size_t i = 0; i < 5; ++i) CHECK(lines[i + 1].rfind(kAblationRows[i], 0) == 0);
  for (const char* col : {"#Obj", "#OB", "#CN", "Real.", "Func.", "Lay.", "Comp."})
    CHECK(lines[0].find(col) != std::string::npos);
}
