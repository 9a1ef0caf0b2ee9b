#include <doctest.h>

#include <cmath>
#include <numeric>

#include "orchestra/disc.hpp"
#include "orchestra/errors.hpp"
#include "orchestra/instruction.hpp"
#include "orchestra/policy.hpp"
#include "orchestra/training.hpp"
#include "orchestra/vocab.hpp"

using namespace orchestra;

namespace {

const Registry& reg() {
  static const Registry r = default_registry();
  return r;
}

const Vocabulary& vocab() {
  static const Vocabulary v(reg());
  return v;
}

std::span<double> block(SequenceModel& m, const std::string& name) {
  for (const auto& b : m.layout())
    if (b.name == name) return m.params().subspan(b.offset, b.size);
  FAIL("no block " << name);
  return {};
}

ModelDims small(Arch arch) {
  ModelDims d;
  d.arch = arch;
  d.vocab_size = vocab().size();
  d.window = 4;
  d.hidden = 8;
  d.max_len = 128;
  return d;
}

Instruction some_instruction() {
  InstructionFields f;
  f.room_type = room_catalog()[3];
  f.target_object_count = 17;
  f.emphasis = {0.25, 1.0, 0.0};
  return make_instruction("p", f);
}

std::vector<ToolCall> random_calls(Rng& rng, int n) {
  const auto pool = reg().enumerate_calls();
  std::vector<ToolCall> out;
  for (int i = 0; i < n; ++i) out.push_back(pool[rng.index(pool.size())]);
  return out;
}

}  // namespace

TEST_CASE("vocabulary is a bijection") {
  const auto& v = vocab();
  for (int i = 0; i < v.size(); ++i) CHECK(v.id(v.token(i)) == i);
  CHECK_THROWS_AS(v.id("definitely-not-a-token"), EncodingError);
  CHECK_THROWS_AS(v.token(v.size()), EncodingError);
  CHECK(v.hash() == Vocabulary(default_registry()).hash());
}

TEST_CASE("context and trajectory encodings round-trip") {
  const auto& v = vocab();
  const Instruction in = some_instruction();
  const TokenSeq empty = encode_context(v, in);
  CHECK(empty.back() == v.hist());

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto history = random_calls(rng, static_cast<int>(rng.uniform_int(0, 10)));
    const auto d = decode_context(v, encode_context(v, in, history));
    CHECK(d.fields == in.fields());
    CHECK(d.history == history);
  }
  const auto five = random_calls(rng, 5);
  const auto dec = decode_calls(v, encode_trajectory(v, five));
  CHECK(dec.ok());
  CHECK(dec.terminated);
  CHECK(dec.calls == five);

  TokenSeq bad = encode_calls(v, five);
  bad.insert(bad.begin() + 2, v.size() + 7);
  const auto err = decode_calls(v, bad);
  REQUIRE_FALSE(err.ok());
  CHECK(err.error->position == 2);

  TokenSeq missing_param{v.id("add_objects"), v.id("refine_lay")};
  CHECK_FALSE(decode_calls(v, missing_param).ok());
}

TEST_CASE("instruction text round-trips under every style") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    InstructionFields f;
    f.room_type = room_catalog()[rng.index(room_catalog().size())];
    f.target_object_count = static_cast<int>(rng.uniform_int(1, kMaxTargetCount));
    f.emphasis = {kEmphasisLevels[rng.index(5)], kEmphasisLevels[rng.index(5)],
                  kEmphasisLevels[rng.index(5)]};
    const TextStyle style = variant_style("x" + std::to_string(trial), trial, {});
    CHECK(parse_text(render_text(f, style)) == f);
  }
  auto text = render_text(some_instruction().fields());
  text[1] = "banana";
  CHECK_THROWS_AS(parse_text(text), EncodingError);
}

TEST_CASE("next-token distributions are normalised") {
  const Instruction in = some_instruction();
  Rng rng(2);
  for (Arch arch : {Arch::Bigram, Arch::Mlp, Arch::Attention}) {
    auto m = make_model(small(arch), Init::Random, 3, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto ctx = encode_context(vocab(), in, random_calls(rng, trial % 6));
      const auto p = next_distribution(*m, ctx, 0.7);
      double sum = 0;
      for (double x : p) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      const TokenSeq tgt = encode_calls(vocab(), random_calls(rng, 2));
      TokenSeq full = ctx;
      full.insert(full.end(), tgt.begin(), tgt.end());
      CHECK(m->sequence_logprob(full, ctx.size()) <= 0.0);
      CHECK(m->sequence_logprob(ctx, ctx.size()) == 0.0);
    }
  }
}

TEST_CASE("zero-initialised models are uniform") {
  const Instruction in = some_instruction();
  for (Arch arch : {Arch::Bigram, Arch::Mlp, Arch::Attention}) {
    auto m = make_model(small(arch), Init::Zero, 0);
    const auto ctx = encode_context(vocab(), in);
    TokenSeq full = ctx;
    for (int i = 0; i < 6; ++i) full.push_back(i);
    CHECK(m->sequence_logprob(full, ctx.size()) ==
          doctest::Approx(-6.0 * std::log(static_cast<double>(vocab().size()))));
  }
}

TEST_CASE("sampling matches a fixed distribution") {
  ModelDims d;
  d.arch = Arch::Mlp;
  d.vocab_size = 3;
  d.window = 1;
  d.hidden = 2;
  d.max_len = 8;
  auto m = make_model(d, Init::Zero, 0);
  auto bias = block(*m, "out_b");
  bias[0] = std::log(0.2);
  bias[1] = std::log(0.3);
  bias[2] = std::log(0.5);
  Rng rng(12);
  std::array<int, 3> counts{};
  const TokenSeq ctx{0};
  SampleOptions opt;
  opt.max_len = 1;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_continuation(*m, ctx, -1, opt, rng)[0])];
  CHECK(std::abs(counts[0] / double(n) - 0.2) <= 0.02);
  CHECK(std::abs(counts[1] / double(n) - 0.3) <= 0.02);
  CHECK(std::abs(counts[2] / double(n) - 0.5) <= 0.02);
}

TEST_CASE("greedy decoding is deterministic and temperature-invariant") {
  auto m = make_model(small(Arch::Mlp), Init::Random, 5, 1.0);
  const auto ctx = encode_context(vocab(), some_instruction());
  SampleOptions g;
  g.greedy = true;
  g.max_len = 20;
  Rng a(1), b(99);
  CHECK(sample_continuation(*m, ctx, vocab().eos(), g, a) ==
        sample_continuation(*m, ctx, vocab().eos(), g, b));
  for (double temp : {0.1, 0.5, 2.0, 10.0}) {
    CHECK(argmax_lowest(next_distribution(*m, ctx, temp)) == argmax_lowest(next_distribution(*m, ctx, 1.0)));
  }

  auto absorbing = make_model(small(Arch::Mlp), Init::Zero, 0);
  block(*absorbing, "out_b")[static_cast<std::size_t>(vocab().eos())] = 1e3;
  SampleOptions s;
  s.max_len = 20;
  Rng r(3);
  CHECK(sample_continuation(*absorbing, ctx, vocab().eos(), s, r) == TokenSeq{vocab().eos()});
}

TEST_CASE("reference snapshots are immutable") {
  PolicyModel live = make_policy(vocab(), small(Arch::Mlp), Init::Random, 7);
  const FrozenPolicy ref = snapshot_reference(live);
  const FrozenPolicy ref2 = snapshot_reference(*ref);
  const auto ctx = encode_context(vocab(), some_instruction());
  const TokenSeq tgt = encode_trajectory(vocab(), std::vector<ToolCall>{{"init_room", std::nullopt}});
  const double before = ref->sequence_logprob(ctx, tgt);
  CHECK(ref2->sequence_logprob(ctx, tgt) == before);

  std::vector<SftExample> batch{{ctx, tgt, ExampleKind::Trajectory, "p", 0, 1}};
  Adam opt(live.net().num_params(), 1e-2);
  for (int i = 0; i < 100; ++i) {
    const auto lg = sft_loss_and_grad(live, batch);
    opt.step(live.net().params(), lg.grad);
  }
  CHECK(live.sequence_logprob(ctx, tgt) > before);
  CHECK(ref->sequence_logprob(ctx, tgt) == before);
}

TEST_CASE("discriminator selection is permutation-sound") {
  PolicyModel backbone = make_policy(vocab(), small(Arch::Mlp), Init::Random, 9, 0.5);
  const DiscScorer scorer(backbone, vocab().bot(), 10, 0.5);
  const auto ctx = encode_context(vocab(), some_instruction());
  Rng rng(1);
  std::vector<TokenSeq> cands;
  for (int i = 0; i < 5; ++i) {
    auto calls = random_calls(rng, 1 + i);
    calls.insert(calls.begin(), ToolCall{"init_room", std::nullopt});
    cands.push_back(encode_trajectory(vocab(), calls));
  }
  const auto scores = scorer.scores(ctx, cands);
  for (double s : scores) CHECK(std::isfinite(s));
  std::vector<std::size_t> perm{3, 0, 4, 2, 1};
  std::vector<TokenSeq> shuffled;
  for (auto i : perm) shuffled.push_back(cands[i]);
  const auto s2 = scorer.scores(ctx, shuffled);
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(s2[i] == scores[perm[i]]);
  CHECK(perm[disc_select(scorer, ctx, shuffled)] == disc_select(scorer, ctx, cands));

  const std::vector<TokenSeq> same{cands[0], cands[0]};
  CHECK(disc_select(scorer, ctx, same) == 0);
  CHECK_THROWS_AS(disc_select(scorer, ctx, std::vector<TokenSeq>{}), ValidationError);
}
