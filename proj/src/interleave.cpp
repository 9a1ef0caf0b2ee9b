#include <algorithm>
#include <set>

#include "orchestra/errors.hpp"
#include "orchestra/training.hpp"

namespace orchestra {

namespace {

struct Sampled {
  TokenSeq tokens;
  std::vector<ToolCall> calls;
};

/// Up to m sampled plans that pass the grammar check, deduplicated by tokens,
/// in sampling order.
std::vector<Sampled> sample_plans(const PolicyModel& orch, const Vocabulary& vocab,
                                  const TokenSeq& context, const InterleaveConfig& config,
                                  Rng& rng) {
  SampleOptions opts;
  opts.temperature = config.temperature;
  opts.max_len = config.max_len;
  std::vector<Sampled> out;
  std::set<TokenSeq> seen;
  for (int i = 0; i < config.m; ++i) {
    TokenSeq tokens = sample_continuation(orch.net(), context, vocab.eos(), opts, rng);
    PlanCheck check = check_plan(vocab, tokens, config.max_steps);
    if (!check.ok() || !seen.insert(tokens).second) continue;
    out.push_back({std::move(tokens), std::move(check.calls)});
  }
  return out;
}

}  // namespace

InterleaveResult interleave_cycle(const PolicyModel& orchestrator, const DiscScorer& discriminator,
                                  std::span<const Instruction> s2, std::span<const Instruction> s3,
                                  const Environment& env, const Vocabulary& vocab,
                                  const InterleaveConfig& config) {
  if (s2.empty() || s3.empty()) throw ValidationError("interleave needs non-empty S2 and S3");
  if (config.m < 2) throw ConfigError("interleave m must be >= 2");
  if (config.cycles < 1) throw ConfigError("interleave cycles must be >= 1");
  InterleaveResult result{orchestrator, discriminator, {}};

  for (int cycle = 0; cycle < config.cycles; ++cycle) {
    const std::uint64_t cseed = derive_seed(config.seed, "cycle", static_cast<std::uint64_t>(cycle));
    InterleaveCycleReport report;

    // Stage A: execute samples, label by composition score, adapt the discriminator.
    const std::uint64_t env_before_a = env.tool_invocations();
    for (const auto& instr : s2) {
      const TokenSeq context = encode_context(vocab, instr);
      Rng rng = site_rng(cseed, "stage-a", instr.id);
      auto plans = sample_plans(result.orchestrator, vocab, context, config, rng);
      if (plans.size() < 2) {
        report.stage_a_skips.skipped.emplace_back(instr.id, "fewer than 2 distinct valid samples");
        continue;
      }
      DiscExample ex;
      ex.instr_id = instr.id;
      ex.context = context;
      for (auto& p : plans) {
        const Rollout r = env.execute_trajectory(instr, p.calls);
        ex.candidate_c.push_back(r.steps.back().c);
        ex.candidate_t.push_back(r.steps.back().t_cum);
        ex.candidates.push_back(std::move(p.tokens));
      }
      ex.label = best_candidate(ex.candidate_c, ex.candidate_t);
      report.stage_a_data.push_back(std::move(ex));
    }
    report.stage_a_env_calls = env.tool_invocations() - env_before_a;
    report.disc_examples = report.stage_a_data.size();
    TrainConfig disc_cfg = config.disc_train;
    disc_cfg.stage = Stage::DiscSft;
    disc_cfg.seed = derive_seed(cseed, "disc-train");
    DiscStageResult disc = run_disc_stage(disc_cfg, report.stage_a_data, result.discriminator);
    result.discriminator = std::move(disc.scorer);
    report.disc_report = std::move(disc.report);

    // Stage B: rank samples with the discriminator only, then trajectory DPO.
    const std::uint64_t env_before_b = env.tool_invocations();
    std::vector<DpoTriplet> triplets;
    for (const auto& instr : s3) {
      const TokenSeq context = encode_context(vocab, instr);
      Rng rng = site_rng(cseed, "stage-b", instr.id);
      auto plans = sample_plans(result.orchestrator, vocab, context, config, rng);
      if (plans.size() < 2) {
        report.stage_b_skips.skipped.emplace_back(instr.id, "fewer than 2 distinct valid samples");
        continue;
      }
      std::vector<TokenSeq> cands;
      for (const auto& p : plans) cands.push_back(p.tokens);
      const auto scores = result.discriminator.scores(context, cands);
      const std::size_t best = argmax_lowest(scores);
      std::size_t worst = 0;
      for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] < scores[worst]) worst = i;
      if (scores[best] == scores[worst]) {
        report.stage_b_skips.skipped.emplace_back(instr.id, "discriminator scores tied");
        continue;
      }
      DpoTriplet t;
      t.context = context;
      t.chosen = cands[best];
      t.rejected = cands[worst];
      t.kind = ExampleKind::Trajectory;
      t.score_gap = scores[best] - scores[worst];
      t.instr_id = instr.id;
      triplets.push_back(std::move(t));
    }
    report.dpo_triplets = triplets.size();
    TrainConfig dpo_cfg = config.dpo_train;
    dpo_cfg.stage = Stage::TrajDpo;
    dpo_cfg.seed = derive_seed(cseed, "dpo-train");
    PolicyStageResult dpo = run_stage(dpo_cfg, triplets, result.orchestrator);
    report.stage_b_env_calls = env.tool_invocations() - env_before_b;
    result.orchestrator = std::move(dpo.model);
    result.orchestrator.add_provenance("interleave");
    report.dpo_report = std::move(dpo.report);
    report.stage_b_data = std::move(triplets);
    result.cycles.push_back(std::move(report));
  }
  return result;
}

}  // namespace orchestra
