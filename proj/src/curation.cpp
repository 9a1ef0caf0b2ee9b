#include "orchestra/curation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "orchestra/errors.hpp"
#include "orchestra/instruction.hpp"
#include "orchestra/rollout.hpp"

namespace orchestra {

std::string_view kind_name(ExampleKind kind) {
  return kind == ExampleKind::Stepwise ? "stepwise" : "trajectory";
}

ExampleKind parse_kind(std::string_view name) {
  if (name == "stepwise") return ExampleKind::Stepwise;
  if (name == "trajectory") return ExampleKind::Trajectory;
  throw ValidationError("unknown example kind: " + std::string(name));
}

CurationContext::CurationContext(const Vocabulary& vocab, const Environment& env,
                                 std::span<const Instruction> instructions)
    : vocab_(vocab), env_(env) {
  for (const auto& i : instructions) instructions_.emplace(i.id, i);
}

const Instruction& CurationContext::instruction(const std::string& id) const {
  auto it = instructions_.find(id);
  if (it == instructions_.end()) throw ValidationError("rollout refers to unknown instruction " + id);
  return it->second;
}

bool is_plan_call(const ToolCall& call) {
  return call.tool != tools::kReview && call.tool != tools::kStop;
}

std::vector<ToolCall> plan_prefix(const Rollout& rollout, std::size_t t) {
  std::vector<ToolCall> out;
  for (std::size_t k = 0; k < t && k < rollout.steps.size(); ++k)
    if (is_plan_call(rollout.steps[k].call)) out.push_back(rollout.steps[k].call);
  return out;
}

int best_candidate(std::span<const double> scores, std::span<const double> times) {
  if (scores.empty() || scores.size() != times.size())
    throw ValidationError("best_candidate: mismatched candidate arrays");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best] || (scores[i] == scores[best] && times[i] < times[best])) best = i;
  }
  return static_cast<int>(best);
}

Rng site_rng(std::uint64_t seed, std::string_view tag, const std::string& key,
             std::uint64_t index) {
  return Rng(derive_seed(seed, std::string(tag) + ":" + key, index));
}

namespace {

void require_scored(const CurationContext& ctx, std::span<const Rollout> rollouts) {
  for (const auto& r : rollouts) {
    ctx.instruction(r.instr_id);
    check_rollout(r, ctx.env().params());
  }
}

std::string rollout_key(const Rollout& r) {
  return r.instr_id + "#" + std::to_string(r.replicate);
}

/// Rollouts grouped by instruction id, groups in id order, members in input order.
std::map<std::string, std::vector<const Rollout*>> group_by_instruction(
    std::span<const Rollout> rollouts) {
  std::map<std::string, std::vector<const Rollout*>> groups;
  for (const auto& r : rollouts) groups[r.instr_id].push_back(&r);
  return groups;
}

bool starts_with_init(const std::vector<ToolCall>& plan) {
  return !plan.empty() && plan.front().tool == tools::kInitRoom;
}

}  // namespace

std::vector<SftExample> build_stepwise_sft(const CurationContext& ctx,
                                           std::span<const Rollout> rollouts, double tau1) {
  require_scored(ctx, rollouts);
  std::vector<SftExample> out;
  for (const auto& r : rollouts) {
    const Instruction& instr = ctx.instruction(r.instr_id);
    for (std::size_t t = 2; t <= r.steps.size(); ++t) {
      const RolloutStep& cur = r.steps[t - 1];
      if (cur.call.tool == tools::kReview) continue;
      if (!(cur.c - r.steps[t - 2].c > tau1)) continue;
      const auto history = plan_prefix(r, t - 1);
      const ToolCall target[] = {cur.call};
      out.push_back({encode_context(ctx.vocab(), instr, history), encode_calls(ctx.vocab(), target),
                     ExampleKind::Stepwise, r.instr_id, r.replicate, static_cast<int>(t)});
    }
  }
  return out;
}

std::vector<SftExample> build_trajectory_sft(const CurationContext& ctx,
                                             std::span<const Rollout> rollouts, double tau2,
                                             std::uint64_t seed, int draws) {
  require_scored(ctx, rollouts);
  std::vector<SftExample> out;
  for (const auto& r : rollouts) {
    if (r.steps.empty()) continue;
    const Instruction& instr = ctx.instruction(r.instr_id);
    Rng rng = site_rng(seed, "t-sft", rollout_key(r));
    for (int d = 0; d < draws; ++d) {
      const auto t = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(r.steps.size())));
      if (!(r.steps[t - 1].c > tau2)) continue;
      const auto plan = plan_prefix(r, t);
      if (!starts_with_init(plan)) continue;
      out.push_back({encode_context(ctx.vocab(), instr), encode_trajectory(ctx.vocab(), plan),
                     ExampleKind::Trajectory, r.instr_id, r.replicate, static_cast<int>(t)});
    }
  }
  return out;
}

CallProposer policy_proposer(const PolicyModel& policy, const Vocabulary& vocab,
                             double temperature) {
  return [&policy, &vocab, temperature](std::span<const int> context, Rng& rng) {
    return sample_call(policy.net(), vocab, context, temperature, rng);
  };
}

std::vector<DpoTriplet> build_stepwise_dpo(const CurationContext& ctx,
                                           std::span<const Rollout> rollouts,
                                           const CallProposer& propose, double tau1, double tau3,
                                           std::uint64_t seed, int samples) {
  require_scored(ctx, rollouts);
  const Environment& env = ctx.env();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<DpoTriplet> out;
  for (const auto& r : rollouts) {
    const Instruction& instr = ctx.instruction(r.instr_id);
    for (std::size_t t = 2; t <= r.steps.size(); ++t) {
      const RolloutStep& prev = r.steps[t - 2];
      const RolloutStep& cur = r.steps[t - 1];
      if (!is_plan_call(cur.call)) continue;
      if (!(std::abs(cur.c - prev.c) > tau1)) continue;
      const TokenSeq context = encode_context(ctx.vocab(), instr, plan_prefix(r, t - 1));
      const ToolCall original_call[] = {cur.call};
      const TokenSeq original = encode_calls(ctx.vocab(), original_call);
      Rng rng = site_rng(seed, "s-dpo", rollout_key(r), t);
      for (int s = 0; s < samples; ++s) {
        const TokenSeq alternative = propose(context, rng);
        double c_pred = -inf;
        const CallDecode decoded = decode_calls(ctx.vocab(), alternative);
        if (decoded.ok() && !decoded.terminated && decoded.calls.size() == 1 &&
            is_plan_call(decoded.calls[0])) {
          try {
            const ToolOutcome o = env.step(prev.post_state, decoded.calls[0]);
            const QualityBreakdown q = quality(o.state, instr, env.params());
            c_pred = composition(q.q_total, prev.t_cum + o.delta_time, env.params());
          } catch (const Error&) {
            c_pred = -inf;
          }
        }
        const double gap = std::isinf(c_pred) ? inf : std::abs(c_pred - cur.c);
        if (!(gap > tau3)) continue;
        const bool alternative_wins = c_pred > cur.c;
        DpoTriplet trip{context,
                        alternative_wins ? alternative : original,
                        alternative_wins ? original : alternative,
                        ExampleKind::Stepwise,
                        gap,
                        r.instr_id};
        if (trip.chosen == trip.rejected) continue;
        out.push_back(std::move(trip));
      }
    }
  }
  return out;
}

TrajectoryDpoResult build_trajectory_dpo(const CurationContext& ctx,
                                         std::span<const Rollout> rollouts, double tau4,
                                         std::uint64_t seed, int pair_cap) {
  require_scored(ctx, rollouts);
  TrajectoryDpoResult result;
  for (const auto& [id, group] : group_by_instruction(rollouts)) {
    std::vector<const Rollout*> usable;
    for (const Rollout* r : group)
      if (!r->steps.empty()) usable.push_back(r);
    if (usable.size() < 2) {
      result.skips.skipped.emplace_back(id, "fewer than two rollouts");
      continue;
    }
    const Instruction& instr = ctx.instruction(id);
    const TokenSeq context = encode_context(ctx.vocab(), instr);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < usable.size(); ++i)
      for (std::size_t j = i + 1; j < usable.size(); ++j) pairs.emplace_back(i, j);
    Rng pick = site_rng(seed, "t-dpo-pairs", id);
    pick.shuffle(pairs);
    pairs.resize(std::min(pairs.size(), static_cast<std::size_t>(std::max(0, pair_cap))));
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const Rollout& a = *usable[pairs[q].first];
      const Rollout& b = *usable[pairs[q].second];
      Rng trunc = site_rng(seed, "t-dpo-trunc", id, q);
      const auto ta = static_cast<std::size_t>(trunc.uniform_int(1, static_cast<std::int64_t>(a.steps.size())));
      const auto tb = static_cast<std::size_t>(trunc.uniform_int(1, static_cast<std::int64_t>(b.steps.size())));
      const double ca = a.steps[ta - 1].c, cb = b.steps[tb - 1].c;
      const double gap = std::abs(ca - cb);
      if (!(gap > tau4)) continue;
      const auto plan_a = plan_prefix(a, ta), plan_b = plan_prefix(b, tb);
      if (!starts_with_init(plan_a) || !starts_with_init(plan_b)) continue;
      TokenSeq seq_a = encode_trajectory(ctx.vocab(), plan_a);
      TokenSeq seq_b = encode_trajectory(ctx.vocab(), plan_b);
      if (seq_a == seq_b) continue;
      const bool a_wins = ca > cb;
      result.triplets.push_back({context, a_wins ? std::move(seq_a) : seq_b,
                                 a_wins ? seq_b : std::move(seq_a), ExampleKind::Trajectory, gap,
                                 id});
    }
  }
  return result;
}

DiscBuildResult build_disc_data(const CurationContext& ctx, std::span<const Rollout> rollouts,
                                int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("discriminator candidate sets need k >= 2");
  require_scored(ctx, rollouts);
  DiscBuildResult result;
  for (const auto& [id, group] : group_by_instruction(rollouts)) {
    struct Site {
      TokenSeq tokens;
      double c, t;
    };
    std::vector<Site> sites;
    std::set<TokenSeq> seen;
    for (const Rollout* r : group) {
      for (std::size_t t = 1; t <= r->steps.size(); ++t) {
        if (!is_plan_call(r->steps[t - 1].call)) continue;
        const auto plan = plan_prefix(*r, t);
        if (!starts_with_init(plan)) continue;
        TokenSeq tokens = encode_trajectory(ctx.vocab(), plan);
        if (!seen.insert(tokens).second) continue;
        sites.push_back({std::move(tokens), r->steps[t - 1].c, r->steps[t - 1].t_cum});
      }
    }
    if (sites.size() < static_cast<std::size_t>(k)) {
      result.skips.skipped.emplace_back(id, "fewer than k distinct truncations");
      continue;
    }
    Rng rng = site_rng(seed, "disc", id);
    rng.shuffle(sites);
    DiscExample ex;
    ex.instr_id = id;
    ex.context = encode_context(ctx.vocab(), ctx.instruction(id));
    for (int i = 0; i < k; ++i) {
      auto& s = sites[static_cast<std::size_t>(i)];
      ex.candidates.push_back(std::move(s.tokens));
      ex.candidate_c.push_back(s.c);
      ex.candidate_t.push_back(s.t);
    }
    ex.label = best_candidate(ex.candidate_c, ex.candidate_t);
    result.examples.push_back(std::move(ex));
  }
  return result;
}

std::vector<Instruction> augment_instructions(std::span<const Instruction> instrs,
                                              int variants_per) {
  if (variants_per < 0) throw ValidationError("variants_per must be >= 0");
  std::vector<Instruction> out;
  out.reserve(instrs.size() * static_cast<std::size_t>(variants_per + 1));
  for (const auto& instr : instrs) {
    out.push_back(instr);
    std::vector<std::vector<std::string>> texts{instr.text_tokens};
    int attempt = 0;
    for (int v = 1; v <= variants_per; ++v) {
      Instruction variant;
      do {
        const TextStyle style = variant_style(instr.id, ++attempt, {});
        variant = make_instruction(instr.id + "~v" + std::to_string(v), instr.fields(), style);
      } while (std::find(texts.begin(), texts.end(), variant.text_tokens) != texts.end());
      texts.push_back(variant.text_tokens);
      out.push_back(std::move(variant));
    }
  }
  return out;
}

}  // namespace orchestra

namespace orchestra {

PlanCheck check_plan(const Vocabulary& vocab, std::span<const int> tokens, int max_steps) {
  PlanCheck out;
  const CallDecode d = decode_calls(vocab, tokens);
  if (!d.ok()) {
    out.error = d.error;
    return out;
  }
  if (!d.terminated) {
    out.error = DecodeError{tokens.size(), "no <eos>"};
    return out;
  }
  if (d.calls.empty() || d.calls.front().tool != tools::kInitRoom) {
    out.error = DecodeError{0, "plan must start with init_room"};
    return out;
  }
  for (std::size_t i = 0; i < d.calls.size(); ++i) {
    if (!is_plan_call(d.calls[i])) {
      out.error = DecodeError{i, d.calls[i].tool + " is not a plan call"};
      return out;
    }
  }
  if (static_cast<int>(d.calls.size()) > max_steps) {
    out.error = DecodeError{tokens.size(), "plan longer than max_steps"};
    return out;
  }
  out.calls = d.calls;
  return out;
}

}  // namespace orchestra
