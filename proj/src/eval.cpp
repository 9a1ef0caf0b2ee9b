#include "orchestra/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "orchestra/curation.hpp"
#include "orchestra/errors.hpp"

namespace orchestra {

namespace {

struct Attempt {
  std::optional<Rollout> rollout;
  std::string error;
};

Attempt try_plan(const Vocabulary& vocab, const Environment& env, const Instruction& instr,
                 const TokenSeq& tokens, int max_steps) {
  const PlanCheck check = check_plan(vocab, tokens, max_steps);
  if (!check.ok())
    return {std::nullopt,
            "token " + std::to_string(check.error->position) + ": " + check.error->reason};
  Rollout r = env.execute_trajectory(instr, check.calls);
  if (!r.flags.valid) return {std::nullopt, r.flags.failure_reason};
  return {std::move(r), {}};
}

}  // namespace

InferResult infer_and_execute(const PolicyModel& orchestrator, const Vocabulary& vocab,
                              const Environment& env, const Instruction& instr,
                              const InferConfig& config, std::uint64_t seed) {
  const TokenSeq context = encode_context(vocab, instr);
  Rng rng(seed);
  InferResult result;
  std::string last_error;
  for (int i = 0; i <= config.retries; ++i) {
    if (i > 0 && config.sample.greedy) break;  // greedy regenerations would repeat themselves
    ++result.attempts;
    result.retried = i > 0;
    const TokenSeq tokens =
        sample_continuation(orchestrator.net(), context, vocab.eos(), config.sample, rng);
    Attempt a = try_plan(vocab, env, instr, tokens, config.max_steps);
    if (a.rollout) {
      result.rollout = std::move(*a.rollout);
      result.rollout.seed = seed;
      return result;
    }
    last_error = a.error;
    result.attempt_errors.push_back(a.error);
  }
  result.retried = true;
  if (!config.sample.greedy) {
    ++result.attempts;
    result.greedy_fallback = true;
    SampleOptions greedy = config.sample;
    greedy.greedy = true;
    const TokenSeq tokens = sample_continuation(orchestrator.net(), context, vocab.eos(), greedy, rng);
    Attempt a = try_plan(vocab, env, instr, tokens, config.max_steps);
    if (a.rollout) {
      result.rollout = std::move(*a.rollout);
      result.rollout.seed = seed;
      return result;
    }
    last_error = a.error;
    result.attempt_errors.push_back(a.error);
  }
  result.failed = true;
  result.failure_reason = last_error;
  result.rollout.instr_id = instr.id;
  result.rollout.seed = seed;
  result.rollout.flags.valid = false;
  result.rollout.flags.failure_reason = last_error;
  return result;
}

InferResult infer_best_of_m(const PolicyModel& orchestrator, const DiscScorer& discriminator,
                            const Vocabulary& vocab, const Environment& env,
                            const Instruction& instr, const InferConfig& config,
                            std::uint64_t seed) {
  const TokenSeq context = encode_context(vocab, instr);
  Rng rng(seed);
  std::vector<TokenSeq> cands;
  std::vector<std::vector<ToolCall>> plans;
  std::set<TokenSeq> seen;
  SampleOptions opts = config.sample;
  opts.greedy = false;
  for (int i = 0; i < config.best_of_m; ++i) {
    TokenSeq tokens = sample_continuation(orchestrator.net(), context, vocab.eos(), opts, rng);
    PlanCheck check = check_plan(vocab, tokens, config.max_steps);
    if (!check.ok() || !seen.insert(tokens).second) continue;
    cands.push_back(std::move(tokens));
    plans.push_back(std::move(check.calls));
  }
  if (cands.empty()) {
    InferResult r = infer_and_execute(orchestrator, vocab, env, instr, config,
                                      derive_seed(seed, "best-of-m-fallback"));
    r.retried = true;
    return r;
  }
  const std::size_t pick = cands.size() == 1 ? 0 : disc_select(discriminator, context, cands);
  InferResult result;
  result.attempts = 1;
  result.rollout = env.execute_trajectory(instr, plans[pick]);
  result.rollout.seed = seed;
  return result;
}

EvalRow row_from_rollout(const Rollout& r, const Instruction& instr, int repeat) {
  EvalRow row;
  row.instr_id = instr.id;
  row.room_type = instr.room_type;
  row.repeat = repeat;
  if (r.steps.empty()) return row;
  const RolloutStep& last = r.steps.back();
  row.n_obj = last.post_state.n_obj;
  row.n_oob = last.post_state.n_oob;
  row.n_col = last.post_state.n_col;
  row.real = last.post_state.vis_real;
  row.func = last.post_state.vis_func;
  row.lay = last.post_state.vis_lay;
  row.comp = last.q.s_comp;
  row.runtime = last.t_cum;
  row.composition = last.c;
  for (const auto& s : r.steps) row.review_calls += s.call.tool == tools::kReview ? 1 : 0;
  return row;
}

EvalRow mean_row(std::span<const EvalRow> rows) {
  EvalRow m;
  m.instr_id = "mean";
  if (rows.empty()) return m;
  double reviews = 0.0;
  for (const auto& r : rows) {
    m.n_obj += r.n_obj;
    m.n_oob += r.n_oob;
    m.n_col += r.n_col;
    m.real += r.real;
    m.func += r.func;
    m.lay += r.lay;
    m.comp += r.comp;
    m.runtime += r.runtime;
    m.composition += r.composition;
    reviews += static_cast<double>(r.review_calls);
  }
  const double n = static_cast<double>(rows.size());
  for (double* v : {&m.n_obj, &m.n_oob, &m.n_col, &m.real, &m.func, &m.lay, &m.comp, &m.runtime,
                    &m.composition})
    *v /= n;
  m.review_calls = static_cast<std::size_t>(reviews);
  return m;
}

EvalReport evaluate(const Method& method, std::span<const Instruction> instrs, int repeats,
                    const Environment& env, const Vocabulary& vocab, const InferConfig& config,
                    std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("evaluate: repeats must be >= 1");
  EvalReport report;
  report.method = method.tag;
  for (const auto& instr : instrs) {
    for (int rep = 0; rep < repeats; ++rep) {
      const std::uint64_t s = rollout_seed(derive_seed(seed, "eval"), instr.id, rep);
      EvalRow row;
      if (!method.orchestrator) {
        row = row_from_rollout(run_heuristic(env, instr, method.heuristic, s), instr, rep);
      } else {
        const InferResult r =
            method.discriminator
                ? infer_best_of_m(*method.orchestrator, *method.discriminator, vocab, env, instr,
                                  config, s)
                : infer_and_execute(*method.orchestrator, vocab, env, instr, config, s);
        row = row_from_rollout(r.rollout, instr, rep);
        row.retried = r.retried;
        row.failed = r.failed;
        report.failures += r.failed ? 1 : 0;
        report.retries += r.retried ? 1 : 0;
      }
      report.rows.push_back(std::move(row));
    }
  }
  report.mean = mean_row(report.rows);
  return report;
}

double runtime_ratio(const EvalReport& report, const EvalReport& baseline) {
  if (baseline.mean.runtime <= 0.0) throw ValidationError("baseline runtime is zero");
  return report.mean.runtime / baseline.mean.runtime;
}

namespace {

std::string format_line(const std::string& label, const EvalRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %6.1f %5.2f %5.2f %6.2f %6.2f %6.2f %6.2f %8.2f %7.3f",
                label.c_str(), r.n_obj, r.n_oob, r.n_col, r.real, r.func, r.lay, r.comp, r.runtime,
                r.composition);
  return buf;
}

}  // namespace

std::string format_report(const EvalReport& report) {
  std::string out = "method: " + report.method + "\n";
  char head[256];
  std::snprintf(head, sizeof head, "%-16s %6s %5s %5s %6s %6s %6s %6s %8s %7s\n", "room", "#Obj",
                "#OB", "#CN", "Real.", "Func.", "Lay.", "Comp.", "runtime", "C");
  out += head;
  std::map<std::string, std::vector<EvalRow>> by_room;
  for (const auto& r : report.rows) by_room[r.room_type].push_back(r);
  for (const auto& [room, rows] : by_room) out += format_line(room, mean_row(rows)) + "\n";
  out += format_line("mean", report.mean) + "\n";
  out += "failures: " + std::to_string(report.failures) + "/" + std::to_string(report.rows.size()) +
         ", retried: " + std::to_string(report.retries) + "\n";
  return out;
}

Rollout strip_reviews(const Environment& env, const Instruction& instr, const Rollout& r) {
  std::vector<ToolCall> calls;
  for (const auto& c : r.calls())
    if (c.tool != tools::kReview) calls.push_back(c);
  Rollout out = env.execute_trajectory(instr, calls);
  out.seed = r.seed;
  out.replicate = r.replicate;
  return out;
}

}  // namespace orchestra
