#include "orchestra/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

#include "orchestra/errors.hpp"
#include "orchestra/instruction.hpp"
#include "orchestra/jsonl.hpp"

namespace orchestra {

namespace {

std::vector<std::string> concat(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  std::vector<std::string> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

InstructionSplits make_splits(const RunConfig& config) {
  const auto& ic = config.instructions;
  const auto train_rooms = concat(seen_room_types(), train_only_room_types());
  auto spec = [&](const char* prefix, const std::vector<std::string>& rooms, int count) {
    InstructionSetSpec s;
    s.id_prefix = prefix;
    s.rooms = rooms;
    s.count = count;
    s.target_min = ic.target_min;
    s.target_max = ic.target_max;
    return s;
  };
  InstructionSplits splits;
  const auto base = generate_instructions(spec("train", train_rooms, ic.train_count),
                                          derive_seed(config.seed, "instr-train"));
  splits.train = augment_instructions(base, ic.variants_per);
  splits.s2 = generate_instructions(spec("s2", train_rooms, ic.s2_count),
                                    derive_seed(config.seed, "instr-s2"));
  splits.s3 = generate_instructions(spec("s3", train_rooms, ic.s3_count),
                                    derive_seed(config.seed, "instr-s3"));
  if (config.test_instructions) {
    splits.test = load_instructions(*config.test_instructions);
  } else {
    splits.test = generate_instructions(
        spec("test", concat(unseen_room_types(), seen_room_types()), ic.test_count),
        derive_seed(config.seed, "instr-test"));
  }
  return splits;
}

Environment make_environment(const RunConfig& config) {
  return Environment(default_registry(), config.score, config.max_steps);
}

PolicyModel init_model(const Vocabulary& vocab, const ModelConfig& model, std::uint64_t seed) {
  return make_policy(vocab, model.dims, Init::Random, seed, model.init_scale);
}

DiscScorer init_discriminator(const Vocabulary& vocab, const ModelConfig& model,
                              std::uint64_t seed) {
  return DiscScorer(init_model(vocab, model, derive_seed(seed, "backbone")), vocab.bot(),
                    derive_seed(seed, "head"), model.init_scale);
}

TrainConfig seeded(const TrainConfig& base, std::uint64_t run_seed) {
  TrainConfig c = base;
  c.seed = derive_seed(run_seed, std::string("train:") + std::string(stage_name(base.stage)));
  return c;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::string out;
  char buf[320];
  std::snprintf(buf, sizeof buf, "%-18s %5s %5s %5s %5s %5s %5s | %6s %5s %5s %6s %6s %6s %6s\n",
                "Setting", "S-SFT", "T-SFT", "S-DPO", "T-DPO", "Disc.", "Inter.", "#Obj", "#OB",
                "#CN", "Real.", "Func.", "Lay.", "Comp.");
  out += buf;
  for (const auto& r : rows) {
    const auto mark = [&](int i) { return r.stages[static_cast<std::size_t>(i)] ? "x" : ""; };
    const EvalRow& m = r.report.mean;
    std::snprintf(buf, sizeof buf,
                  "%-18s %5s %5s %5s %5s %5s %5s | %6.1f %5.2f %5.2f %6.2f %6.2f %6.2f %6.2f\n",
                  r.setting.c_str(), mark(0), mark(1), mark(2), mark(3), mark(4), mark(5), m.n_obj,
                  m.n_oob, m.n_col, m.real, m.func, m.lay, m.comp);
    out += buf;
  }
  return out;
}

namespace {

json eval_row_json(const EvalRow& r) {
  return json{{"instr_id", r.instr_id},       {"room_type", r.room_type}, {"repeat", r.repeat},
              {"n_obj", r.n_obj},             {"n_oob", r.n_oob},         {"n_col", r.n_col},
              {"real", r.real},               {"func", r.func},           {"lay", r.lay},
              {"comp", r.comp},               {"runtime", r.runtime},     {"composition", r.composition},
              {"review_calls", r.review_calls}, {"retried", r.retried},   {"failed", r.failed}};
}

void write_eval(const std::filesystem::path& dir, const EvalReport& report,
                const std::string& name) {
  std::vector<json> rows;
  for (const auto& r : report.rows) rows.push_back(eval_row_json(r));
  rows.push_back(eval_row_json(report.mean));
  write_jsonl(dir / (name + ".jsonl"), rows);
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, const PipelineOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const auto& out = config.output_dir;
  const bool write = options.write_files;
  auto log = [&](const std::string& msg) {
    if (options.verbose) std::cerr << "[pipeline] " << msg << "\n";
  };

  PipelineResult result;
  const Environment env = make_environment(config);
  const Vocabulary vocab(env.registry());
  result.splits = make_splits(config);
  const auto& splits = result.splits;
  if (write) {
    write_jsonl(out / "instructions/train.jsonl", to_rows<Instruction>(splits.train));
    write_jsonl(out / "instructions/s2.jsonl", to_rows<Instruction>(splits.s2));
    write_jsonl(out / "instructions/s3.jsonl", to_rows<Instruction>(splits.s3));
    write_jsonl(out / "instructions/test.jsonl", to_rows<Instruction>(splits.test));
    write_json(out / "registry.json", registry_to_json(env.registry()));
  }

  // Phase-1 data.
  const auto rollouts = collect_rollouts(env, splits.train, config.rollouts_per_instruction,
                                         derive_seed(config.seed, "rollout"), config.rollout);
  result.rollouts = rollouts.size();
  if (write) write_jsonl(out / "rollouts.jsonl", to_rows<Rollout>(rollouts));
  log("rollouts: " + std::to_string(rollouts.size()));

  const CurationContext ctx(vocab, env, splits.train);
  const Thresholds& tau = config.thresholds;
  const auto s_sft = build_stepwise_sft(ctx, rollouts, tau.tau1);
  const auto t_sft = build_trajectory_sft(ctx, rollouts, tau.tau2,
                                          derive_seed(config.seed, "curate:t-sft"),
                                          config.curation.traj_sft_draws);
  const auto t_dpo = build_trajectory_dpo(ctx, rollouts, tau.tau4,
                                          derive_seed(config.seed, "curate:t-dpo"),
                                          config.curation.dpo_pair_cap);
  const auto disc_data = build_disc_data(ctx, rollouts, config.curation.disc_k,
                                         derive_seed(config.seed, "curate:disc"));
  result.dataset_sizes["s-sft"] = s_sft.size();
  result.dataset_sizes["t-sft"] = t_sft.size();
  result.dataset_sizes["t-dpo"] = t_dpo.triplets.size();
  result.dataset_sizes["disc"] = disc_data.examples.size();
  if (write) {
    write_jsonl(out / "data/s-sft.jsonl", to_rows<SftExample>(vocab, s_sft));
    write_jsonl(out / "data/t-sft.jsonl", to_rows<SftExample>(vocab, t_sft));
    write_jsonl(out / "data/t-dpo.jsonl", to_rows<DpoTriplet>(vocab, t_dpo.triplets));
    write_jsonl(out / "data/disc.jsonl", to_rows<DiscExample>(vocab, disc_data.examples));
  }
  log("curated s-sft " + std::to_string(s_sft.size()) + ", t-sft " + std::to_string(t_sft.size()) +
      ", t-dpo " + std::to_string(t_dpo.triplets.size()) + ", disc " +
      std::to_string(disc_data.examples.size()));

  auto train = [&](const TrainConfig& base, const Dataset& data, const PolicyModel& in,
                   const std::string& name) {
    PolicyStageResult r = run_stage(seeded(base, config.seed), data, in);
    if (write) {
      r.report.checkpoint_path = "checkpoints/" + name + ".json";
      save_policy(out / r.report.checkpoint_path, r.model);
    }
    log(name + ": " + std::to_string(r.report.examples) + " examples, loss " +
        std::to_string(r.report.initial_loss) + " -> " + std::to_string(r.report.final_loss));
    result.train_reports[name] = r.report;
    return std::move(r.model);
  };

  // Orchestrator curriculum.
  const PolicyModel init = init_model(vocab, config.orchestrator, derive_seed(config.seed, "init:orch"));
  const PolicyModel m_ssft = train(config.training.s_sft, s_sft, init, "s-sft");
  const PolicyModel m_tsft = train(config.training.t_sft, t_sft, m_ssft, "t-sft");
  const auto s_dpo = build_stepwise_dpo(
      ctx, rollouts, policy_proposer(m_tsft, vocab, config.curation.proposal_temperature), tau.tau1,
      tau.tau3, derive_seed(config.seed, "curate:s-dpo"), config.curation.dpo_samples);
  result.dataset_sizes["s-dpo"] = s_dpo.size();
  if (write) write_jsonl(out / "data/s-dpo.jsonl", to_rows<DpoTriplet>(vocab, s_dpo));
  const PolicyModel m_sdpo = train(config.training.s_dpo, s_dpo, m_tsft, "s-dpo");
  const PolicyModel m_tdpo = train(config.training.t_dpo, t_dpo.triplets, m_sdpo, "t-dpo");

  // Discriminator.
  DiscStageResult disc = run_disc_stage(seeded(config.training.disc, config.seed),
                                        disc_data.examples,
                                        init_discriminator(vocab, config.discriminator,
                                                           derive_seed(config.seed, "init:disc")));
  if (write) {
    disc.report.checkpoint_path = "checkpoints/disc-sft.json";
    save_disc(out / disc.report.checkpoint_path, disc.scorer);
  }
  result.train_reports["disc-sft"] = disc.report;
  log("disc-sft: loss " + std::to_string(disc.report.initial_loss) + " -> " +
      std::to_string(disc.report.final_loss));

  // Interleaved training.
  InterleaveConfig icfg = config.interleave;
  icfg.seed = derive_seed(config.seed, "interleave");
  InterleaveResult inter = interleave_cycle(m_tdpo, disc.scorer, splits.s2, splits.s3, env, vocab, icfg);
  for (std::size_t c = 0; c < inter.cycles.size(); ++c) {
    const auto& cyc = inter.cycles[c];
    result.train_reports["interleave-" + std::to_string(c) + "-disc"] = cyc.disc_report;
    result.train_reports["interleave-" + std::to_string(c) + "-t-dpo"] = cyc.dpo_report;
    if (write) {
      const std::string tag = "data/interleave-" + std::to_string(c);
      write_jsonl(out / (tag + "-stage-a.jsonl"), to_rows<DiscExample>(vocab, cyc.stage_a_data));
      write_jsonl(out / (tag + "-stage-b.jsonl"), to_rows<DpoTriplet>(vocab, cyc.stage_b_data));
    }
    log("interleave cycle " + std::to_string(c) + ": stage A " +
        std::to_string(cyc.disc_examples) + " examples, stage B " +
        std::to_string(cyc.dpo_triplets) + " triplets, stage B env calls " +
        std::to_string(cyc.stage_b_env_calls));
  }
  result.interleave = inter.cycles;
  if (write) {
    save_policy(out / "checkpoints/orchestrator.json", inter.orchestrator);
    save_disc(out / "checkpoints/discriminator.json", inter.discriminator);
  }

  // Evaluation.
  const InferConfig& infer = config.eval.infer;
  Method baseline{"baseline", nullptr, nullptr, config.rollout};
  baseline.heuristic.epsilon = config.eval.baseline_epsilon;
  result.baseline = evaluate(baseline, splits.test, config.eval.repeats, env, vocab, infer, config.seed);
  result.ours = evaluate({"ours", &inter.orchestrator, nullptr, {}}, splits.test,
                         config.eval.repeats, env, vocab, infer, config.seed);
  result.runtime_ratio = runtime_ratio(result.ours, result.baseline);
  log("baseline C " + std::to_string(result.baseline.mean.composition) + ", ours C " +
      std::to_string(result.ours.mean.composition) + ", runtime ratio " +
      std::to_string(result.runtime_ratio));

  if (options.ablation) {
    const PolicyModel b_tsft = train(config.training.t_sft, t_sft, init, "ablation-t-sft");
    const PolicyModel b_tdpo = train(config.training.t_dpo, t_dpo.triplets, b_tsft, "ablation-t-dpo");
    auto ev = [&](const std::string& tag, const PolicyModel& m, const DiscScorer* d) {
      return evaluate({tag, &m, d, {}}, splits.test, config.eval.repeats, env, vocab, infer,
                      config.seed);
    };
    result.ablation = {
        {kAblationRows[0], {true, true, false, false, false, false}, ev("ablation-wo-dpo", m_tsft, nullptr)},
        {kAblationRows[1], {false, true, false, true, false, false}, ev("ablation-wo-stepwise", b_tdpo, nullptr)},
        {kAblationRows[2], {true, true, true, true, false, false}, ev("ablation-wo-disc", m_tdpo, nullptr)},
        {kAblationRows[3], {true, true, true, true, true, false}, ev("ablation-indep-only", m_tdpo, &disc.scorer)},
        {kAblationRows[4], {true, true, true, true, true, true}, result.ours},
    };
    result.ablation[4].report.method = "ablation-full";
  }

  if (write) {
    write_eval(out / "eval", result.baseline, "baseline");
    write_eval(out / "eval", result.ours, "ours");
    std::string summary = format_report(result.baseline) + "\n" + format_report(result.ours);
    char buf[128];
    std::snprintf(buf, sizeof buf, "\nruntime ratio (ours / baseline): %.4f\n", result.runtime_ratio);
    summary += buf;
    write_text(out / "eval/summary.txt", summary);
    if (options.ablation) {
      write_text(out / "eval/ablation.txt", format_ablation(result.ablation));
      for (const auto& row : result.ablation) write_eval(out / "eval", row.report, row.report.method);
    }
    json reports = json::object();
    for (const auto& [name, r] : result.train_reports) reports[name] = r;
    json sizes = result.dataset_sizes;
    write_json(out / "reports.json", json{{"train", reports}, {"datasets", sizes}});
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace orchestra
