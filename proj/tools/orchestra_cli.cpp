// Command-line front end: one subcommand per pipeline step.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "orchestra/config.hpp"
#include "orchestra/errors.hpp"
#include "orchestra/instruction.hpp"
#include "orchestra/jsonl.hpp"
#include "orchestra/pipeline.hpp"

using namespace orchestra;
namespace fs = std::filesystem;

namespace {

/// Raised when a run finished but one of its checks did not hold.
struct AssertionFailed : Error {
  using Error::Error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw AssertionFailed("assertion failed: " + what);
}

RunConfig config_from(const std::string& path) {
  return path.empty() ? parse_run_config(json::object()) : load_run_config(path);
}

void print_skips(const std::string& what, const SkipReport& skips) {
  std::cout << what << " skipped: " << skips.count() << "\n";
  for (const auto& [id, reason] : skips.skipped) std::cout << "  " << id << ": " << reason << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tool-call orchestrator training and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "run config (JSON)")->check(CLI::ExistingFile);

  // catalog
  auto* catalog = app.add_subcommand("catalog", "write the instruction splits and tool registry");
  std::string catalog_out = "catalog";
  catalog->add_option("--out", catalog_out, "output directory");

  // rollout
  auto* rollout = app.add_subcommand("rollout", "collect heuristic rollouts");
  std::string ro_instr, ro_out = "rollouts.jsonl";
  int ro_per = -1;
  std::uint64_t ro_seed = 0;
  double ro_eps = -1.0;
  rollout->add_option("--instructions", ro_instr, "instruction JSONL")->required()->check(CLI::ExistingFile);
  rollout->add_option("--out", ro_out, "rollout JSONL");
  rollout->add_option("--per-instruction", ro_per, "rollouts per instruction");
  rollout->add_option("--seed", ro_seed, "base seed (default: config seed)");
  rollout->add_option("--epsilon", ro_eps, "random-call probability");

  // curate
  auto* curate = app.add_subcommand("curate", "build a training dataset from rollouts");
  std::string cu_stage, cu_rollouts, cu_instr, cu_out, cu_policy;
  curate->add_option("--stage", cu_stage, "s-sft | t-sft | s-dpo | t-dpo | disc")
      ->required()
      ->check(CLI::IsMember({"s-sft", "t-sft", "s-dpo", "t-dpo", "disc"}));
  curate->add_option("--rollouts", cu_rollouts, "rollout JSONL")->required()->check(CLI::ExistingFile);
  curate->add_option("--instructions", cu_instr, "instruction JSONL")->required()->check(CLI::ExistingFile);
  curate->add_option("--out", cu_out, "example JSONL")->required();
  curate->add_option("--policy", cu_policy, "orchestrator checkpoint proposing s-dpo alternatives");

  // train
  auto* train = app.add_subcommand("train", "run one training stage");
  std::string tr_stage, tr_data, tr_in, tr_out, tr_report;
  train->add_option("--stage", tr_stage, "s-sft | t-sft | s-dpo | t-dpo | disc-sft")
      ->required()
      ->check(CLI::IsMember({"s-sft", "t-sft", "s-dpo", "t-dpo", "disc-sft"}));
  train->add_option("--data", tr_data, "example JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--in", tr_in, "input checkpoint (fresh model when omitted)");
  train->add_option("--out", tr_out, "output checkpoint")->required();
  train->add_option("--report", tr_report, "training report JSON");

  // interleave
  auto* inter = app.add_subcommand("interleave", "interleaved discriminator / orchestrator training");
  std::string in_orch, in_disc, in_s2, in_s3, in_out = "interleave";
  inter->add_option("--orchestrator", in_orch)->required()->check(CLI::ExistingFile);
  inter->add_option("--discriminator", in_disc)->required()->check(CLI::ExistingFile);
  inter->add_option("--s2", in_s2, "instructions for stage A")->required()->check(CLI::ExistingFile);
  inter->add_option("--s3", in_s3, "instructions for stage B")->required()->check(CLI::ExistingFile);
  inter->add_option("--out", in_out, "output directory");

  // infer
  auto* infer = app.add_subcommand("infer", "one-shot generation and execution");
  std::string if_orch, if_instr, if_out = "inferred.jsonl";
  bool if_greedy = false;
  infer->add_option("--orchestrator", if_orch)->required()->check(CLI::ExistingFile);
  infer->add_option("--instructions", if_instr)->required()->check(CLI::ExistingFile);
  infer->add_option("--out", if_out, "rollout JSONL");
  infer->add_flag("--greedy", if_greedy, "argmax decoding");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a method on an instruction set");
  std::string ev_method, ev_instr, ev_disc, ev_out;
  eval->add_option("--method", ev_method, "'baseline' or an orchestrator checkpoint")->required();
  eval->add_option("--instructions", ev_instr)->required()->check(CLI::ExistingFile);
  eval->add_option("--discriminator", ev_disc, "best-of-m selection with this checkpoint");
  eval->add_option("--out", ev_out, "row JSONL");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and evaluate the five ablation settings");

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  std::string gc_loss = "sft";
  int gc_trials = 20;
  double gc_tol = 1e-4;
  grad->add_option("--loss", gc_loss)->check(CLI::IsMember({"sft", "dpo", "disc"}));
  grad->add_option("--trials", gc_trials);
  grad->add_option("--tolerance", gc_tol);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "rollout -> curate -> train -> interleave -> eval");
  bool pipe_ablation = false;
  pipe->add_flag("--ablation", pipe_ablation, "also run the ablation settings");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = config_from(config_path);
    const Environment env = make_environment(config);
    const Vocabulary vocab(env.registry());

    if (*catalog) {
      const auto splits = make_splits(config);
      const fs::path dir(catalog_out);
      write_jsonl(dir / "train.jsonl", to_rows<Instruction>(splits.train));
      write_jsonl(dir / "s2.jsonl", to_rows<Instruction>(splits.s2));
      write_jsonl(dir / "s3.jsonl", to_rows<Instruction>(splits.s3));
      write_jsonl(dir / "test.jsonl", to_rows<Instruction>(splits.test));
      write_json(dir / "registry.json", registry_to_json(env.registry()));
      std::cout << "train " << splits.train.size() << ", s2 " << splits.s2.size() << ", s3 "
                << splits.s3.size() << ", test " << splits.test.size() << "\n";
    } else if (*rollout) {
      HeuristicConfig h = config.rollout;
      if (ro_eps >= 0.0) h.epsilon = ro_eps;
      const auto instrs = load_instructions(ro_instr);
      const auto rs = collect_rollouts(env, instrs, ro_per > 0 ? ro_per : config.rollouts_per_instruction,
                                       rollout->count("--seed") ? ro_seed : derive_seed(config.seed, "rollout"), h);
      for (const auto& r : rs) check_rollout(r, config.score);
      write_jsonl(ro_out, to_rows<Rollout>(rs));
      std::cout << "rollouts: " << rs.size() << "\n";
    } else if (*curate) {
      const auto instrs = load_instructions(cu_instr);
      const auto rs = load_rollouts(cu_rollouts);
      const CurationContext ctx(vocab, env, instrs);
      const Thresholds& tau = config.thresholds;
      const auto seed = derive_seed(config.seed, "curate:" + cu_stage);
      std::vector<json> rows;
      if (cu_stage == "s-sft") {
        rows = to_rows<SftExample>(vocab, build_stepwise_sft(ctx, rs, tau.tau1));
      } else if (cu_stage == "t-sft") {
        rows = to_rows<SftExample>(vocab, build_trajectory_sft(ctx, rs, tau.tau2, seed,
                                                               config.curation.traj_sft_draws));
      } else if (cu_stage == "s-dpo") {
        if (cu_policy.empty()) throw ConfigError("curate --stage s-dpo needs --policy");
        const PolicyModel policy = load_policy(cu_policy, vocab);
        const auto triplets = build_stepwise_dpo(
            ctx, rs, policy_proposer(policy, vocab, config.curation.proposal_temperature),
            tau.tau1, tau.tau3, seed, config.curation.dpo_samples);
        for (const auto& t : triplets) require(t.score_gap > tau.tau3, "s-dpo gap above tau3");
        rows = to_rows<DpoTriplet>(vocab, triplets);
      } else if (cu_stage == "t-dpo") {
        const auto res = build_trajectory_dpo(ctx, rs, tau.tau4, seed, config.curation.dpo_pair_cap);
        for (const auto& t : res.triplets) require(t.score_gap > tau.tau4, "t-dpo gap above tau4");
        rows = to_rows<DpoTriplet>(vocab, res.triplets);
        print_skips("t-dpo", res.skips);
      } else {
        const auto res = build_disc_data(ctx, rs, config.curation.disc_k, seed);
        for (const auto& e : res.examples)
          require(e.label == best_candidate(e.candidate_c, e.candidate_t), "disc label is argmax");
        rows = to_rows<DiscExample>(vocab, res.examples);
        print_skips("disc", res.skips);
      }
      write_jsonl(cu_out, rows);
      std::cout << cu_stage << " examples: " << rows.size() << " from " << rs.size() << " rollouts\n";
    } else if (*train) {
      const Stage stage = parse_stage(tr_stage);
      TrainReport report;
      if (stage == Stage::DiscSft) {
        const Dataset data = load_dataset(tr_data, vocab, stage);
        const DiscScorer in = tr_in.empty()
                                  ? init_discriminator(vocab, config.discriminator,
                                                       derive_seed(config.seed, "init:disc"))
                                  : load_disc(tr_in, vocab);
        DiscStageResult r = run_disc_stage(seeded(config.training.disc, config.seed),
                                           std::get<std::vector<DiscExample>>(data), in);
        save_disc(tr_out, r.scorer);
        report = r.report;
      } else {
        const Dataset data = load_dataset(tr_data, vocab, stage);
        const PolicyModel in = tr_in.empty() ? init_model(vocab, config.orchestrator,
                                                          derive_seed(config.seed, "init:orch"))
                                             : load_policy(tr_in, vocab);
        const TrainConfig* base = stage == Stage::StepSft   ? &config.training.s_sft
                                  : stage == Stage::TrajSft ? &config.training.t_sft
                                  : stage == Stage::StepDpo ? &config.training.s_dpo
                                                            : &config.training.t_dpo;
        PolicyStageResult r = run_stage(seeded(*base, config.seed), data, in);
        save_policy(tr_out, r.model);
        report = r.report;
      }
      report.checkpoint_path = tr_out;
      for (double l : report.loss_curve) require(std::isfinite(l), "finite loss curve");
      if (!tr_report.empty()) write_json(tr_report, json(report));
      std::printf("%s: %zu examples, %d epochs, loss %.6f -> %.6f\n", tr_stage.c_str(),
                  report.examples, report.epochs_run, report.initial_loss, report.final_loss);
    } else if (*inter) {
      InterleaveConfig icfg = config.interleave;
      icfg.seed = derive_seed(config.seed, "interleave");
      const auto s2 = load_instructions(in_s2);
      const auto s3 = load_instructions(in_s3);
      InterleaveResult r = interleave_cycle(load_policy(in_orch, vocab), load_disc(in_disc, vocab),
                                            s2, s3, env, vocab, icfg);
      const fs::path dir(in_out);
      save_policy(dir / "orchestrator.json", r.orchestrator);
      save_disc(dir / "discriminator.json", r.discriminator);
      for (std::size_t c = 0; c < r.cycles.size(); ++c) {
        const auto& cyc = r.cycles[c];
        require(cyc.stage_b_env_calls == 0, "stage B executes nothing");
        std::cout << "cycle " << c << ": stage A " << cyc.disc_examples << " examples, stage B "
                  << cyc.dpo_triplets << " triplets, stage B env calls " << cyc.stage_b_env_calls
                  << "\n";
        print_skips("stage A", cyc.stage_a_skips);
        print_skips("stage B", cyc.stage_b_skips);
      }
    } else if (*infer) {
      InferConfig icfg = config.eval.infer;
      icfg.sample.greedy = icfg.sample.greedy || if_greedy;
      const PolicyModel orch = load_policy(if_orch, vocab);
      std::vector<json> rows;
      std::size_t failures = 0, retried = 0;
      for (const auto& instr : load_instructions(if_instr)) {
        const InferResult r = infer_and_execute(orch, vocab, env, instr, icfg,
                                                rollout_seed(derive_seed(config.seed, "infer"), instr.id, 0));
        for (const auto& c : r.rollout.calls()) require(c.tool != tools::kReview, "no review calls");
        failures += r.failed ? 1 : 0;
        retried += r.retried ? 1 : 0;
        for (const auto& e : r.attempt_errors) std::cout << instr.id << ": rejected: " << e << "\n";
        rows.emplace_back(r.rollout);
      }
      write_jsonl(if_out, rows);
      std::cout << "generated " << rows.size() << ", retried " << retried << ", failed " << failures << "\n";
    } else if (*eval) {
      const auto instrs = load_instructions(ev_instr);
      EvalReport report;
      if (ev_method == "baseline") {
        Method m{"baseline", nullptr, nullptr, config.rollout};
        m.heuristic.epsilon = config.eval.baseline_epsilon;
        report = evaluate(m, instrs, config.eval.repeats, env, vocab, config.eval.infer, config.seed);
      } else {
        const PolicyModel orch = load_policy(ev_method, vocab);
        std::optional<DiscScorer> disc;
        if (!ev_disc.empty()) disc = load_disc(ev_disc, vocab);
        report = evaluate({ev_disc.empty() ? "ours" : "ours-best-of-m", &orch, disc ? &*disc : nullptr, {}},
                          instrs, config.eval.repeats, env, vocab, config.eval.infer, config.seed);
        for (const auto& row : report.rows) require(row.review_calls == 0, "no review calls");
      }
      std::cout << format_report(report);
      if (!ev_out.empty()) {
        std::vector<json> rows;
        for (const auto& r : report.rows)
          rows.push_back({{"instr_id", r.instr_id}, {"room_type", r.room_type}, {"repeat", r.repeat},
                          {"n_obj", r.n_obj}, {"n_oob", r.n_oob}, {"n_col", r.n_col},
                          {"real", r.real}, {"func", r.func}, {"lay", r.lay}, {"comp", r.comp},
                          {"runtime", r.runtime}, {"composition", r.composition},
                          {"failed", r.failed}});
        write_jsonl(ev_out, rows);
      }
    } else if (*ablate) {
      PipelineOptions opts;
      opts.ablation = true;
      opts.verbose = true;
      const PipelineResult r = run_pipeline(config, opts);
      std::cout << format_ablation(r.ablation);
      for (const auto& row : r.ablation)
        std::printf("%-18s C %.4f\n", row.setting.c_str(), row.report.mean.composition);
    } else if (*grad) {
      const GradCheckReport r = gradient_check(parse_loss_kind(gc_loss), gc_trials, gc_tol);
      std::printf("%s: %d trials, %zu parameters, max relative error %.3e, tolerance %.1e: %s\n",
                  gc_loss.c_str(), r.trials, r.params_checked, r.max_rel_error, r.tolerance,
                  r.passed ? "pass" : "fail");
      require(r.passed, "gradient check within tolerance");
    } else if (*pipe) {
      PipelineOptions opts;
      opts.ablation = pipe_ablation;
      opts.verbose = true;
      const PipelineResult r = run_pipeline(config, opts);
      std::cout << format_report(r.baseline) << "\n" << format_report(r.ours);
      std::printf("runtime ratio %.4f, composition ratio %.4f, wall %.1fs\n", r.runtime_ratio,
                  r.ours.mean.composition / r.baseline.mean.composition, r.wall_seconds);
      if (pipe_ablation) std::cout << "\n" << format_ablation(r.ablation);
      for (const auto& c : r.interleave) require(c.stage_b_env_calls == 0, "stage B executes nothing");
      for (const auto& row : r.ours.rows) require(row.review_calls == 0, "no review calls");
    }
  } catch (const AssertionFailed& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
