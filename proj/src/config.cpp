#include "orchestra/config.hpp"

#include <set>

#include "orchestra/errors.hpp"
#include "orchestra/jsonl.hpp"

namespace orchestra {

namespace {

/// Reads optional keys from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  /// Calls `fn` with the nested section when present.
  template <typename F>
  void sub(const char* key, F&& fn) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Section s(j_.at(key), where_ + "." + key);
    fn(s);
    s.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_train(Section& s, TrainConfig& t) {
  s.get("learning_rate", t.learning_rate);
  s.get("epochs", t.epochs);
  s.get("batch_size", t.batch_size);
  s.get("dpo_beta", t.dpo_beta);
  s.get("patience", t.patience);
  s.sub("adam", [&](Section& a) {
    a.get("beta1", t.adam.beta1);
    a.get("beta2", t.adam.beta2);
    a.get("eps", t.adam.eps);
  });
  t.validate();
}

json train_json(const TrainConfig& t) {
  return json{{"learning_rate", t.learning_rate},
              {"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"dpo_beta", t.dpo_beta},
              {"patience", t.patience},
              {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}}};
}

void read_model(Section& s, ModelConfig& m) {
  std::string arch(arch_name(m.dims.arch));
  s.get("arch", arch);
  m.dims.arch = parse_arch(arch);
  s.get("window", m.dims.window);
  s.get("hidden", m.dims.hidden);
  s.get("max_len", m.dims.max_len);
  s.get("init_scale", m.init_scale);
  if (m.dims.window < 1 || m.dims.hidden < 1 || m.dims.max_len < 8)
    throw ConfigError("model dimensions out of range");
}

json model_json(const ModelConfig& m) {
  return json{{"arch", arch_name(m.dims.arch)},
              {"window", m.dims.window},
              {"hidden", m.dims.hidden},
              {"max_len", m.dims.max_len},
              {"init_scale", m.init_scale}};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  Section root(j, "config");
  root.get("seed", c.seed);
  root.sub("paths", [&](Section& s) {
    std::string out = c.output_dir.string();
    s.get("output_dir", out);
    c.output_dir = resolve(base_dir, out);
    std::string test;
    s.get("test_instructions", test);
    if (!test.empty()) {
      c.test_instructions = resolve(base_dir, test);
      if (!std::filesystem::exists(*c.test_instructions))
        throw ConfigError("paths.test_instructions: " + c.test_instructions->string() +
                          " does not exist");
    }
  });
  root.sub("score", [&](Section& s) {
    s.get("alpha", c.score.alpha);
    s.get("lambda", c.score.lambda);
    s.get("gamma", c.score.gamma);
    if (!c.score.valid()) throw ConfigError("score parameters must be non-negative");
  });
  root.sub("env", [&](Section& s) { s.get("max_steps", c.max_steps); });
  if (c.max_steps < 1) throw ConfigError("env.max_steps must be >= 1");
  root.sub("instructions", [&](Section& s) {
    auto& i = c.instructions;
    s.get("train_count", i.train_count);
    s.get("variants_per", i.variants_per);
    s.get("s2_count", i.s2_count);
    s.get("s3_count", i.s3_count);
    s.get("test_count", i.test_count);
    s.get("target_min", i.target_min);
    s.get("target_max", i.target_max);
    if (i.train_count < 1 || i.s2_count < 1 || i.s3_count < 1 || i.test_count < 1 ||
        i.variants_per < 0 || i.target_min < 1 || i.target_max < i.target_min ||
        i.target_max > 40)
      throw ConfigError("instructions section out of range");
  });
  root.sub("rollout", [&](Section& s) {
    s.get("per_instruction", c.rollouts_per_instruction);
    s.get("epsilon", c.rollout.epsilon);
    s.get("refine_target", c.rollout.refine_target);
    if (c.rollouts_per_instruction < 1 || c.rollout.epsilon < 0.0 || c.rollout.epsilon > 1.0)
      throw ConfigError("rollout section out of range");
  });
  root.sub("thresholds", [&](Section& s) {
    s.get("tau1", c.thresholds.tau1);
    s.get("tau2", c.thresholds.tau2);
    s.get("tau3", c.thresholds.tau3);
    s.get("tau4", c.thresholds.tau4);
  });
  root.sub("curation", [&](Section& s) {
    auto& k = c.curation;
    s.get("traj_sft_draws", k.traj_sft_draws);
    s.get("dpo_samples", k.dpo_samples);
    s.get("dpo_pair_cap", k.dpo_pair_cap);
    s.get("disc_k", k.disc_k);
    s.get("proposal_temperature", k.proposal_temperature);
    if (k.traj_sft_draws < 1 || k.dpo_samples < 1 || k.dpo_pair_cap < 1 || k.disc_k < 2 ||
        !(k.proposal_temperature > 0.0))
      throw ConfigError("curation section out of range");
  });
  root.sub("orchestrator", [&](Section& s) { read_model(s, c.orchestrator); });
  root.sub("discriminator", [&](Section& s) { read_model(s, c.discriminator); });
  root.sub("training", [&](Section& s) {
    s.sub("s-sft", [&](Section& t) { read_train(t, c.training.s_sft); });
    s.sub("t-sft", [&](Section& t) { read_train(t, c.training.t_sft); });
    s.sub("s-dpo", [&](Section& t) { read_train(t, c.training.s_dpo); });
    s.sub("t-dpo", [&](Section& t) { read_train(t, c.training.t_dpo); });
    s.sub("disc-sft", [&](Section& t) { read_train(t, c.training.disc); });
  });
  root.sub("interleave", [&](Section& s) {
    auto& i = c.interleave;
    s.get("m", i.m);
    s.get("cycles", i.cycles);
    s.get("temperature", i.temperature);
    s.get("max_len", i.max_len);
    s.sub("disc-sft", [&](Section& t) { read_train(t, i.disc_train); });
    s.sub("t-dpo", [&](Section& t) { read_train(t, i.dpo_train); });
    if (i.m < 2 || i.cycles < 1 || !(i.temperature > 0.0) || i.max_len < 1)
      throw ConfigError("interleave section out of range");
  });
  root.sub("eval", [&](Section& s) {
    auto& e = c.eval;
    s.get("repeats", e.repeats);
    s.get("retries", e.infer.retries);
    s.get("temperature", e.infer.sample.temperature);
    s.get("greedy", e.infer.sample.greedy);
    s.get("max_len", e.infer.sample.max_len);
    s.get("best_of_m", e.infer.best_of_m);
    s.get("baseline_epsilon", e.baseline_epsilon);
    if (e.repeats < 1 || e.infer.retries < 0 || !(e.infer.sample.temperature > 0.0) ||
        e.infer.best_of_m < 1)
      throw ConfigError("eval section out of range");
  });
  root.sub("ablation", [&](Section& s) { s.get("seeds", c.ablation_seeds); });
  root.finish();

  c.interleave.max_steps = c.max_steps;
  c.eval.infer.max_steps = c.max_steps;
  c.interleave.disc_train.stage = Stage::DiscSft;
  c.interleave.dpo_train.stage = Stage::TrajDpo;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json(path), path.parent_path());
}

json run_config_to_json(const RunConfig& c) {
  json paths{{"output_dir", c.output_dir.string()}};
  if (c.test_instructions) paths["test_instructions"] = c.test_instructions->string();
  const auto& i = c.instructions;
  const auto& k = c.curation;
  const auto& e = c.eval;
  return json{
      {"seed", c.seed},
      {"paths", paths},
      {"score", {{"alpha", c.score.alpha}, {"lambda", c.score.lambda}, {"gamma", c.score.gamma}}},
      {"env", {{"max_steps", c.max_steps}}},
      {"instructions",
       {{"train_count", i.train_count},
        {"variants_per", i.variants_per},
        {"s2_count", i.s2_count},
        {"s3_count", i.s3_count},
        {"test_count", i.test_count},
        {"target_min", i.target_min},
        {"target_max", i.target_max}}},
      {"rollout",
       {{"per_instruction", c.rollouts_per_instruction},
        {"epsilon", c.rollout.epsilon},
        {"refine_target", c.rollout.refine_target}}},
      {"thresholds",
       {{"tau1", c.thresholds.tau1},
        {"tau2", c.thresholds.tau2},
        {"tau3", c.thresholds.tau3},
        {"tau4", c.thresholds.tau4}}},
      {"curation",
       {{"traj_sft_draws", k.traj_sft_draws},
        {"dpo_samples", k.dpo_samples},
        {"dpo_pair_cap", k.dpo_pair_cap},
        {"disc_k", k.disc_k},
        {"proposal_temperature", k.proposal_temperature}}},
      {"orchestrator", model_json(c.orchestrator)},
      {"discriminator", model_json(c.discriminator)},
      {"training",
       {{"s-sft", train_json(c.training.s_sft)},
        {"t-sft", train_json(c.training.t_sft)},
        {"s-dpo", train_json(c.training.s_dpo)},
        {"t-dpo", train_json(c.training.t_dpo)},
        {"disc-sft", train_json(c.training.disc)}}},
      {"interleave",
       {{"m", c.interleave.m},
        {"cycles", c.interleave.cycles},
        {"temperature", c.interleave.temperature},
        {"max_len", c.interleave.max_len},
        {"disc-sft", train_json(c.interleave.disc_train)},
        {"t-dpo", train_json(c.interleave.dpo_train)}}},
      {"eval",
       {{"repeats", e.repeats},
        {"retries", e.infer.retries},
        {"temperature", e.infer.sample.temperature},
        {"greedy", e.infer.sample.greedy},
        {"max_len", e.infer.sample.max_len},
        {"best_of_m", e.infer.best_of_m},
        {"baseline_epsilon", e.baseline_epsilon}}},
      {"ablation", {{"seeds", c.ablation_seeds}}},
  };
}

}  // namespace orchestra
