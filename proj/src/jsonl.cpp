#include "orchestra/jsonl.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "orchestra/errors.hpp"
#include "orchestra/instruction.hpp"

namespace orchestra {

void to_json(json& j, const ToolCall& call) {
  j = json{{"tool", call.tool}};
  if (call.param) j["param"] = *call.param;
}

void from_json(const json& j, ToolCall& call) {
  call.tool = j.at("tool").get<std::string>();
  call.param.reset();
  if (j.contains("param") && !j.at("param").is_null()) call.param = j.at("param").get<int>();
}

void to_json(json& j, const SceneState& s) {
  j = json{{"n_obj", s.n_obj},       {"n_oob", s.n_oob},       {"n_col", s.n_col},
           {"vis_real", s.vis_real}, {"vis_func", s.vis_func}, {"vis_lay", s.vis_lay}};
}

void from_json(const json& j, SceneState& s) {
  s.n_obj = j.at("n_obj").get<int>();
  s.n_oob = j.at("n_oob").get<int>();
  s.n_col = j.at("n_col").get<int>();
  s.vis_real = j.at("vis_real").get<double>();
  s.vis_func = j.at("vis_func").get<double>();
  s.vis_lay = j.at("vis_lay").get<double>();
}

void to_json(json& j, const QualityBreakdown& q) {
  j = json{{"q_phy", q.q_phy}, {"q_vis", q.q_vis}, {"s_comp", q.s_comp}, {"q_total", q.q_total}};
}

void from_json(const json& j, QualityBreakdown& q) {
  q.q_phy = j.at("q_phy").get<double>();
  q.q_vis = j.at("q_vis").get<double>();
  q.s_comp = j.at("s_comp").get<double>();
  q.q_total = j.at("q_total").get<double>();
}

namespace {

std::string_view cost_unit_name(CostUnit u) {
  switch (u) {
    case CostUnit::None: return "none";
    case CostUnit::Param: return "param";
    case CostUnit::Collisions: return "n_col";
    case CostUnit::OutOfBounds: return "n_oob";
  }
  return "none";
}

CostUnit parse_cost_unit(std::string_view s) {
  for (CostUnit u : {CostUnit::None, CostUnit::Param, CostUnit::Collisions, CostUnit::OutOfBounds})
    if (cost_unit_name(u) == s) return u;
  throw ValidationError("unknown cost unit: " + std::string(s));
}

}  // namespace

void to_json(json& j, const ToolSpec& spec) {
  j = json{{"name", spec.name},
           {"param_arity", spec.param_arity},
           {"cost_base", spec.cost_base},
           {"cost_per_unit", spec.cost_per_unit},
           {"cost_unit", cost_unit_name(spec.cost_unit)}};
  if (spec.param_arity == 1) j["param_range"] = {spec.param_min, spec.param_max};
}

void from_json(const json& j, ToolSpec& spec) {
  spec.name = j.at("name").get<std::string>();
  spec.param_arity = j.at("param_arity").get<int>();
  spec.cost_base = j.at("cost_base").get<double>();
  spec.cost_per_unit = j.at("cost_per_unit").get<double>();
  spec.cost_unit = parse_cost_unit(j.at("cost_unit").get<std::string>());
  if (spec.param_arity == 1) {
    spec.param_min = j.at("param_range").at(0).get<int>();
    spec.param_max = j.at("param_range").at(1).get<int>();
  }
}

void to_json(json& j, const Instruction& instr) {
  j = json{{"id", instr.id},
           {"room_type", instr.room_type},
           {"target_object_count", instr.target_object_count},
           {"emphasis",
            {{"real", instr.emphasis.real}, {"func", instr.emphasis.func}, {"lay", instr.emphasis.lay}}},
           {"text_tokens", instr.text_tokens}};
}

void from_json(const json& j, Instruction& instr) {
  instr.id = j.at("id").get<std::string>();
  instr.room_type = j.at("room_type").get<std::string>();
  instr.target_object_count = j.at("target_object_count").get<int>();
  const json& e = j.at("emphasis");
  instr.emphasis.real = e.at("real").get<double>();
  instr.emphasis.func = e.at("func").get<double>();
  instr.emphasis.lay = e.at("lay").get<double>();
  instr.text_tokens = j.at("text_tokens").get<std::vector<std::string>>();
  validate_instruction(instr);
}

void to_json(json& j, const Rollout& r) {
  json per_step = json::array();
  for (const auto& s : r.steps)
    per_step.push_back({{"state", s.post_state}, {"Q", s.q}, {"T", s.t_cum}, {"C", s.c}});
  json flags{{"valid", r.flags.valid}, {"stopped", r.flags.stopped}};
  flags["failure_step"] = r.flags.failure_step ? json(*r.flags.failure_step) : json(nullptr);
  if (!r.flags.failure_reason.empty()) flags["failure_reason"] = r.flags.failure_reason;
  j = json{{"instr_id", r.instr_id}, {"seed", r.seed},       {"replicate", r.replicate},
           {"calls", r.calls()},     {"per_step", per_step}, {"flags", flags}};
}

void from_json(const json& j, Rollout& r) {
  r.instr_id = j.at("instr_id").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.replicate = j.at("replicate").get<int>();
  const auto calls = j.at("calls").get<std::vector<ToolCall>>();
  const json& per_step = j.at("per_step");
  if (calls.size() != per_step.size())
    throw ValidationError("rollout " + r.instr_id + ": calls and per_step differ in length");
  r.steps.clear();
  for (std::size_t i = 0; i < calls.size(); ++i) {
    RolloutStep s;
    s.call = calls[i];
    s.post_state = per_step[i].at("state").get<SceneState>();
    s.q = per_step[i].at("Q").get<QualityBreakdown>();
    s.t_cum = per_step[i].at("T").get<double>();
    s.c = per_step[i].at("C").get<double>();
    r.steps.push_back(std::move(s));
  }
  const json& f = j.at("flags");
  r.flags.valid = f.at("valid").get<bool>();
  r.flags.stopped = f.value("stopped", false);
  r.flags.failure_step.reset();
  if (f.contains("failure_step") && !f.at("failure_step").is_null())
    r.flags.failure_step = f.at("failure_step").get<int>();
  r.flags.failure_reason = f.value("failure_reason", std::string());
}

void to_json(json& j, const TrainReport& report) {
  j = json{{"stage", stage_name(report.stage)},
           {"loss_curve", report.loss_curve},
           {"initial_loss", report.initial_loss},
           {"final_loss", report.final_loss},
           {"examples", report.examples},
           {"epochs_run", report.epochs_run},
           {"early_stopped", report.early_stopped},
           {"checkpoint", report.checkpoint_path}};
}

json registry_to_json(const Registry& registry) { return json{{"tools", registry.specs()}}; }

Registry registry_from_json(const json& j) {
  return Registry(j.at("tools").get<std::vector<ToolSpec>>());
}

namespace {

json tokens_json(const Vocabulary& vocab, std::span<const int> tokens) {
  return to_strings(vocab, tokens);
}

TokenSeq tokens_from(const Vocabulary& vocab, const json& j) {
  const auto strings = j.get<std::vector<std::string>>();
  return from_strings(vocab, strings);
}

json header(std::string_view type) {
  return json{{"schema_version", kExampleSchemaVersion}, {"type", type}};
}

void check_header(const json& j, std::string_view type) {
  if (j.value("schema_version", -1) != kExampleSchemaVersion)
    throw ValidationError("unsupported example schema_version");
  const std::string got = j.value("type", std::string());
  if (got != type) throw ValidationError("expected a " + std::string(type) + " example, got " + got);
}

json gap_json(double gap) {
  if (std::isinf(gap)) return gap > 0 ? "inf" : "-inf";
  return gap;
}

double gap_from(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ValidationError("bad score_gap: " + s);
  }
  return j.get<double>();
}

}  // namespace

json example_to_json(const Vocabulary& vocab, const SftExample& ex) {
  json j = header("sft");
  j["kind"] = kind_name(ex.kind);
  j["instr_id"] = ex.instr_id;
  j["replicate"] = ex.replicate;
  j["step"] = ex.step;
  j["context"] = tokens_json(vocab, ex.context);
  j["target"] = tokens_json(vocab, ex.target);
  return j;
}

json example_to_json(const Vocabulary& vocab, const DpoTriplet& ex) {
  json j = header("dpo");
  j["kind"] = kind_name(ex.kind);
  j["instr_id"] = ex.instr_id;
  j["score_gap"] = gap_json(ex.score_gap);
  j["context"] = tokens_json(vocab, ex.context);
  j["chosen"] = tokens_json(vocab, ex.chosen);
  j["rejected"] = tokens_json(vocab, ex.rejected);
  return j;
}

json example_to_json(const Vocabulary& vocab, const DiscExample& ex) {
  json j = header("disc");
  j["instr_id"] = ex.instr_id;
  j["label"] = ex.label;
  j["candidate_c"] = ex.candidate_c;
  j["candidate_t"] = ex.candidate_t;
  j["context"] = tokens_json(vocab, ex.context);
  json cands = json::array();
  for (const auto& c : ex.candidates) cands.push_back(tokens_json(vocab, c));
  j["candidates"] = std::move(cands);
  return j;
}

SftExample sft_from_json(const Vocabulary& vocab, const json& j) {
  check_header(j, "sft");
  SftExample ex;
  ex.kind = parse_kind(j.at("kind").get<std::string>());
  ex.instr_id = j.at("instr_id").get<std::string>();
  ex.replicate = j.at("replicate").get<int>();
  ex.step = j.at("step").get<int>();
  ex.context = tokens_from(vocab, j.at("context"));
  ex.target = tokens_from(vocab, j.at("target"));
  if (ex.target.empty()) throw ValidationError("SFT example with empty target");
  return ex;
}

DpoTriplet dpo_from_json(const Vocabulary& vocab, const json& j) {
  check_header(j, "dpo");
  DpoTriplet ex;
  ex.kind = parse_kind(j.at("kind").get<std::string>());
  ex.instr_id = j.at("instr_id").get<std::string>();
  ex.score_gap = gap_from(j.at("score_gap"));
  ex.context = tokens_from(vocab, j.at("context"));
  ex.chosen = tokens_from(vocab, j.at("chosen"));
  ex.rejected = tokens_from(vocab, j.at("rejected"));
  if (ex.chosen == ex.rejected) throw ValidationError("DPO triplet with chosen == rejected");
  return ex;
}

DiscExample disc_example_from_json(const Vocabulary& vocab, const json& j) {
  check_header(j, "disc");
  DiscExample ex;
  ex.instr_id = j.at("instr_id").get<std::string>();
  ex.label = j.at("label").get<int>();
  ex.candidate_c = j.at("candidate_c").get<std::vector<double>>();
  ex.candidate_t = j.at("candidate_t").get<std::vector<double>>();
  ex.context = tokens_from(vocab, j.at("context"));
  for (const auto& c : j.at("candidates")) ex.candidates.push_back(tokens_from(vocab, c));
  if (ex.candidates.size() < 2 || ex.label < 0 ||
      static_cast<std::size_t>(ex.label) >= ex.candidates.size())
    throw ValidationError("discriminator example with bad label or fewer than 2 candidates");
  return ex;
}

namespace {

json model_json(const SequenceModel& net) {
  const ModelDims& d = net.dims();
  json params = json::object();
  const auto p = net.params();
  for (const auto& block : net.layout())
    params[block.name] = std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(block.offset),
                                             p.begin() + static_cast<std::ptrdiff_t>(block.offset + block.size));
  return json{{"arch", arch_name(d.arch)},
              {"dims",
               {{"vocab_size", d.vocab_size},
                {"window", d.window},
                {"hidden", d.hidden},
                {"max_len", d.max_len}}},
              {"params", std::move(params)}};
}

std::unique_ptr<SequenceModel> model_from(const json& j) {
  ModelDims d;
  d.arch = parse_arch(j.at("arch").get<std::string>());
  const json& dims = j.at("dims");
  d.vocab_size = dims.at("vocab_size").get<int>();
  d.window = dims.at("window").get<int>();
  d.hidden = dims.at("hidden").get<int>();
  d.max_len = dims.at("max_len").get<int>();
  auto net = make_model(d, Init::Zero, 0);
  auto p = net->params();
  const json& params = j.at("params");
  if (params.size() != net->layout().size()) throw ValidationError("checkpoint block count mismatch");
  for (const auto& block : net->layout()) {
    const auto values = params.at(block.name).get<std::vector<double>>();
    if (values.size() != block.size)
      throw ValidationError("checkpoint block " + block.name + " has the wrong size");
    std::copy(values.begin(), values.end(), p.begin() + static_cast<std::ptrdiff_t>(block.offset));
  }
  return net;
}

PolicyModel policy_part(const json& j, const Vocabulary& vocab) {
  if (j.at("format").get<std::string>() != "orchestra-checkpoint")
    throw ValidationError("not a checkpoint file");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version");
  const auto hash = j.at("vocab_hash").get<std::string>();
  if (hash != vocab.hash())
    throw ValidationError("checkpoint vocabulary hash " + hash + " does not match " + vocab.hash());
  auto net = model_from(j.at("model"));
  if (net->vocab_size() != vocab.size())
    throw ValidationError("checkpoint vocabulary size does not match");
  PolicyModel model(std::move(net), hash);
  for (const auto& s : j.at("provenance")) model.add_provenance(s.get<std::string>());
  return model;
}

json checkpoint_header(const PolicyModel& model, std::string_view kind) {
  return json{{"format", "orchestra-checkpoint"},
              {"version", kCheckpointVersion},
              {"kind", kind},
              {"vocab_hash", model.vocab_hash()},
              {"provenance", model.provenance()},
              {"model", model_json(model.net())}};
}

}  // namespace

json checkpoint_to_json(const PolicyModel& model) { return checkpoint_header(model, "orchestrator"); }

PolicyModel policy_from_json(const json& j, const Vocabulary& vocab) {
  if (j.at("kind").get<std::string>() != "orchestrator")
    throw ValidationError("checkpoint is not an orchestrator");
  return policy_part(j, vocab);
}

json checkpoint_to_json(const DiscScorer& scorer) {
  json j = checkpoint_header(scorer.backbone(), "discriminator");
  j["bot_token"] = scorer.bot_token();
  j["head"] = std::vector<double>(scorer.head().begin(), scorer.head().end());
  return j;
}

DiscScorer disc_from_json(const json& j, const Vocabulary& vocab) {
  if (j.at("kind").get<std::string>() != "discriminator")
    throw ValidationError("checkpoint is not a discriminator");
  PolicyModel backbone = policy_part(j, vocab);
  const std::size_t expected = backbone.net().feature_dim() + 1;
  auto head = j.at("head").get<std::vector<double>>();
  if (head.size() != expected) throw ValidationError("discriminator head has the wrong size");
  return DiscScorer(std::move(backbone), j.at("bot_token").get<int>(), std::move(head));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_jsonl(const std::filesystem::path& path, std::span<const json> rows) {
  std::string text;
  for (const auto& r : rows) {
    text += r.dump();
    text += '\n';
  }
  write_text(path, text);
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<json> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<Instruction> load_instructions(const std::filesystem::path& path) {
  std::vector<Instruction> out;
  for (const auto& row : read_jsonl(path)) out.push_back(row.get<Instruction>());
  return out;
}

std::vector<Rollout> load_rollouts(const std::filesystem::path& path) {
  std::vector<Rollout> out;
  for (const auto& row : read_jsonl(path)) out.push_back(row.get<Rollout>());
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const Vocabulary& vocab, Stage stage) {
  const auto rows = read_jsonl(path);
  switch (stage) {
    case Stage::StepSft:
    case Stage::TrajSft: {
      std::vector<SftExample> out;
      for (const auto& r : rows) out.push_back(sft_from_json(vocab, r));
      return out;
    }
    case Stage::StepDpo:
    case Stage::TrajDpo:
    case Stage::Interleave: {
      std::vector<DpoTriplet> out;
      for (const auto& r : rows) out.push_back(dpo_from_json(vocab, r));
      return out;
    }
    case Stage::DiscSft: {
      std::vector<DiscExample> out;
      for (const auto& r : rows) out.push_back(disc_example_from_json(vocab, r));
      return out;
    }
  }
  throw ValidationError("unknown stage");
}

void save_policy(const std::filesystem::path& path, const PolicyModel& model) {
  write_json(path, checkpoint_to_json(model));
}

PolicyModel load_policy(const std::filesystem::path& path, const Vocabulary& vocab) {
  return policy_from_json(read_json(path), vocab);
}

void save_disc(const std::filesystem::path& path, const DiscScorer& scorer) {
  write_json(path, checkpoint_to_json(scorer));
}

DiscScorer load_disc(const std::filesystem::path& path, const Vocabulary& vocab) {
  return disc_from_json(read_json(path), vocab);
}

}  // namespace orchestra
