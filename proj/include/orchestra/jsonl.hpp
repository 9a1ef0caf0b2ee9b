#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "orchestra/curation.hpp"
#include "orchestra/disc.hpp"
#include "orchestra/env.hpp"
#include "orchestra/training.hpp"

namespace orchestra {

using json = nlohmann::json;

inline constexpr int kExampleSchemaVersion = 1;
inline constexpr int kCheckpointVersion = 1;

void to_json(json& j, const ToolCall& call);
void from_json(const json& j, ToolCall& call);
void to_json(json& j, const SceneState& s);
void from_json(const json& j, SceneState& s);
void to_json(json& j, const QualityBreakdown& q);
void from_json(const json& j, QualityBreakdown& q);
void to_json(json& j, const ToolSpec& spec);
void from_json(const json& j, ToolSpec& spec);
void to_json(json& j, const Instruction& instr);
/// Rejects instructions whose text does not decode to their fields.
void from_json(const json& j, Instruction& instr);
void to_json(json& j, const Rollout& r);
/// Recomputes nothing; the caller decides whether to re-check scores.
void from_json(const json& j, Rollout& r);
void to_json(json& j, const TrainReport& report);

json registry_to_json(const Registry& registry);
Registry registry_from_json(const json& j);

json example_to_json(const Vocabulary& vocab, const SftExample& ex);
json example_to_json(const Vocabulary& vocab, const DpoTriplet& ex);
json example_to_json(const Vocabulary& vocab, const DiscExample& ex);
SftExample sft_from_json(const Vocabulary& vocab, const json& j);
DpoTriplet dpo_from_json(const Vocabulary& vocab, const json& j);
DiscExample disc_example_from_json(const Vocabulary& vocab, const json& j);

json checkpoint_to_json(const PolicyModel& model);
/// Throws ValidationError when the vocabulary hash or parameter shapes differ.
PolicyModel policy_from_json(const json& j, const Vocabulary& vocab);
json checkpoint_to_json(const DiscScorer& scorer);
DiscScorer disc_from_json(const json& j, const Vocabulary& vocab);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const json> rows);
std::vector<json> read_jsonl(const std::filesystem::path& path);

template <typename T>
std::vector<json> to_rows(std::span<const T> items) {
  std::vector<json> rows;
  rows.reserve(items.size());
  for (const auto& x : items) rows.emplace_back(x);
  return rows;
}

template <typename T>
std::vector<json> to_rows(const Vocabulary& vocab, std::span<const T> items) {
  std::vector<json> rows;
  rows.reserve(items.size());
  for (const auto& x : items) rows.push_back(example_to_json(vocab, x));
  return rows;
}

std::vector<Instruction> load_instructions(const std::filesystem::path& path);
std::vector<Rollout> load_rollouts(const std::filesystem::path& path);
/// Example file read as the dataset type of `stage`; an example of another
/// type is a stage/dataset mismatch (ValidationError).
Dataset load_dataset(const std::filesystem::path& path, const Vocabulary& vocab, Stage stage);

void save_policy(const std::filesystem::path& path, const PolicyModel& model);
PolicyModel load_policy(const std::filesystem::path& path, const Vocabulary& vocab);
void save_disc(const std::filesystem::path& path, const DiscScorer& scorer);
DiscScorer load_disc(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace orchestra
