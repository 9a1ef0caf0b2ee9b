#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orchestra/scene.hpp"

namespace orchestra {

/// Room types never used for training instructions.
const std::vector<std::string>& unseen_room_types();
/// Room types used for training and, with different instructions, for testing.
const std::vector<std::string>& seen_room_types();
/// Room types used only for training.
const std::vector<std::string>& train_only_room_types();
/// All room types, in the canonical order used by the vocabulary.
const std::vector<std::string>& room_catalog();

inline constexpr int kMaxTargetCount = 40;

namespace lexicon {
inline constexpr const char* kInstrBegin = "<instr>";
inline constexpr std::array<const char*, 3> kDeterminers{"a", "one", "the"};
inline constexpr std::array<const char*, 3> kCountVerbs{"with", "containing", "holding"};
inline constexpr std::array<const char*, 3> kNouns{"objects", "items", "pieces"};
inline constexpr std::array<const char*, 3> kEmphasisVerbs{"stress", "focus", "favor"};

std::string room_token(const std::string& room);
std::string count_token(int count);
std::string dim_token(VisualDim d);
std::string level_token(double level);

/// Every instruction-text token, in canonical order.
std::vector<std::string> all_tokens();
}  // namespace lexicon

/// Surface realisation choices for an instruction text: which synonym is used
/// for each word slot, and the order of the five clauses (room, count, and one
/// emphasis clause per visual dimension).
struct TextStyle {
  std::array<int, 4> synonyms{0, 0, 0, 0};
  std::array<int, 5> clause_order{0, 1, 2, 3, 4};

  friend bool operator==(const TextStyle&, const TextStyle&) = default;
};

std::vector<std::string> render_text(const InstructionFields& fields, const TextStyle& style = {});

/// Inverse of render_text for any style. Throws EncodingError naming the
/// offending position.
InstructionFields parse_text(std::span<const std::string> tokens);

Instruction make_instruction(std::string id, const InstructionFields& fields,
                             const TextStyle& style = {});

/// Throws ValidationError when an instruction violates its invariants.
void validate_instruction(const Instruction& instr);

struct InstructionSetSpec {
  std::string id_prefix = "instr";
  std::vector<std::string> rooms;
  int count = 10;
  int target_min = 4;
  int target_max = 24;
};

/// Deterministic synthetic instructions; rooms are assigned round-robin.
std::vector<Instruction> generate_instructions(const InstructionSetSpec& spec, std::uint64_t seed);

/// A style distinct from the canonical one and from every style already in
/// `taken`, chosen deterministically from (id, variant).
TextStyle variant_style(const std::string& id, int variant, std::span<const TextStyle> taken);

}  // namespace orchestra
