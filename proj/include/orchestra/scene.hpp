#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace orchestra {

/// The three stored visual dimensions. Completeness is derived, never stored.
enum class VisualDim { Real = 0, Func = 1, Lay = 2 };

inline constexpr std::array<VisualDim, 3> kVisualDims{VisualDim::Real, VisualDim::Func,
                                                      VisualDim::Lay};

std::string_view visual_dim_name(VisualDim d);

/// Abstract scene metrics mutated by tools.
struct SceneState {
  int n_obj = 0;
  int n_oob = 0;
  int n_col = 0;
  double vis_real = 0.0;
  double vis_func = 0.0;
  double vis_lay = 0.0;

  double vis(VisualDim d) const;
  double& vis(VisualDim d);

  bool valid() const;

  friend bool operator==(const SceneState&, const SceneState&) = default;
};

/// Emphasis weights are restricted to a five-level grid so that an
/// instruction's token text can be decoded back to its fields exactly.
inline constexpr std::array<double, 5> kEmphasisLevels{0.0, 0.25, 0.5, 0.75, 1.0};

struct Emphasis {
  double real = 0.5;
  double func = 0.5;
  double lay = 0.5;

  double get(VisualDim d) const;
  friend bool operator==(const Emphasis&, const Emphasis&) = default;
};

/// Structured payload of an instruction; what its text encodes.
struct InstructionFields {
  std::string room_type;
  int target_object_count = 1;
  Emphasis emphasis;

  friend bool operator==(const InstructionFields&, const InstructionFields&) = default;
};

struct Instruction {
  std::string id;
  std::string room_type;
  int target_object_count = 1;
  Emphasis emphasis;
  std::vector<std::string> text_tokens;

  InstructionFields fields() const { return {room_type, target_object_count, emphasis}; }
};

}  // namespace orchestra
