#include "orchestra/instruction.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>

#include "orchestra/errors.hpp"
#include "orchestra/rng.hpp"

namespace orchestra {

const std::vector<std::string>& unseen_room_types() {
  static const std::vector<std::string> rooms{"bedroom", "living_room", "kitchen", "gym",
                                              "restaurant"};
  return rooms;
}

const std::vector<std::string>& seen_room_types() {
  static const std::vector<std::string> rooms{"bathroom", "children_room", "meeting_room",
                                              "office", "waiting_room"};
  return rooms;
}

const std::vector<std::string>& train_only_room_types() {
  static const std::vector<std::string> rooms{"library", "classroom", "studio", "lobby",
                                              "game_room"};
  return rooms;
}

const std::vector<std::string>& room_catalog() {
  static const std::vector<std::string> rooms = [] {
    std::vector<std::string> all;
    for (const auto* group : {&unseen_room_types(), &seen_room_types(), &train_only_room_types()})
      all.insert(all.end(), group->begin(), group->end());
    return all;
  }();
  return rooms;
}

namespace {

constexpr std::array<const char*, 5> kLevelNames{"0", "0.25", "0.5", "0.75", "1"};

int level_index(double level) {
  for (std::size_t i = 0; i < kEmphasisLevels.size(); ++i)
    if (kEmphasisLevels[i] == level) return static_cast<int>(i);
  return -1;
}

enum Slot { kDet = 0, kCountVerb = 1, kNoun = 2, kEmphVerb = 3 };

template <std::size_t N>
int find_word(const std::array<const char*, N>& words, const std::string& token) {
  for (std::size_t i = 0; i < N; ++i)
    if (token == words[i]) return static_cast<int>(i);
  return -1;
}

[[noreturn]] void parse_fail(std::size_t pos, const std::string& what) {
  throw EncodingError("instruction text position " + std::to_string(pos) + ": " + what);
}

}  // namespace

namespace lexicon {

std::string room_token(const std::string& room) { return "room:" + room; }
std::string count_token(int count) { return "count:" + std::to_string(count); }
std::string dim_token(VisualDim d) { return "dim:" + std::string(visual_dim_name(d)); }

std::string level_token(double level) {
  const int idx = level_index(level);
  if (idx < 0) throw EncodingError("emphasis weight off the level grid: " + std::to_string(level));
  return std::string("level:") + kLevelNames[static_cast<std::size_t>(idx)];
}

std::vector<std::string> all_tokens() {
  std::vector<std::string> out{kInstrBegin};
  for (auto* w : kDeterminers) out.emplace_back(w);
  for (const auto& r : room_catalog()) out.push_back(room_token(r));
  for (auto* w : kCountVerbs) out.emplace_back(w);
  for (int c = 1; c <= kMaxTargetCount; ++c) out.push_back(count_token(c));
  for (auto* w : kNouns) out.emplace_back(w);
  for (auto* w : kEmphasisVerbs) out.emplace_back(w);
  for (auto d : kVisualDims) out.push_back(dim_token(d));
  for (double l : kEmphasisLevels) out.push_back(level_token(l));
  return out;
}

}  // namespace lexicon

std::vector<std::string> render_text(const InstructionFields& fields, const TextStyle& style) {
  using namespace lexicon;
  if (fields.target_object_count < 1 || fields.target_object_count > kMaxTargetCount)
    throw EncodingError("target_object_count outside the vocabulary range: " +
                        std::to_string(fields.target_object_count));
  if (std::find(room_catalog().begin(), room_catalog().end(), fields.room_type) ==
      room_catalog().end())
    throw EncodingError("room_type not in catalog: " + fields.room_type);

  std::vector<std::string> out{kInstrBegin};
  for (int clause : style.clause_order) {
    switch (clause) {
      case 0:
        out.emplace_back(kDeterminers.at(static_cast<std::size_t>(style.synonyms[kDet])));
        out.push_back(room_token(fields.room_type));
        break;
      case 1:
        out.emplace_back(kCountVerbs.at(static_cast<std::size_t>(style.synonyms[kCountVerb])));
        out.push_back(count_token(fields.target_object_count));
        out.emplace_back(kNouns.at(static_cast<std::size_t>(style.synonyms[kNoun])));
        break;
      default: {
        const VisualDim d = kVisualDims.at(static_cast<std::size_t>(clause - 2));
        out.emplace_back(kEmphasisVerbs.at(static_cast<std::size_t>(style.synonyms[kEmphVerb])));
        out.push_back(dim_token(d));
        out.push_back(level_token(fields.emphasis.get(d)));
        break;
      }
    }
  }
  return out;
}

InstructionFields parse_text(std::span<const std::string> tokens) {
  using namespace lexicon;
  if (tokens.empty() || tokens[0] != kInstrBegin) parse_fail(0, "expected <instr>");
  InstructionFields f;
  std::array<bool, 5> seen{};
  auto mark = [&](int clause, std::size_t pos) {
    if (seen[static_cast<std::size_t>(clause)]) parse_fail(pos, "repeated clause");
    seen[static_cast<std::size_t>(clause)] = true;
  };
  auto need = [&](std::size_t pos) -> const std::string& {
    if (pos >= tokens.size()) parse_fail(pos, "truncated clause");
    return tokens[pos];
  };
  std::size_t i = 1;
  while (i < tokens.size()) {
    const std::string& head = tokens[i];
    if (find_word(kDeterminers, head) >= 0) {
      mark(0, i);
      const std::string& room = need(i + 1);
      if (room.rfind("room:", 0) != 0) parse_fail(i + 1, "expected room token");
      f.room_type = room.substr(5);
      if (std::find(room_catalog().begin(), room_catalog().end(), f.room_type) ==
          room_catalog().end())
        parse_fail(i + 1, "unknown room " + f.room_type);
      i += 2;
    } else if (find_word(kCountVerbs, head) >= 0) {
      mark(1, i);
      const std::string& count = need(i + 1);
      if (count.rfind("count:", 0) != 0) parse_fail(i + 1, "expected count token");
      const std::string digits = count.substr(6);
      int value = 0;
      auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
      if (ec != std::errc{} || end != digits.data() + digits.size() || value < 1)
        parse_fail(i + 1, "malformed count token");
      f.target_object_count = value;
      if (find_word(kNouns, need(i + 2)) < 0) parse_fail(i + 2, "expected noun");
      i += 3;
    } else if (find_word(kEmphasisVerbs, head) >= 0) {
      const std::string& dim = need(i + 1);
      int d = -1;
      for (auto vd : kVisualDims)
        if (dim == dim_token(vd)) d = static_cast<int>(vd);
      if (d < 0) parse_fail(i + 1, "expected dimension token");
      mark(2 + d, i);
      const std::string& level = need(i + 2);
      int li = -1;
      for (std::size_t k = 0; k < kLevelNames.size(); ++k)
        if (level == std::string("level:") + kLevelNames[k]) li = static_cast<int>(k);
      if (li < 0) parse_fail(i + 2, "expected level token");
      const double w = kEmphasisLevels[static_cast<std::size_t>(li)];
      switch (static_cast<VisualDim>(d)) {
        case VisualDim::Real: f.emphasis.real = w; break;
        case VisualDim::Func: f.emphasis.func = w; break;
        case VisualDim::Lay: f.emphasis.lay = w; break;
      }
      i += 3;
    } else {
      parse_fail(i, "unexpected token '" + head + "'");
    }
  }
  for (std::size_t c = 0; c < seen.size(); ++c)
    if (!seen[c]) parse_fail(tokens.size(), "missing clause " + std::to_string(c));
  return f;
}

Instruction make_instruction(std::string id, const InstructionFields& fields,
                             const TextStyle& style) {
  Instruction instr;
  instr.id = std::move(id);
  instr.room_type = fields.room_type;
  instr.target_object_count = fields.target_object_count;
  instr.emphasis = fields.emphasis;
  instr.text_tokens = render_text(fields, style);
  return instr;
}

void validate_instruction(const Instruction& instr) {
  if (instr.id.empty()) throw ValidationError("instruction without id");
  if (instr.target_object_count < 1)
    throw ValidationError("instruction " + instr.id + ": target_object_count < 1");
  for (auto d : kVisualDims) {
    const double w = instr.emphasis.get(d);
    if (w < 0.0 || w > 1.0) throw ValidationError("instruction " + instr.id + ": emphasis out of [0,1]");
  }
  if (parse_text(instr.text_tokens) != instr.fields())
    throw ValidationError("instruction " + instr.id + ": text does not match its fields");
}

std::vector<Instruction> generate_instructions(const InstructionSetSpec& spec, std::uint64_t seed) {
  if (spec.rooms.empty()) throw ValidationError("generate_instructions: no rooms");
  if (spec.target_min < 1 || spec.target_max < spec.target_min || spec.target_max > kMaxTargetCount)
    throw ValidationError("generate_instructions: bad target range");
  Rng rng(derive_seed(seed, "instructions:" + spec.id_prefix));
  std::vector<Instruction> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  const int width = std::max<int>(3, static_cast<int>(std::to_string(spec.count).size()));
  for (int i = 0; i < spec.count; ++i) {
    InstructionFields f;
    f.room_type = spec.rooms[static_cast<std::size_t>(i) % spec.rooms.size()];
    f.target_object_count = static_cast<int>(rng.uniform_int(spec.target_min, spec.target_max));
    f.emphasis.real = kEmphasisLevels[rng.index(kEmphasisLevels.size())];
    f.emphasis.func = kEmphasisLevels[rng.index(kEmphasisLevels.size())];
    f.emphasis.lay = kEmphasisLevels[rng.index(kEmphasisLevels.size())];
    std::string num = std::to_string(i);
    num.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0');
    out.push_back(make_instruction(spec.id_prefix + "-" + num, f));
  }
  return out;
}

TextStyle variant_style(const std::string& id, int variant, std::span<const TextStyle> taken) {
  Rng rng(derive_seed(0x5eed, "variant:" + id, static_cast<std::uint64_t>(variant)));
  const TextStyle canonical{};
  for (;;) {
    TextStyle s;
    for (auto& syn : s.synonyms) syn = static_cast<int>(rng.index(3));
    std::iota(s.clause_order.begin(), s.clause_order.end(), 0);
    for (std::size_t i = s.clause_order.size(); i > 1; --i)
      std::swap(s.clause_order[i - 1], s.clause_order[rng.index(i)]);
    if (s == canonical) continue;
    if (std::find(taken.begin(), taken.end(), s) != taken.end()) continue;
    return s;
  }
}

}  // namespace orchestra
