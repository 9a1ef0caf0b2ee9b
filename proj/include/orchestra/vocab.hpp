#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "orchestra/env.hpp"
#include "orchestra/scene.hpp"

namespace orchestra {

using TokenSeq = std::vector<int>;

namespace special {
inline constexpr const char* kSep = "<sep>";
inline constexpr const char* kHist = "<hist>";
inline constexpr const char* kBot = "<bot>";
inline constexpr const char* kEos = "<eos>";
}  // namespace special

std::string param_token(int value);

/// Bijection between tokens and ids covering instruction text, tool names,
/// parameter values, and the structural markers.
class Vocabulary {
 public:
  explicit Vocabulary(const Registry& registry);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<int> find(std::string_view token) const;
  /// Throws EncodingError for an unknown token.
  int id(std::string_view token) const;
  /// Throws EncodingError for an id outside [0, size()).
  const std::string& token(int id) const;

  int sep() const { return sep_; }
  int hist() const { return hist_; }
  int bot() const { return bot_; }
  int eos() const { return eos_; }

  /// Tool spec for a tool-name token, nullptr otherwise.
  const ToolSpec* tool(int id) const;
  std::optional<int> tool_token(std::string_view name) const;
  /// Parameter value of a parameter token.
  std::optional<int> param(int id) const;

  const std::vector<ToolSpec>& tool_list() const { return tools_; }

  /// Stable 64-bit FNV-1a hash of the ordered token list, as hex.
  std::string hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::vector<ToolSpec> tools_;
  std::vector<int> tool_of_;   // index into tools_ or -1
  std::vector<int> param_of_;  // parameter value or -1
  int sep_ = 0, hist_ = 0, bot_ = 0, eos_ = 0;
};

/// Instruction text followed by the tool list and the history delimiter:
///   <instr> ... <sep> tool_1 ... tool_n <sep> <hist> [history calls]
TokenSeq encode_context(const Vocabulary& vocab, const Instruction& instr,
                        std::span<const ToolCall> history = {});

TokenSeq encode_calls(const Vocabulary& vocab, std::span<const ToolCall> calls);

/// Calls followed by <eos>.
TokenSeq encode_trajectory(const Vocabulary& vocab, std::span<const ToolCall> calls);

/// Discriminator input: context, <bot>, then the candidate trajectory.
TokenSeq encode_candidate(const Vocabulary& vocab, std::span<const int> context,
                          std::span<const int> candidate);

struct DecodeError {
  std::size_t position = 0;
  std::string reason;
};

struct CallDecode {
  std::vector<ToolCall> calls;
  /// True when the sequence ended with <eos>.
  bool terminated = false;
  std::optional<DecodeError> error;

  bool ok() const { return !error.has_value(); }
};

/// Parses a run of call tokens, optionally ending in <eos>. Never throws;
/// malformed input is reported with the failing position.
CallDecode decode_calls(const Vocabulary& vocab, std::span<const int> tokens);

struct DecodedContext {
  InstructionFields fields;
  std::vector<ToolCall> history;
};

/// Inverse of encode_context. Throws EncodingError naming the position.
DecodedContext decode_context(const Vocabulary& vocab, std::span<const int> tokens);

std::vector<std::string> to_strings(const Vocabulary& vocab, std::span<const int> tokens);
TokenSeq from_strings(const Vocabulary& vocab, std::span<const std::string> tokens);

}  // namespace orchestra
