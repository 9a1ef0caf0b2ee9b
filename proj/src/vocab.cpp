#include "orchestra/vocab.hpp"

#include <algorithm>
#include <cstdio>

#include "orchestra/errors.hpp"
#include "orchestra/instruction.hpp"
#include "orchestra/rng.hpp"

namespace orchestra {

std::string param_token(int value) { return "n=" + std::to_string(value); }

Vocabulary::Vocabulary(const Registry& registry) : tools_(registry.specs()) {
  auto add = [&](const std::string& tok) {
    if (index_.count(tok)) throw EncodingError("duplicate token " + tok);
    index_.emplace(tok, static_cast<int>(tokens_.size()));
    tokens_.push_back(tok);
    tool_of_.push_back(-1);
    param_of_.push_back(-1);
    return static_cast<int>(tokens_.size()) - 1;
  };
  sep_ = add(special::kSep);
  hist_ = add(special::kHist);
  bot_ = add(special::kBot);
  eos_ = add(special::kEos);
  for (const auto& t : lexicon::all_tokens()) add(t);
  for (std::size_t i = 0; i < tools_.size(); ++i) {
    const int id = add(tools_[i].name);
    tool_of_[static_cast<std::size_t>(id)] = static_cast<int>(i);
  }
  int lo = 0, hi = -1;
  for (const auto& t : tools_) {
    if (t.param_arity != 1) continue;
    if (hi < lo) {
      lo = t.param_min;
      hi = t.param_max;
    } else {
      lo = std::min(lo, t.param_min);
      hi = std::max(hi, t.param_max);
    }
  }
  for (int v = lo; v <= hi; ++v) {
    const int id = add(param_token(v));
    param_of_[static_cast<std::size_t>(id)] = v;
  }
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw EncodingError("token not in vocabulary: " + std::string(token));
  return *found;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw EncodingError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

const ToolSpec* Vocabulary::tool(int id) const {
  if (id < 0 || id >= size()) return nullptr;
  const int t = tool_of_[static_cast<std::size_t>(id)];
  return t < 0 ? nullptr : &tools_[static_cast<std::size_t>(t)];
}

std::optional<int> Vocabulary::tool_token(std::string_view name) const {
  auto id = find(name);
  if (!id || !tool(*id)) return std::nullopt;
  return id;
}

std::optional<int> Vocabulary::param(int id) const {
  if (id < 0 || id >= size()) return std::nullopt;
  const int v = param_of_[static_cast<std::size_t>(id)];
  if (v < 0) return std::nullopt;
  return v;
}

std::string Vocabulary::hash() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined.push_back('\n');
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(joined)));
  return buf;
}

TokenSeq encode_calls(const Vocabulary& vocab, std::span<const ToolCall> calls) {
  TokenSeq out;
  out.reserve(calls.size() * 2);
  for (const auto& c : calls) {
    auto tool_id = vocab.tool_token(c.tool);
    if (!tool_id) throw EncodingError("tool not in vocabulary: " + c.tool);
    const ToolSpec& spec = *vocab.tool(*tool_id);
    out.push_back(*tool_id);
    if (spec.param_arity == 1) {
      if (!c.param) throw EncodingError("call " + c.tool + " is missing its parameter");
      out.push_back(vocab.id(param_token(*c.param)));
    } else if (c.param) {
      throw EncodingError("call " + c.tool + " takes no parameter");
    }
  }
  return out;
}

TokenSeq encode_trajectory(const Vocabulary& vocab, std::span<const ToolCall> calls) {
  TokenSeq out = encode_calls(vocab, calls);
  out.push_back(vocab.eos());
  return out;
}

TokenSeq encode_context(const Vocabulary& vocab, const Instruction& instr,
                        std::span<const ToolCall> history) {
  TokenSeq out;
  for (const auto& t : instr.text_tokens) {
    auto id = vocab.find(t);
    if (!id) throw EncodingError("instruction " + instr.id + ": token not in vocabulary: " + t);
    out.push_back(*id);
  }
  out.push_back(vocab.sep());
  for (const auto& t : vocab.tool_list()) out.push_back(vocab.id(t.name));
  out.push_back(vocab.sep());
  out.push_back(vocab.hist());
  const TokenSeq hist = encode_calls(vocab, history);
  out.insert(out.end(), hist.begin(), hist.end());
  return out;
}

TokenSeq encode_candidate(const Vocabulary& vocab, std::span<const int> context,
                          std::span<const int> candidate) {
  TokenSeq out(context.begin(), context.end());
  out.push_back(vocab.bot());
  out.insert(out.end(), candidate.begin(), candidate.end());
  return out;
}

CallDecode decode_calls(const Vocabulary& vocab, std::span<const int> tokens) {
  CallDecode d;
  auto fail = [&](std::size_t pos, std::string why) {
    d.error = DecodeError{pos, std::move(why)};
    return d;
  };
  std::size_t i = 0;
  while (i < tokens.size()) {
    const int tok = tokens[i];
    if (tok < 0 || tok >= vocab.size())
      return fail(i, "unknown token id " + std::to_string(tok));
    if (tok == vocab.eos()) {
      if (i + 1 != tokens.size()) return fail(i + 1, "tokens after <eos>");
      d.terminated = true;
      return d;
    }
    const ToolSpec* spec = vocab.tool(tok);
    if (!spec) return fail(i, "expected a tool name, got '" + vocab.token(tok) + "'");
    ToolCall call{spec->name, std::nullopt};
    if (spec->param_arity == 1) {
      if (i + 1 >= tokens.size()) return fail(i + 1, spec->name + " is missing its parameter");
      const int ptok = tokens[i + 1];
      if (ptok < 0 || ptok >= vocab.size())
        return fail(i + 1, "unknown token id " + std::to_string(ptok));
      auto value = vocab.param(ptok);
      if (!value) return fail(i + 1, spec->name + " expects a parameter, got '" + vocab.token(ptok) + "'");
      if (*value < spec->param_min || *value > spec->param_max)
        return fail(i + 1, spec->name + " parameter out of range");
      call.param = *value;
      i += 2;
    } else {
      i += 1;
    }
    d.calls.push_back(std::move(call));
  }
  return d;
}

DecodedContext decode_context(const Vocabulary& vocab, std::span<const int> tokens) {
  auto fail = [](std::size_t pos, const std::string& why) -> EncodingError {
    return EncodingError("context position " + std::to_string(pos) + ": " + why);
  };
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] < 0 || tokens[i] >= vocab.size())
      throw fail(i, "unknown token id " + std::to_string(tokens[i]));
  const auto sep = std::find(tokens.begin(), tokens.end(), vocab.sep());
  if (sep == tokens.end()) throw fail(tokens.size(), "missing <sep> after instruction");
  const auto text_len = static_cast<std::size_t>(sep - tokens.begin());
  std::vector<std::string> text;
  for (std::size_t i = 0; i < text_len; ++i) text.push_back(vocab.token(tokens[i]));
  DecodedContext out;
  out.fields = parse_text(text);

  std::size_t pos = text_len + 1;
  for (const auto& t : vocab.tool_list()) {
    if (pos >= tokens.size() || tokens[pos] != vocab.id(t.name))
      throw fail(pos, "tool list does not match the registry");
    ++pos;
  }
  if (pos >= tokens.size() || tokens[pos] != vocab.sep()) throw fail(pos, "expected <sep>");
  ++pos;
  if (pos >= tokens.size() || tokens[pos] != vocab.hist()) throw fail(pos, "expected <hist>");
  ++pos;
  const CallDecode hist = decode_calls(vocab, tokens.subspan(pos));
  if (!hist.ok()) throw fail(pos + hist.error->position, hist.error->reason);
  if (hist.terminated) throw fail(tokens.size() - 1, "<eos> inside history");
  out.history = hist.calls;
  return out;
}

std::vector<std::string> to_strings(const Vocabulary& vocab, std::span<const int> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (int t : tokens) out.push_back(vocab.token(t));
  return out;
}

TokenSeq from_strings(const Vocabulary& vocab, std::span<const std::string> tokens) {
  TokenSeq out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab.id(t));
  return out;
}

}  // namespace orchestra
