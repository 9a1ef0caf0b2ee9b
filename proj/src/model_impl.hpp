#pragma once

#include <memory>
#include <string_view>

#include "orchestra/model.hpp"

namespace orchestra::detail {

std::size_t bigram_param_count(const ModelDims& dims);
std::size_t mlp_param_count(const ModelDims& dims);
std::size_t attention_param_count(const ModelDims& dims);

std::unique_ptr<SequenceModel> make_bigram(const ModelDims& dims);
std::unique_ptr<SequenceModel> make_mlp(const ModelDims& dims);
std::unique_ptr<SequenceModel> make_attention(const ModelDims& dims);

inline bool is_bias(std::string_view name) {
  return name.size() >= 2 && name.substr(name.size() - 2) == "_b";
}

}  // namespace orchestra::detail
