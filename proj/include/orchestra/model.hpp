#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace orchestra {

enum class Arch { Bigram, Mlp, Attention };

std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view name);

struct ModelDims {
  Arch arch = Arch::Mlp;
  int vocab_size = 0;
  /// Number of preceding tokens the MLP reads position by position.
  int window = 8;
  int hidden = 32;
  /// Longest token sequence the model accepts.
  int max_len = 256;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

enum class Init { Zero, Random };

/// Autoregressive categorical model over token ids. Parameters live in one
/// flat vector so that copies, optimiser state, and checkpoints are uniform
/// across architectures.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  const ModelDims& dims() const { return dims_; }
  int vocab_size() const { return dims_.vocab_size; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::size_t num_params() const { return params_.size(); }

  virtual std::vector<ParamBlock> layout() const = 0;

  /// Sum over positions p >= target_begin of log P(tokens[p] | tokens[0..p)).
  virtual double sequence_logprob(std::span<const int> tokens, std::size_t target_begin) const = 0;

  /// Returns sequence_logprob and adds `scale` times its gradient to `grad`.
  virtual double accumulate_logprob_grad(std::span<const int> tokens, std::size_t target_begin,
                                         double scale, std::span<double> grad) const = 0;

  /// Logits of the next token after `prefix`.
  virtual void next_logits(std::span<const int> prefix, std::span<double> logits) const = 0;

  /// Summary vector of a whole sequence, read by scoring heads.
  virtual std::size_t feature_dim() const = 0;
  virtual void features(std::span<const int> tokens, std::span<double> out) const = 0;
  virtual void accumulate_feature_grad(std::span<const int> tokens, std::span<const double> dfeat,
                                       std::span<double> grad) const = 0;

  virtual std::unique_ptr<SequenceModel> clone() const = 0;

 protected:
  SequenceModel(ModelDims dims, std::size_t num_params);

  /// Throws ValidationError on an out-of-range id, an overlong sequence, or a
  /// target start past the end.
  void check_input(std::span<const int> tokens, std::size_t target_begin) const;

  ModelDims dims_;
  std::vector<double> params_;
};

std::size_t param_count(const ModelDims& dims);

std::unique_ptr<SequenceModel> make_model(const ModelDims& dims, Init init, std::uint64_t seed,
                                          double init_scale = 0.1);

/// In-place log-softmax; returns the log-normaliser.
double log_softmax(std::span<double> logits);

/// In-place softmax.
void softmax(std::span<double> logits);

}  // namespace orchestra
