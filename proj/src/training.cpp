#include "orchestra/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "orchestra/errors.hpp"

namespace orchestra {

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::StepSft: return "s-sft";
    case Stage::TrajSft: return "t-sft";
    case Stage::StepDpo: return "s-dpo";
    case Stage::TrajDpo: return "t-dpo";
    case Stage::DiscSft: return "disc-sft";
    case Stage::Interleave: return "interleave";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::StepSft, Stage::TrajSft, Stage::StepDpo, Stage::TrajDpo, Stage::DiscSft,
                  Stage::Interleave})
    if (stage_name(s) == name) return s;
  throw ConfigError("unknown stage: " + std::string(name));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(dpo_beta > 0.0)) throw ConfigError("dpo_beta must be > 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

TokenSeq joined(std::span<const int> a, std::span<const int> b) {
  TokenSeq out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

double sft_loss(const PolicyModel& model, std::span<const SftExample> batch) {
  double total = 0.0;
  for (const auto& ex : batch) total += model.sequence_logprob(ex.context, ex.target);
  return -total / static_cast<double>(batch.size());
}

struct RefLogps {
  double chosen = 0.0;
  double rejected = 0.0;
};

std::vector<RefLogps> reference_logps(const PolicyModel& reference,
                                      std::span<const DpoTriplet> batch) {
  std::vector<RefLogps> out;
  out.reserve(batch.size());
  for (const auto& t : batch)
    out.push_back({reference.sequence_logprob(t.context, t.chosen),
                   reference.sequence_logprob(t.context, t.rejected)});
  return out;
}

LossGrad dpo_with_reference(const PolicyModel& model, std::span<const DpoTriplet> batch,
                            std::span<const RefLogps> ref, double beta, bool want_grad) {
  LossGrad out;
  if (want_grad) out.grad.assign(model.net().num_params(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const DpoTriplet& t = batch[i];
    const TokenSeq chosen = joined(t.context, t.chosen);
    const TokenSeq rejected = joined(t.context, t.rejected);
    const double pc = model.net().sequence_logprob(chosen, t.context.size());
    const double pr = model.net().sequence_logprob(rejected, t.context.size());
    const double z = beta * ((pc - ref[i].chosen) - (pr - ref[i].rejected));
    out.loss += softplus(-z) * inv_b;
    if (want_grad) {
      // d/dz softplus(-z) = -sigmoid(-z)
      const double g = -sigmoid(-z) * beta * inv_b;
      model.net().accumulate_logprob_grad(chosen, t.context.size(), g, out.grad);
      model.net().accumulate_logprob_grad(rejected, t.context.size(), -g, out.grad);
    }
  }
  return out;
}

DiscLossGrad disc_loss_impl(const DiscScorer& scorer, std::span<const DiscExample> batch,
                            bool want_grad) {
  DiscLossGrad out;
  if (want_grad) {
    out.backbone_grad.assign(scorer.backbone().net().num_params(), 0.0);
    out.head_grad.assign(scorer.head().size(), 0.0);
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    if (ex.candidates.size() < 2) throw ValidationError("discriminator example with < 2 candidates");
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= ex.candidates.size())
      throw ValidationError("discriminator label out of range");
    std::vector<double> s = scorer.scores(ex.context, ex.candidates);
    const auto label = static_cast<std::size_t>(ex.label);
    log_softmax(s);  // s now holds log-probabilities
    out.loss += -s[label] * inv_b;
    if (!want_grad) continue;
    for (std::size_t j = 0; j < ex.candidates.size(); ++j) {
      const double d = (std::exp(s[j]) - (j == label ? 1.0 : 0.0)) * inv_b;
      if (d == 0.0) continue;
      scorer.accumulate_score_grad(ex.context, ex.candidates[j], d, out.backbone_grad,
                                   out.head_grad);
    }
  }
  return out;
}

}  // namespace

LossGrad sft_loss_and_grad(const PolicyModel& model, std::span<const SftExample> batch) {
  if (batch.empty()) throw ValidationError("sft_loss_and_grad: empty batch");
  LossGrad out;
  out.grad.assign(model.net().num_params(), 0.0);
  const double scale = -1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const TokenSeq seq = joined(ex.context, ex.target);
    out.loss += scale * model.net().accumulate_logprob_grad(seq, ex.context.size(), scale, out.grad);
  }
  return out;
}

double dpo_triplet_loss(double policy_chosen, double policy_rejected, double ref_chosen,
                        double ref_rejected, double beta) {
  return softplus(-beta * ((policy_chosen - ref_chosen) - (policy_rejected - ref_rejected)));
}

LossGrad dpo_loss_and_grad(const PolicyModel& model, const PolicyModel& reference,
                           std::span<const DpoTriplet> batch, double beta) {
  if (batch.empty()) throw ValidationError("dpo_loss_and_grad: empty batch");
  const auto ref = reference_logps(reference, batch);
  return dpo_with_reference(model, batch, ref, beta, true);
}

DiscLossGrad disc_loss_and_grad(const DiscScorer& scorer, std::span<const DiscExample> batch) {
  if (batch.empty()) throw ValidationError("disc_loss_and_grad: empty batch");
  return disc_loss_impl(scorer, batch, true);
}

Adam::Adam(std::size_t size, double learning_rate, AdamConfig config)
    : lr_(learning_rate), cfg_(config), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ValidationError("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

namespace {

/// Mini-batch loop shared by every stage. `batch_step` computes the loss of a
/// batch and applies one optimiser update; `full_loss` evaluates the whole
/// dataset without updating.
void train_loop(const TrainConfig& config, std::size_t n,
                const std::function<double(std::span<const std::size_t>)>& batch_step,
                const std::function<double()>& full_loss, TrainReport& report) {
  const auto start = std::chrono::steady_clock::now();
  report.stage = config.stage;
  report.examples = n;
  if (n == 0) return;
  report.initial_loss = full_loss();
  if (!std::isfinite(report.initial_loss))
    throw TrainingError(std::string(stage_name(config.stage)) + ": non-finite initial loss");
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(n, b + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + b, e - b);
      const double loss = batch_step(idx);
      if (!std::isfinite(loss))
        throw TrainingError(std::string(stage_name(config.stage)) + ": non-finite loss at epoch " +
                            std::to_string(epoch) + ", batch starting at " + std::to_string(b) +
                            " (lr " + std::to_string(config.learning_rate) + ")");
      epoch_loss += loss * static_cast<double>(e - b);
    }
    epoch_loss /= static_cast<double>(n);
    report.loss_curve.push_back(epoch_loss);
    report.epochs_run = epoch + 1;
    if (epoch_loss < best) {
      best = epoch_loss;
      stale = 0;
    } else if (++stale >= config.patience) {
      report.early_stopped = true;
      break;
    }
  }
  report.final_loss = full_loss();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename T>
std::vector<T> gather(const std::vector<T>& data, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

template <typename T>
void require_kind(const std::vector<T>& data, ExampleKind kind, Stage stage) {
  for (const auto& ex : data)
    if (ex.kind != kind)
      throw ValidationError(std::string(stage_name(stage)) + " expects " +
                            std::string(kind_name(kind)) + " examples");
}

}  // namespace

PolicyStageResult run_stage(const TrainConfig& config, const Dataset& data, const PolicyModel& in) {
  config.validate();
  PolicyStageResult result{in, {}};
  PolicyModel& model = result.model;
  Adam adam(model.net().num_params(), config.learning_rate, config.adam);
  const std::string name(stage_name(config.stage));

  switch (config.stage) {
    case Stage::StepSft:
    case Stage::TrajSft: {
      const auto* sft = std::get_if<std::vector<SftExample>>(&data);
      if (!sft) throw ValidationError(name + " needs an SFT dataset");
      require_kind(*sft, config.stage == Stage::StepSft ? ExampleKind::Stepwise : ExampleKind::Trajectory,
                   config.stage);
      train_loop(
          config, sft->size(),
          [&](std::span<const std::size_t> idx) {
            const auto batch = gather(*sft, idx);
            LossGrad lg = sft_loss_and_grad(model, batch);
            adam.step(model.net().params(), lg.grad);
            return lg.loss;
          },
          [&] { return sft_loss(model, *sft); }, result.report);
      break;
    }
    case Stage::StepDpo:
    case Stage::TrajDpo: {
      const auto* dpo = std::get_if<std::vector<DpoTriplet>>(&data);
      if (!dpo) throw ValidationError(name + " needs a DPO dataset");
      require_kind(*dpo, config.stage == Stage::StepDpo ? ExampleKind::Stepwise : ExampleKind::Trajectory,
                   config.stage);
      const FrozenPolicy reference = snapshot_reference(in);
      const auto ref = reference_logps(*reference, *dpo);
      train_loop(
          config, dpo->size(),
          [&](std::span<const std::size_t> idx) {
            const auto batch = gather(*dpo, idx);
            std::vector<RefLogps> batch_ref;
            for (auto i : idx) batch_ref.push_back(ref[i]);
            LossGrad lg = dpo_with_reference(model, batch, batch_ref, config.dpo_beta, true);
            adam.step(model.net().params(), lg.grad);
            return lg.loss;
          },
          [&] { return dpo_with_reference(model, *dpo, ref, config.dpo_beta, false).loss; },
          result.report);
      break;
    }
    case Stage::DiscSft:
    case Stage::Interleave:
      throw ValidationError(name + " is not an orchestrator training stage");
  }
  model.add_provenance(result.report.examples == 0 ? name + "(empty)" : name);
  return result;
}

DiscStageResult run_disc_stage(const TrainConfig& config, std::span<const DiscExample> data,
                               const DiscScorer& in) {
  config.validate();
  if (config.stage != Stage::DiscSft)
    throw ValidationError(std::string(stage_name(config.stage)) + " is not a discriminator stage");
  DiscStageResult result{in, {}};
  DiscScorer& scorer = result.scorer;
  const std::size_t nb = scorer.backbone().net().num_params();
  Adam adam_backbone(nb, config.learning_rate, config.adam);
  Adam adam_head(scorer.head().size(), config.learning_rate, config.adam);
  const std::vector<DiscExample> all(data.begin(), data.end());
  train_loop(
      config, all.size(),
      [&](std::span<const std::size_t> idx) {
        const auto batch = gather(all, idx);
        DiscLossGrad lg = disc_loss_impl(scorer, batch, true);
        adam_backbone.step(scorer.backbone().net().params(), lg.backbone_grad);
        adam_head.step(scorer.head(), lg.head_grad);
        return lg.loss;
      },
      [&] { return disc_loss_impl(scorer, all, false).loss; }, result.report);
  scorer.backbone().add_provenance(all.empty() ? "disc-sft(empty)" : "disc-sft");
  return result;
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "sft") return LossKind::Sft;
  if (name == "dpo") return LossKind::Dpo;
  if (name == "disc") return LossKind::Disc;
  throw ConfigError("unknown loss kind: " + std::string(name));
}

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Sft: return "sft";
    case LossKind::Dpo: return "dpo";
    case LossKind::Disc: return "disc";
  }
  return "?";
}

double relative_error(double analytic, double numeric) {
  // Absolute floor keeps entries that are zero on both sides from dividing by zero.
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

TokenSeq random_tokens(Rng& rng, int vocab, int min_len, int max_len) {
  TokenSeq out(static_cast<std::size_t>(rng.uniform_int(min_len, max_len)));
  for (auto& t : out) t = static_cast<int>(rng.index(static_cast<std::size_t>(vocab)));
  return out;
}

ModelDims small_dims(Arch arch) {
  ModelDims d;
  d.arch = arch;
  d.vocab_size = 6;
  d.window = 2;
  d.hidden = arch == Arch::Attention ? 3 : 4;
  d.max_len = 12;
  return d;
}

/// Largest relative error over every parameter in `params`.
double check_block(std::span<double> params, std::span<const double> analytic,
                   const std::function<double()>& loss, double h) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss();
    params[i] = saved - h;
    const double down = loss();
    params[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace

GradCheckReport gradient_check(LossKind kind, int trials, double tolerance, std::uint64_t seed,
                               double step) {
  GradCheckReport report;
  report.kind = kind;
  report.trials = trials;
  report.tolerance = tolerance;
  constexpr std::array<Arch, 3> archs{Arch::Bigram, Arch::Mlp, Arch::Attention};
  for (int trial = 0; trial < trials; ++trial) {
    const Arch arch = archs[static_cast<std::size_t>(trial) % archs.size()];
    const ModelDims dims = small_dims(arch);
    const std::uint64_t tseed = derive_seed(seed, "gradcheck", static_cast<std::uint64_t>(trial));
    Rng rng(tseed);
    PolicyModel model(make_model(dims, Init::Random, tseed, 0.5), "gradcheck");
    const int V = dims.vocab_size;
    switch (kind) {
      case LossKind::Sft: {
        std::vector<SftExample> batch;
        for (int b = 0; b < 3; ++b)
        {
          SftExample ex;
          ex.context = random_tokens(rng, V, 1, 4);
          ex.target = random_tokens(rng, V, 1, 3);
          batch.push_back(std::move(ex));
        }
        const LossGrad lg = sft_loss_and_grad(model, batch);
        report.max_rel_error = std::max(
            report.max_rel_error, check_block(model.net().params(), lg.grad,
                                              [&] { return sft_loss(model, batch); }, step));
        report.params_checked += model.net().num_params();
        break;
      }
      case LossKind::Dpo: {
        PolicyModel reference(make_model(dims, Init::Random, tseed + 1, 0.5), "gradcheck");
        std::vector<DpoTriplet> batch;
        for (int b = 0; b < 3; ++b) {
          DpoTriplet t;
          t.context = random_tokens(rng, V, 1, 4);
          t.chosen = random_tokens(rng, V, 1, 3);
          do t.rejected = random_tokens(rng, V, 1, 3);
          while (t.rejected == t.chosen);
          batch.push_back(std::move(t));
        }
        const double beta = 0.5;
        const LossGrad lg = dpo_loss_and_grad(model, reference, batch, beta);
        const auto ref = reference_logps(reference, batch);
        report.max_rel_error = std::max(
            report.max_rel_error,
            check_block(model.net().params(), lg.grad,
                        [&] { return dpo_with_reference(model, batch, ref, beta, false).loss; }, step));
        report.params_checked += model.net().num_params();
        break;
      }
      case LossKind::Disc: {
        DiscScorer scorer(model, /*bot_token=*/0, tseed, 0.5);
        std::vector<DiscExample> batch;
        for (int b = 0; b < 2; ++b) {
          DiscExample ex;
          ex.context = random_tokens(rng, V, 1, 3);
          const auto k = static_cast<std::size_t>(rng.uniform_int(2, 4));
          for (std::size_t c = 0; c < k; ++c) ex.candidates.push_back(random_tokens(rng, V, 1, 3));
          ex.label = static_cast<int>(rng.index(k));
          batch.push_back(std::move(ex));
        }
        const DiscLossGrad lg = disc_loss_and_grad(scorer, batch);
        auto loss = [&] { return disc_loss_impl(scorer, batch, false).loss; };
        report.max_rel_error =
            std::max({report.max_rel_error,
                      check_block(scorer.backbone().net().params(), lg.backbone_grad, loss, step),
                      check_block(scorer.head(), lg.head_grad, loss, step)});
        report.params_checked += scorer.backbone().net().num_params() + scorer.head().size();
        break;
      }
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace orchestra
