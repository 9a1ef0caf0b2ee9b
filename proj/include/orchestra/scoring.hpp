#pragma once

#include "orchestra/scene.hpp"

namespace orchestra {

/// Coefficients of the quality and composition scores.
///
/// `alpha` penalises each out-of-boundary object and each collided pair,
/// `lambda` weighs the physical score against the visual score, and `gamma`
/// charges cumulative runtime.
struct ScoreParams {
  double alpha = 4.0;
  double lambda = 0.1;
  double gamma = 0.05;

  bool valid() const { return alpha >= 0.0 && lambda >= 0.0 && gamma >= 0.0; }
};

struct QualityBreakdown {
  double q_phy = 0.0;
  double q_vis = 0.0;
  double s_comp = 0.0;
  double q_total = 0.0;

  friend bool operator==(const QualityBreakdown&, const QualityBreakdown&) = default;
};

/// Completeness: the fraction of the requested objects present, scaled to
/// [0, 10] and capped.
double completeness(int n_obj, int target_object_count);

QualityBreakdown quality(const SceneState& state, const Instruction& instr,
                         const ScoreParams& params);

/// Quality minus the time charge.
double composition(double q_total, double cumulative_time, const ScoreParams& params);

}  // namespace orchestra
