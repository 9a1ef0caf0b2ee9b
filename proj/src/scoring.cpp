#include "orchestra/scoring.hpp"

#include <algorithm>
#include <stdexcept>

namespace orchestra {

double completeness(int n_obj, int target_object_count) {
  if (target_object_count < 1) throw std::invalid_argument("target_object_count must be >= 1");
  return std::min(10.0, 10.0 * static_cast<double>(n_obj) / target_object_count);
}

QualityBreakdown quality(const SceneState& state, const Instruction& instr,
                         const ScoreParams& params) {
  QualityBreakdown q;
  q.s_comp = completeness(state.n_obj, instr.target_object_count);
  q.q_phy = static_cast<double>(state.n_obj) - params.alpha * (state.n_oob + state.n_col);
  q.q_vis = (state.vis_real + state.vis_func + state.vis_lay + q.s_comp) / 4.0;
  q.q_total = params.lambda * q.q_phy + q.q_vis;
  return q;
}

double composition(double q_total, double cumulative_time, const ScoreParams& params) {
  return q_total - params.gamma * cumulative_time;
}

}  // namespace orchestra
