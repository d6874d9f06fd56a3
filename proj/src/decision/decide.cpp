#include "xpg/decision/decide.hpp"

#include <algorithm>
#include <cmath>

namespace xpg::decision {

Thresholds clamped(Thresholds t) {
  return {std::clamp(t.tau1, 0.0, 1.0), std::clamp(t.tau2, 0.0, 1.0)};
}

Priority select_priority(const Thresholds& t, const grasp::GraspScores& s) {
  if (s.q_target >= t.tau1) return Priority::kGraspTarget;
  if (s.q_occlude >= t.tau2) {
    if (s.best_occluder) return Priority::kRemoveOccluder;
    if (s.q_occlude > 0.0)
      throw ConsistencyError("q_occlude is positive but no best occluder is named");
  }
  return Priority::kMoveView;
}

std::size_t flat_argmax(std::span<const double, kFlatActionCount> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

}  // namespace xpg::decision
