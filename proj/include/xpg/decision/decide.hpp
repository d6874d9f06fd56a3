#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <span>

#include "xpg/core/errors.hpp"
#include "xpg/grasp/scores.hpp"
#include "xpg/sim/scene.hpp"

namespace xpg::decision {

// Policy output gating the priority cascade. Both values lie in [0, 1].
struct Thresholds {
  double tau1 = 0.5;
  double tau2 = 0.5;
  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

Thresholds clamped(Thresholds t);

enum class Priority { kGraspTarget, kRemoveOccluder, kMoveView };

// The two-branch cascade on scores alone. Comparisons are >=.
// Throws ConsistencyError if the occluder gate passes with a positive
// q_occlude but no occluder named.
Priority select_priority(const Thresholds& thresholds, const grasp::GraspScores& scores);

// Priority-guided selection. next_view is only invoked when both gates fail.
template <std::invocable NextView>
sim::ActionPrimitive decide(const Thresholds& thresholds, const grasp::GraspScores& scores,
                            NextView&& next_view) {
  switch (select_priority(thresholds, scores)) {
    case Priority::kGraspTarget:
      return sim::GraspTarget{};
    case Priority::kRemoveOccluder:
      return sim::RemoveOccluder{*scores.best_occluder};
    case Priority::kMoveView:
      break;
  }
  return sim::MoveView{next_view()};
}

inline sim::ActionPrimitive decide(const Thresholds& thresholds, const grasp::GraspScores& scores,
                                   const sim::CameraPose& nbv_pose) {
  return decide(thresholds, scores, [&] { return nbv_pose; });
}

// Flat ablation: argmax over (grasp, remove, move); ties go to the earlier
// primitive. RemoveOccluder with no occluder names the background id, which
// execute() reports as infeasible.
inline constexpr std::size_t kFlatActionCount = 3;

std::size_t flat_argmax(std::span<const double, kFlatActionCount> logits);

template <std::invocable NextView>
sim::ActionPrimitive decide_flat_index(std::size_t index, const grasp::GraspScores& scores,
                                       NextView&& next_view) {
  switch (index) {
    case 0:
      return sim::GraspTarget{};
    case 1:
      return sim::RemoveOccluder{scores.best_occluder.value_or(sim::kBackground)};
    default:
      return sim::MoveView{next_view()};
  }
}

template <std::invocable NextView>
sim::ActionPrimitive decide_flat(std::span<const double, kFlatActionCount> logits,
                                 const grasp::GraspScores& scores, NextView&& next_view) {
  return decide_flat_index(flat_argmax(logits), scores, std::forward<NextView>(next_view));
}

inline sim::ActionPrimitive decide_flat(std::span<const double, kFlatActionCount> logits,
                                        const grasp::GraspScores& scores,
                                        const sim::CameraPose& nbv_pose) {
  return decide_flat(logits, scores, [&] { return nbv_pose; });
}

}  // namespace xpg::decision
