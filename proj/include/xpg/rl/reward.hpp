#pragma once

#include "xpg/sim/scene.hpp"

namespace xpg::rl {

inline constexpr double kRewardExtracted = 1000.0;
inline constexpr double kRewardInfeasible = -100.0;
inline constexpr double kRewardStep = -1.0;

constexpr double reward(const sim::TransitionOutcome& outcome) {
  switch (outcome.kind) {
    case sim::OutcomeKind::kTargetExtracted:
      return kRewardExtracted;
    case sim::OutcomeKind::kInfeasible:
      return kRewardInfeasible;
    case sim::OutcomeKind::kOrdinary:
      break;
  }
  return kRewardStep;
}

}  // namespace xpg::rl
