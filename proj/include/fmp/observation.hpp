#pragma once

#include <array>
#include <span>

#include "fmp/attention.hpp"
#include "fmp/labels.hpp"
#include "fmp/world.hpp"

namespace fmp {

/// Locations closer than this are the same belief attribute.
inline constexpr double kLocationTolerance = 0.02;

/// Attention facts of one frame needed by the per-mind observation rules.
struct FrameAttention {
  std::array<int, 2> gaze_target{-1, -1};  // entity ids, -1 for none
  bool mutual_gaze = false;

  static FrameAttention from_targets(int target0, int target1) {
    return {{target0, target1}, target0 == 1 && target1 == 0};
  }
};

/// Event-level context: the current event label and whether mutual gaze
/// has been seen since the event started.
struct EventContext {
  EventLabel label = EventLabel::NoCommunication;
  bool mutual_seen = false;
};

/// Observation rule of each mind:
///   m1 / m2   the agent's own view;
///   m12 / m21 agent i looks at agent j and point p is in j's view;
///   mc        inside joint attention after mutual gaze, both agents see p.
bool mind_sees(MindId mind, const WorldFrame& frame, const FrameAttention& attention, const EventContext& ctx,
               std::span<const Box> occluders, const AttentionParams& params, const Vec3& p);

}  // namespace fmp
