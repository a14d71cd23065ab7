#pragma once

#include <span>

#include "fmp/geometry.hpp"
#include "fmp/world.hpp"

namespace fmp {

/// Geometry of the attention tests. Gaze cones start at the head joint,
/// pointing rays at the right hand.
struct AttentionParams {
  double gaze_half_angle = degrees(15.0);
  double gaze_range = 4.0;
  double pointing_half_angle = degrees(10.0);
  double pointing_range = 8.0;
};

bool in_gaze_cone(const AgentState& agent, const Vec3& p, const AttentionParams& params);

bool occluded(const Vec3& eye, const Vec3& p, std::span<const Box> occluders);

/// Inside the gaze cone and not hidden behind furniture.
bool sees_point(const AgentState& agent, const Vec3& p, std::span<const Box> occluders,
                const AttentionParams& params);

/// Attention node position: the head for agents, the object position otherwise.
Vec3 entity_position(const WorldFrame& frame, int entity);

struct TargetHit {
  int entity = -1;       // -1 when nothing qualifies
  double offset = 0.0;   // angular offset in radians
  double distance = 0.0;
};

/// Entity with the smallest angular offset inside the agent's gaze cone;
/// ties go to the closer entity, then to the lower entity id.
TargetHit gaze_target(const WorldFrame& frame, int agent, std::span<const Box> occluders,
                      const AttentionParams& params);

/// Same selection rule for the pointing ray; empty when the agent is not pointing.
TargetHit pointing_target(const WorldFrame& frame, int agent, std::span<const Box> occluders,
                          const AttentionParams& params);

}  // namespace fmp
