#include "fmp/attention.hpp"

#include <tuple>

namespace fmp {

bool in_gaze_cone(const AgentState& agent, const Vec3& p, const AttentionParams& params) {
  const Vec3 d = p - agent.head();
  const double dist = norm(d);
  if (dist > params.gaze_range || dist == 0.0) return false;
  return angle_between(agent.gaze, d) <= params.gaze_half_angle;
}

bool occluded(const Vec3& eye, const Vec3& p, std::span<const Box> occluders) {
  for (const Box& b : occluders) {
    if (segment_hits_box(eye, p, b)) return true;
  }
  return false;
}

bool sees_point(const AgentState& agent, const Vec3& p, std::span<const Box> occluders,
                const AttentionParams& params) {
  return in_gaze_cone(agent, p, params) && !occluded(agent.head(), p, occluders);
}

Vec3 entity_position(const WorldFrame& frame, int entity) {
  if (is_agent_entity(entity)) return frame.agents[static_cast<std::size_t>(entity)].head();
  return frame.objects.at(static_cast<std::size_t>(entity - kNumAgents)).position;
}

namespace {

TargetHit best_in_cone(const WorldFrame& frame, int agent, const Vec3& origin, const Vec3& dir,
                       double half_angle, double range, std::span<const Box> occluders) {
  TargetHit best;
  const int n_entities = kNumAgents + static_cast<int>(frame.objects.size());
  for (int e = 0; e < n_entities; ++e) {
    if (e == agent) continue;
    const Vec3 d = entity_position(frame, e) - origin;
    const double dist = norm(d);
    if (dist == 0.0 || dist > range) continue;
    const double off = angle_between(dir, d);
    if (off > half_angle) continue;
    if (occluded(origin, entity_position(frame, e), occluders)) continue;
    if (best.entity < 0 || std::tie(off, dist, e) < std::tie(best.offset, best.distance, best.entity)) {
      best = TargetHit{e, off, dist};
    }
  }
  return best;
}

}  // namespace

TargetHit gaze_target(const WorldFrame& frame, int agent, std::span<const Box> occluders,
                      const AttentionParams& params) {
  const AgentState& a = frame.agents.at(static_cast<std::size_t>(agent));
  return best_in_cone(frame, agent, a.head(), a.gaze, params.gaze_half_angle, params.gaze_range, occluders);
}

TargetHit pointing_target(const WorldFrame& frame, int agent, std::span<const Box> occluders,
                          const AttentionParams& params) {
  const AgentState& a = frame.agents.at(static_cast<std::size_t>(agent));
  if (!a.pointing) return {};
  return best_in_cone(frame, agent, a.right_hand(), *a.pointing, params.pointing_half_angle,
                      params.pointing_range, occluders);
}

}  // namespace fmp
