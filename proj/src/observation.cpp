#include "fmp/observation.hpp"

namespace fmp {

bool mind_sees(MindId mind, const WorldFrame& frame, const FrameAttention& attention, const EventContext& ctx,
               std::span<const Box> occluders, const AttentionParams& params, const Vec3& p) {
  const auto sees = [&](int agent) { return sees_point(frame.agents[static_cast<std::size_t>(agent)], p, occluders, params); };
  switch (mind) {
    case MindId::M1: return sees(0);
    case MindId::M2: return sees(1);
    case MindId::M12: return attention.gaze_target[0] == 1 && sees(1);
    case MindId::M21: return attention.gaze_target[1] == 0 && sees(0);
    case MindId::MC:
      return ctx.label == EventLabel::JointAttention && ctx.mutual_seen && sees(0) && sees(1);
  }
  return false;
}

}  // namespace fmp
