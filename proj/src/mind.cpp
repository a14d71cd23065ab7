#include "fmp/mind.hpp"

#include <string>

#include "fmp/error.hpp"

namespace fmp {

MindState apply_delta(MindState state, int object_id, BeliefDelta delta, std::optional<Vec3> new_attribute) {
  const bool tracked = state.is_tracked(object_id);
  if (!delta_legal(tracked, delta)) {
    throw StateMachineError(std::string("illegal delta ") + std::string(to_string(delta)) + " for " +
                            (tracked ? "tracked" : "untracked") + " object " + std::to_string(object_id));
  }
  switch (delta) {
    case BeliefDelta::Occur:
    case BeliefDelta::Update:
      if (!new_attribute) {
        throw StateMachineError(std::string(to_string(delta)) + " requires an attribute for object " +
                                std::to_string(object_id));
      }
      state.tracked[object_id] = *new_attribute;
      break;
    case BeliefDelta::Disappear:
      state.tracked.erase(object_id);
      break;
    case BeliefDelta::Null:
      break;
  }
  return state;
}

}  // namespace fmp
