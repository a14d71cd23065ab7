#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "fmp/geometry.hpp"
#include "fmp/labels.hpp"

namespace fmp {

/// One mind: the objects it tracks and their believed location. Objects
/// missing from the map are untracked.
struct MindState {
  std::map<int, Vec3> tracked;

  bool is_tracked(int object_id) const { return tracked.contains(object_id); }
  bool operator==(const MindState&) const = default;
};

using FiveMinds = std::array<MindState, kNumMinds>;

/// Whether `delta` is allowed for an object whose tracking status is `tracked`.
constexpr bool delta_legal(bool tracked, BeliefDelta delta) {
  switch (delta) {
    case BeliefDelta::Occur: return !tracked;
    case BeliefDelta::Disappear:
    case BeliefDelta::Update: return tracked;
    case BeliefDelta::Null: return true;
  }
  return false;
}

/// Tracking status after applying `delta` to an object with status `tracked`.
constexpr bool tracked_after(bool tracked, BeliefDelta delta) {
  switch (delta) {
    case BeliefDelta::Occur:
    case BeliefDelta::Update: return true;
    case BeliefDelta::Disappear: return false;
    case BeliefDelta::Null: return tracked;
  }
  return tracked;
}

/// Applies one delta. Occur and update require the new attribute.
/// Throws StateMachineError for illegal deltas.
MindState apply_delta(MindState state, int object_id, BeliefDelta delta,
                      std::optional<Vec3> new_attribute = std::nullopt);

/// Dense (mind, frame, object) -> delta table. All cells start as null.
class BeliefTable {
 public:
  BeliefTable() = default;
  BeliefTable(int num_frames, int num_objects)
      : frames_(num_frames),
        objects_(num_objects),
        cells_(static_cast<std::size_t>(kNumMinds) * num_frames * num_objects, BeliefDelta::Null) {}

  int num_frames() const { return frames_; }
  int num_objects() const { return objects_; }
  std::size_t size() const { return cells_.size(); }

  BeliefDelta& at(MindId m, int frame, int object) { return cells_[offset(m, frame, object)]; }
  BeliefDelta at(MindId m, int frame, int object) const { return cells_[offset(m, frame, object)]; }

  const std::vector<BeliefDelta>& cells() const { return cells_; }
  bool operator==(const BeliefTable&) const = default;

 private:
  std::size_t offset(MindId m, int frame, int object) const {
    return (static_cast<std::size_t>(index(m)) * frames_ + static_cast<std::size_t>(frame)) * objects_ +
           static_cast<std::size_t>(object);
  }

  int frames_ = 0;
  int objects_ = 0;
  std::vector<BeliefDelta> cells_;
};

}  // namespace fmp
