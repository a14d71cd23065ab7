#include "fmp/world.hpp"

#include <cmath>
#include <string>

#include "fmp/error.hpp"

namespace fmp {

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {"cup",   "book", "ball",
                                                                         "phone", "toy",  "bottle"};

void check_unit(const Vec3& v, const char* what, int t) {
  if (!is_finite(v) || std::abs(norm(v) - 1.0) > 1e-9) {
    throw DataError(std::string(what) + " is not a unit vector at frame " + std::to_string(t));
  }
}

}  // namespace

std::string_view to_string(ObjectCategory c) { return kCategoryNames.at(static_cast<std::size_t>(c)); }

ObjectCategory parse_category(std::string_view s) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == s) return static_cast<ObjectCategory>(i);
  }
  throw DataError("unknown object category '" + std::string(s) + "'");
}

void validate(const WorldTrace& trace) {
  if (!(trace.frame_rate > 0.0)) throw DataError("frame rate must be positive");
  if (trace.joint_count < 1) throw DataError("joint count must be at least 1");
  for (std::size_t i = 0; i < trace.frames.size(); ++i) {
    const WorldFrame& f = trace.frames[i];
    if (f.t != static_cast<int>(i)) throw DataError("frame indices are not contiguous at " + std::to_string(i));
    for (const AgentState& a : f.agents) {
      if (static_cast<int>(a.pose.size()) != trace.joint_count) {
        throw DataError("pose joint count mismatch at frame " + std::to_string(f.t));
      }
      if (!is_finite(a.position)) throw DataError("non-finite agent position at frame " + std::to_string(f.t));
      for (const Vec3& j : a.pose) {
        if (!is_finite(j)) throw DataError("non-finite joint at frame " + std::to_string(f.t));
      }
      check_unit(a.gaze, "gaze", f.t);
      if (a.pointing) check_unit(*a.pointing, "pointing", f.t);
    }
    if (static_cast<int>(f.objects.size()) != trace.object_count) {
      throw DataError("object count mismatch at frame " + std::to_string(f.t));
    }
    for (std::size_t j = 0; j < f.objects.size(); ++j) {
      if (f.objects[j].object_id != static_cast<int>(j)) {
        throw DataError("object ids must be 0..N-1 in order at frame " + std::to_string(f.t));
      }
      if (!is_finite(f.objects[j].position)) {
        throw DataError("non-finite object position at frame " + std::to_string(f.t));
      }
    }
  }
}

}  // namespace fmp
