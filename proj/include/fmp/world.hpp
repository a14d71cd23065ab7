#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "fmp/geometry.hpp"

namespace fmp {

/// Simplified skeleton. The first joint is always the head; gaze and the
/// agent's attention node are anchored there.
enum class Joint : std::uint8_t { Head = 0, LeftHand = 1, RightHand = 2, Torso = 3, LeftFoot = 4, RightFoot = 5 };

inline constexpr int kDefaultJointCount = 6;

enum class ObjectCategory : std::uint8_t { Cup = 0, Book = 1, Ball = 2, Phone = 3, Toy = 4, Bottle = 5 };
inline constexpr int kNumCategories = 6;

std::string_view to_string(ObjectCategory c);
ObjectCategory parse_category(std::string_view s);

struct AgentState {
  Vec3 position;            // floor anchor, meters
  std::vector<Vec3> pose;   // J joints, meters
  Vec3 gaze;                // unit vector
  std::optional<Vec3> pointing;

  const Vec3& head() const { return pose.at(0); }
  /// Hand joints when the skeleton has them, otherwise the head.
  const Vec3& left_hand() const { return pose.size() > 1 ? pose[1] : pose.at(0); }
  const Vec3& right_hand() const { return pose.size() > 2 ? pose[2] : pose.at(0); }
};

struct ObjectState {
  Vec3 position;
  ObjectCategory category = ObjectCategory::Cup;
  int object_id = 0;
};

struct WorldFrame {
  int t = 0;
  std::array<AgentState, 2> agents;
  std::vector<ObjectState> objects;  // sorted by object_id
};

/// Entity numbering shared by features and attention graphs: agents 0 and 1,
/// then object j as 2 + j.
inline constexpr int kNumAgents = 2;
constexpr int object_entity(int object_id) { return kNumAgents + object_id; }
constexpr bool is_agent_entity(int entity) { return entity >= 0 && entity < kNumAgents; }

struct WorldTrace {
  double frame_rate = 10.0;
  int joint_count = kDefaultJointCount;
  int object_count = 0;
  std::vector<Box> occluders;
  std::vector<WorldFrame> frames;

  int length() const { return static_cast<int>(frames.size()); }
};

/// Checks contiguity, agent count, unit gaze/pointing, finiteness and object ids.
/// Throws DataError on the first violation.
void validate(const WorldTrace& trace);

}  // namespace fmp
