#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fmp/attention.hpp"
#include "fmp/labels.hpp"
#include "fmp/mind.hpp"
#include "fmp/world.hpp"

namespace fmp {

/// One scripted event. `start`, when given, must equal the end of the
/// previous entry; it exists so hand-written scripts can be checked for overlap.
struct ScriptEntry {
  EventLabel kind = EventLabel::NoCommunication;
  int duration = 0;
  std::vector<int> objects;       // participating objects; the first is the focus target
  int false_belief_order = 0;     // 0 = none, 1 = first order, 2 = second order
  std::optional<int> start;
};

struct ScenarioSpec {
  std::vector<ScriptEntry> script;
  Box room{{0.0, 0.0, 0.0}, {6.0, 5.0, 3.0}};
  int object_count = 4;
  std::uint64_t seed = 0;
  int min_segment_length = 10;
  int joint_count = kDefaultJointCount;
  double frame_rate = 10.0;
};

/// Ground-truth event with the frames a false-belief script hinges on.
struct ScriptedEvent {
  EventLabel label = EventLabel::NoCommunication;
  int start = 0;
  int end = 0;  // exclusive
  std::vector<int> objects;
  int false_belief_order = 0;
  int hide_frame = -1;       // object becomes hidden from the mover
  int discovery_frame = -1;  // victim looks at the emptied location
  int victim = -1;           // agent holding the false belief

  bool operator==(const ScriptedEvent&) const = default;
};

struct GroundTruth {
  std::vector<ScriptedEvent> events;
  BeliefTable deltas;
  std::vector<FiveMinds> mind_states;  // state after each frame
};

struct Simulation {
  WorldTrace trace;
  GroundTruth truth;
};

/// Throws ConfigError for short durations, overlapping entries, bad object
/// references and false-belief flags on events that cannot host them.
void validate(const ScenarioSpec& spec);

/// Deterministic in `spec` (including the seed).
Simulation simulate(const ScenarioSpec& spec, const AttentionParams& params = {});

/// Applies the per-mind observation rules frame by frame:
/// occur when an untracked object comes into the mind's view, update when a
/// tracked object is seen away from its believed location, disappear when the
/// believed location is in view and the object is not there, null otherwise.
/// `events` must partition the trace.
GroundTruth derive_ground_truth_beliefs(const WorldTrace& trace, std::span<const ScriptedEvent> events,
                                        const AttentionParams& params = {});

/// Knobs for randomly scripted corpus traces.
struct CorpusParams {
  int object_count = 4;
  int min_events = 4;
  int max_events = 7;
  int min_duration = 50;
  int max_duration = 100;
  double first_order_rate = 0.35;   // per trace
  double second_order_rate = 0.15;  // per trace
};

ScenarioSpec random_scenario(std::uint64_t seed, const CorpusParams& params);

/// Short first-order false-belief scene: joint attention on the object, the
/// victim looks away while it is hidden, then the victim checks the old spot.
ScenarioSpec false_belief_demo(std::uint64_t seed, int object_count = 3);

/// Minimum duration the simulator needs to realize a false-belief event.
inline constexpr int kFalseBeliefMinDuration = 60;

/// Derives a per-item seed from a base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t item);

}  // namespace fmp
