#include "fmp/sim.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "fmp/error.hpp"
#include "fmp/observation.hpp"
#include "fmp/random.hpp"

namespace fmp {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t item) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (item + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

// Scene layout. Agents stand side by side facing the shelves; the low row of
// slots sits on a table, the high row on a shelf, so the two rows are far
// apart in angle from either head. The container hides whatever is dropped in.
constexpr double kHeadHeight = 1.6;
constexpr std::array<Vec3, 2> kAnchors = {Vec3{2.3, 1.2, 0.0}, Vec3{3.7, 1.2, 0.0}};
constexpr std::array<Vec3, 8> kSlots = {
    Vec3{1.35, 2.6, 0.5}, Vec3{2.45, 2.6, 0.5}, Vec3{3.55, 2.6, 0.5}, Vec3{4.65, 2.6, 0.5},
    Vec3{1.35, 3.7, 1.5}, Vec3{2.45, 3.7, 1.5}, Vec3{3.55, 3.7, 1.5}, Vec3{4.65, 3.7, 1.5}};
constexpr Box kContainer{{5.0, 1.6, 0.0}, {5.6, 2.2, 0.7}};
constexpr Vec3 kRim{5.3, 1.9, 0.78};
constexpr int kCarryFrames = 12;
constexpr double kJointNoise = 0.004;
constexpr double kGazeNoise = 0.004;

Vec3 hidden_spot(int k) { return {5.15 + 0.1 * (k % 4), 1.9, 0.3}; }

constexpr std::array<Vec3, 6> kJointOffsets = {Vec3{0.0, 0.0, kHeadHeight}, Vec3{-0.25, 0.1, 1.0},
                                               Vec3{0.25, 0.1, 1.0},        Vec3{0.0, 0.0, 1.2},
                                               Vec3{-0.1, 0.0, 0.05},       Vec3{0.1, 0.0, 0.05}};

Vec3 joint_offset(int j) {
  if (j < 6) return kJointOffsets[static_cast<std::size_t>(j)];
  // Extra joints for richer skeletons are spread along the spine.
  return {0.0, 0.0, 0.3 + 1.2 * static_cast<double>(j - 6 + 1) / 21.0};
}

struct GazeGoal {
  enum class Kind { Away, Agent, Object, Point };
  Kind kind = Kind::Away;
  int object = -1;
  Vec3 point;
};

GazeGoal away(Rng& rng, int agent) {
  const Vec3 a = kAnchors[static_cast<std::size_t>(agent)];
  return {GazeGoal::Kind::Away, -1, {a.x + rng.uniform(-1.0, 1.0), 0.05, rng.uniform(0.9, 1.8)}};
}
GazeGoal at_agent() { return {GazeGoal::Kind::Agent, -1, {}}; }
GazeGoal at_object(int o) { return {GazeGoal::Kind::Object, o, {}}; }
GazeGoal at_point(const Vec3& p) { return {GazeGoal::Kind::Point, -1, p}; }

/// Realizes the script frame by frame into gaze, pointing and carry plans plus
/// object trajectories, keeping track of which slots are free.
class Director {
 public:
  Director(const ScenarioSpec& spec, int total_frames)
      : n_objects_(spec.object_count), rng_(spec.seed), total_(total_frames) {
    for (auto& g : gaze_) g.assign(static_cast<std::size_t>(total_), GazeGoal{});
    for (auto& p : point_) p.assign(static_cast<std::size_t>(total_), -1);
    for (auto& c : carry_) c.assign(static_cast<std::size_t>(total_), -1);
    std::vector<int> slots(kSlots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = static_cast<int>(i);
    for (std::size_t i = slots.size(); i > 1; --i) {
      std::swap(slots[i - 1], slots[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    slot_of_.assign(static_cast<std::size_t>(n_objects_), -1);
    hidden_.assign(static_cast<std::size_t>(n_objects_), false);
    categories_.resize(static_cast<std::size_t>(n_objects_));
    positions_.assign(static_cast<std::size_t>(total_), std::vector<Vec3>(static_cast<std::size_t>(n_objects_)));
    for (int o = 0; o < n_objects_; ++o) {
      slot_of_[static_cast<std::size_t>(o)] = slots[static_cast<std::size_t>(o)];
      categories_[static_cast<std::size_t>(o)] = static_cast<ObjectCategory>(rng_.uniform_int(0, kNumCategories - 1));
      for (int t = 0; t < total_; ++t) {
        positions_[static_cast<std::size_t>(t)][static_cast<std::size_t>(o)] =
            kSlots[static_cast<std::size_t>(slots[static_cast<std::size_t>(o)])];
      }
    }
  }

  ScriptedEvent realize(const ScriptEntry& entry, int start) {
    ScriptedEvent ev;
    ev.label = entry.kind;
    ev.start = start;
    ev.end = start + entry.duration;
    ev.objects = entry.objects;
    ev.false_belief_order = entry.false_belief_order;
    switch (entry.kind) {
      case EventLabel::NoCommunication:
        if (entry.false_belief_order == 1) {
          first_order_false_belief(ev);
        } else {
          no_communication(ev.start, ev.end, entry.objects);
        }
        break;
      case EventLabel::AttentionFollowing: attention_following(ev); break;
      case EventLabel::JointAttention: joint_attention(ev); break;
    }
    return ev;
  }

  WorldTrace render(const ScenarioSpec& spec) {
    Rng noise(derive_seed(spec.seed, 0xA11CE));
    WorldTrace trace;
    trace.frame_rate = spec.frame_rate;
    trace.joint_count = spec.joint_count;
    trace.object_count = n_objects_;
    trace.occluders = {kContainer};
    trace.frames.resize(static_cast<std::size_t>(total_));
    for (int t = 0; t < total_; ++t) {
      WorldFrame& f = trace.frames[static_cast<std::size_t>(t)];
      f.t = t;
      for (int o = 0; o < n_objects_; ++o) {
        f.objects.push_back({pos(t, o), categories_[static_cast<std::size_t>(o)], o});
      }
      for (int a = 0; a < 2; ++a) {
        AgentState& s = f.agents[static_cast<std::size_t>(a)];
        const Vec3 anchor = kAnchors[static_cast<std::size_t>(a)];
        s.position = anchor;
        s.pose.resize(static_cast<std::size_t>(spec.joint_count));
        for (int j = 0; j < spec.joint_count; ++j) {
          s.pose[static_cast<std::size_t>(j)] =
              anchor + joint_offset(j) +
              Vec3{noise.normal(0, kJointNoise), noise.normal(0, kJointNoise), noise.normal(0, kJointNoise)};
        }
        const int carried = carry_[static_cast<std::size_t>(a)][static_cast<std::size_t>(t)];
        const int pointed = point_[static_cast<std::size_t>(a)][static_cast<std::size_t>(t)];
        if (spec.joint_count > 2) {
          if (carried >= 0) {
            s.pose[2] = pos(t, carried);
          } else if (pointed >= 0) {
            const Vec3 shoulder = anchor + Vec3{0.2, 0.0, 1.4};
            s.pose[2] = shoulder + normalized(pos(t, pointed) - shoulder) * 0.6;
          }
        }
        if (pointed >= 0 && pos(t, pointed) != s.right_hand()) {
          s.pointing = normalized(pos(t, pointed) - s.right_hand());
        }
      }
      for (int a = 0; a < 2; ++a) {
        AgentState& s = f.agents[static_cast<std::size_t>(a)];
        const Vec3 target = goal_point(f, a, gaze_[static_cast<std::size_t>(a)][static_cast<std::size_t>(t)]);
        const Vec3 jitter{noise.normal(0, kGazeNoise), noise.normal(0, kGazeNoise), noise.normal(0, kGazeNoise)};
        s.gaze = normalized(normalized(target - s.head()) + jitter);
      }
    }
    return trace;
  }

 private:
  Vec3 pos(int t, int o) const {
    return positions_[static_cast<std::size_t>(t)][static_cast<std::size_t>(o)];
  }

  Vec3 goal_point(const WorldFrame& f, int agent, const GazeGoal& g) const {
    switch (g.kind) {
      case GazeGoal::Kind::Agent: return f.agents[static_cast<std::size_t>(1 - agent)].head();
      case GazeGoal::Kind::Object:
        if (hidden_at(g.object, f.t)) return kRim;
        return f.objects[static_cast<std::size_t>(g.object)].position;
      case GazeGoal::Kind::Point:
      case GazeGoal::Kind::Away: return g.point;
    }
    return g.point;
  }

  bool hidden_at(int o, int t) const { return kContainer.contains(pos(t, o)); }

  void look(int agent, int from, int to, const GazeGoal& g) {
    from = std::max(from, 0);
    to = std::min(to, total_);
    for (int t = from; t < to; ++t) gaze_[static_cast<std::size_t>(agent)][static_cast<std::size_t>(t)] = g;
  }

  void point(int agent, int from, int to, int object) {
    from = std::max(from, 0);
    to = std::min(to, total_);
    for (int t = from; t < to; ++t) point_[static_cast<std::size_t>(agent)][static_cast<std::size_t>(t)] = object;
  }

  /// Carries `o` from its current location to `dest` over kCarryFrames frames
  /// starting at `start`; returns the first frame after the carry.
  int carry(int mover, int o, int start, const Vec3& dest) {
    const Vec3 from = pos(start, o);
    for (int k = 0; k < kCarryFrames && start + k < total_; ++k) {
      const double w = static_cast<double>(k + 1) / kCarryFrames;
      positions_[static_cast<std::size_t>(start + k)][static_cast<std::size_t>(o)] = from + (dest - from) * w;
      carry_[static_cast<std::size_t>(mover)][static_cast<std::size_t>(start + k)] = o;
    }
    for (int t = start + kCarryFrames; t < total_; ++t) {
      positions_[static_cast<std::size_t>(t)][static_cast<std::size_t>(o)] = dest;
    }
    return start + kCarryFrames;
  }

  int free_slot() {
    std::vector<int> free;
    for (int s = 0; s < static_cast<int>(kSlots.size()); ++s) {
      if (std::find(slot_of_.begin(), slot_of_.end(), s) == slot_of_.end()) free.push_back(s);
    }
    if (free.empty()) return -1;
    return free[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(free.size()) - 1))];
  }

  bool move_to_free_slot(int mover, int o, int start) {
    if (hidden_[static_cast<std::size_t>(o)]) return false;
    const int slot = free_slot();
    if (slot < 0) return false;
    carry(mover, o, start, kSlots[static_cast<std::size_t>(slot)]);
    slot_of_[static_cast<std::size_t>(o)] = slot;
    return true;
  }

  std::vector<int> visible_subset(const std::vector<int>& objects) const {
    std::vector<int> out;
    for (int o : objects) {
      if (!hidden_[static_cast<std::size_t>(o)]) out.push_back(o);
    }
    return out;
  }

  // Both agents wander between the given objects and the back wall, never on
  // the same object and never on each other.
  void no_communication(int start, int end, const std::vector<int>& objects) {
    const std::vector<int> pool = visible_subset(objects);
    std::vector<int> target0(static_cast<std::size_t>(std::max(0, end - start)), -1);
    for (int t = start; t < end;) {
      const int len = std::min(end - t, rng_.uniform_int(8, 20));
      GazeGoal g = away(rng_, 0);
      if (!pool.empty() && rng_.bernoulli(0.6)) {
        g = at_object(pool[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(pool.size()) - 1))]);
      }
      look(0, t, t + len, g);
      for (int k = t; k < t + len; ++k) target0[static_cast<std::size_t>(k - start)] = g.object;
      t += len;
    }
    for (int t = start; t < end;) {
      const int len = std::min(end - t, rng_.uniform_int(8, 20));
      GazeGoal g = away(rng_, 1);
      if (!pool.empty() && rng_.bernoulli(0.6)) {
        std::vector<int> options;
        for (int o : pool) {
          bool clash = false;
          for (int k = t; k < t + len; ++k) clash = clash || target0[static_cast<std::size_t>(k - start)] == o;
          if (!clash) options.push_back(o);
        }
        if (!options.empty()) {
          g = at_object(options[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(options.size()) - 1))]);
        }
      }
      look(1, t, t + len, g);
      t += len;
    }
  }

  // Victim sees the object, looks away while the mover drops it into the
  // container, then checks the old location.
  void first_order_false_belief(ScriptedEvent& ev) {
    const int o = ev.objects.front();
    const int victim = rng_.uniform_int(0, 1);
    const int mover = 1 - victim;
    const int s = ev.start;
    const Vec3 old_location = pos(s, o);
    ev.victim = victim;

    look(victim, s, s + 12, at_object(o));
    look(mover, s, s + 12, away(rng_, mover));
    look(victim, s + 12, s + 46, away(rng_, victim));
    look(mover, s + 12, s + 28, at_object(o));
    carry(mover, o, s + 16, kRim);
    const int drop = s + 16 + kCarryFrames;
    for (int t = drop; t < total_; ++t) {
      positions_[static_cast<std::size_t>(t)][static_cast<std::size_t>(o)] = hidden_spot(hidden_count_);
    }
    ++hidden_count_;
    hidden_[static_cast<std::size_t>(o)] = true;
    slot_of_[static_cast<std::size_t>(o)] = -1;
    look(mover, drop, drop + 4, at_point(kRim));
    look(mover, drop + 4, s + 56, away(rng_, mover));
    look(victim, s + 46, s + 56, at_point(old_location));
    ev.hide_frame = drop;
    ev.discovery_frame = s + 46;

    std::vector<int> rest(ev.objects.begin() + 1, ev.objects.end());
    no_communication(s + 56, ev.end, rest);
  }

  // Leader attends the target; the follower watches the leader, then turns
  // to the same target. The leader never looks back.
  void attention_following(ScriptedEvent& ev) {
    const int o = ev.objects.front();
    const int leader = rng_.uniform_int(0, 1);
    const int follower = 1 - leader;
    const int s = ev.start;
    const int d = ev.end - ev.start;
    const int lead_in = std::min(rng_.uniform_int(0, 4), d / 10);
    const int watch_from = lead_in + std::max(1, std::min(rng_.uniform_int(3, 8), d / 8));
    const int watch_len = std::max(2, std::min(rng_.uniform_int(10, 16), d / 4));
    look(leader, s, s + lead_in, away(rng_, leader));
    look(leader, s + lead_in, ev.end, at_object(o));
    look(follower, s, s + watch_from, away(rng_, follower));
    look(follower, s + watch_from, s + watch_from + watch_len, at_agent());
    look(follower, s + watch_from + watch_len, ev.end, at_object(o));
    const int move_at = watch_from + watch_len + 4;
    const bool want_move = ev.false_belief_order == 2 || rng_.bernoulli(0.3);
    if (want_move && move_at + kCarryFrames + 2 <= d) {
      if (move_to_free_slot(leader, o, s + move_at) && ev.false_belief_order == 2) {
        ev.victim = leader;
        ev.hide_frame = s + move_at;
      }
    }
  }

  // Mutual gaze, the initiator turns to and points at the target while the
  // responder still watches, then both share the target with an occasional
  // check-back glance from the initiator.
  void joint_attention(ScriptedEvent& ev) {
    const int o = ev.objects.front();
    const int initiator = rng_.uniform_int(0, 1);
    const int responder = 1 - initiator;
    const int s = ev.start;
    const int d = ev.end - ev.start;
    const int mutual = std::max(2, std::min(rng_.uniform_int(8, 12), d / 4));
    const int lead = std::max(2, std::min(rng_.uniform_int(8, 12), d / 4));
    look(initiator, s, s + mutual, at_agent());
    look(responder, s, s + mutual, at_agent());
    look(initiator, s + mutual, ev.end, at_object(o));
    point(initiator, s + mutual, s + mutual + lead + 5, o);
    look(responder, s + mutual, s + mutual + lead, at_agent());
    look(responder, s + mutual + lead, ev.end, at_object(o));
    int cursor = mutual + lead;
    const int glance_at = cursor + rng_.uniform_int(6, 10);
    const int glance_len = rng_.uniform_int(4, 7);
    if (glance_at + glance_len + 5 <= d) {
      look(initiator, s + glance_at, s + glance_at + glance_len, at_agent());
      cursor = glance_at + glance_len;
    }
    const int move_at = cursor + 3;
    if (rng_.bernoulli(0.4) && move_at + kCarryFrames + 2 <= d) {
      move_to_free_slot(initiator, o, s + move_at);
    }
  }

  int n_objects_;
  Rng rng_;
  int total_;
  int hidden_count_ = 0;
  std::array<std::vector<GazeGoal>, 2> gaze_;
  std::array<std::vector<int>, 2> point_;
  std::array<std::vector<int>, 2> carry_;
  std::vector<int> slot_of_;
  std::vector<bool> hidden_;
  std::vector<ObjectCategory> categories_;
  std::vector<std::vector<Vec3>> positions_;
};

}  // namespace

void validate(const ScenarioSpec& spec) {
  if (spec.script.empty()) throw ConfigError("scenario script is empty");
  if (spec.object_count < 0 || spec.object_count > static_cast<int>(kSlots.size())) {
    throw ConfigError("object count must be in [0, " + std::to_string(kSlots.size()) + "]");
  }
  if (spec.joint_count < 1) throw ConfigError("joint count must be at least 1");
  if (!(spec.frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
  if (spec.min_segment_length < 1) throw ConfigError("minimum segment length must be positive");
  for (const Vec3& a : kAnchors) {
    if (!spec.room.contains(a) || !spec.room.contains(a + Vec3{0, 0, kHeadHeight})) {
      throw ConfigError("room bounds do not contain the agent stations");
    }
  }
  for (const Vec3& s : kSlots) {
    if (!spec.room.contains(s)) throw ConfigError("room bounds do not contain the object slots");
  }
  int cursor = 0;
  for (std::size_t i = 0; i < spec.script.size(); ++i) {
    const ScriptEntry& e = spec.script[i];
    const std::string where = "script entry " + std::to_string(i);
    if (e.start && *e.start != cursor) {
      throw ConfigError(where + (*e.start < cursor ? " overlaps the previous entry" : " leaves a gap"));
    }
    if (e.duration < spec.min_segment_length) {
      throw ConfigError(where + " is shorter than the minimum segment length");
    }
    for (int o : e.objects) {
      if (o < 0 || o >= spec.object_count) throw ConfigError(where + " references object " + std::to_string(o));
    }
    if (e.kind != EventLabel::NoCommunication && e.objects.empty()) {
      throw ConfigError(where + " needs a target object");
    }
    switch (e.false_belief_order) {
      case 0: break;
      case 1:
        if (e.kind != EventLabel::NoCommunication || e.objects.empty()) {
          throw ConfigError(where + ": first-order false belief needs a NoCommunication event with an object");
        }
        break;
      case 2:
        if (e.kind != EventLabel::AttentionFollowing) {
          throw ConfigError(where + ": second-order false belief needs an AttentionFollowing event");
        }
        break;
      default: throw ConfigError(where + ": false-belief order must be 0, 1 or 2");
    }
    if (e.false_belief_order != 0 && e.duration < kFalseBeliefMinDuration) {
      throw ConfigError(where + " is too short for a false-belief script");
    }
    cursor += e.duration;
  }
}

Simulation simulate(const ScenarioSpec& spec, const AttentionParams& params) {
  validate(spec);
  int total = 0;
  for (const ScriptEntry& e : spec.script) total += e.duration;
  Director director(spec, total);
  std::vector<ScriptedEvent> events;
  int start = 0;
  for (const ScriptEntry& e : spec.script) {
    events.push_back(director.realize(e, start));
    start += e.duration;
  }
  Simulation sim;
  sim.trace = director.render(spec);
  sim.truth = derive_ground_truth_beliefs(sim.trace, events, params);
  return sim;
}

GroundTruth derive_ground_truth_beliefs(const WorldTrace& trace, std::span<const ScriptedEvent> events,
                                        const AttentionParams& params) {
  const int T = trace.length();
  const int N = trace.object_count;
  int cursor = 0;
  for (const ScriptedEvent& e : events) {
    if (e.start != cursor || e.end <= e.start) throw DataError("events do not partition the trace");
    cursor = e.end;
  }
  if (cursor != T) throw DataError("events do not cover the trace");

  GroundTruth gt;
  gt.events.assign(events.begin(), events.end());
  gt.deltas = BeliefTable(T, N);
  gt.mind_states.reserve(static_cast<std::size_t>(T));
  FiveMinds minds;
  std::size_t ev = 0;
  EventContext ctx;
  for (int t = 0; t < T; ++t) {
    while (events[ev].end <= t) ++ev;
    if (events[ev].start == t) ctx = EventContext{events[ev].label, false};
    const WorldFrame& frame = trace.frames[static_cast<std::size_t>(t)];
    const FrameAttention att = FrameAttention::from_targets(gaze_target(frame, 0, trace.occluders, params).entity,
                                                            gaze_target(frame, 1, trace.occluders, params).entity);
    ctx.mutual_seen = ctx.mutual_seen || att.mutual_gaze;
    for (MindId m : kMinds) {
      MindState& state = minds[static_cast<std::size_t>(index(m))];
      for (int o = 0; o < N; ++o) {
        const Vec3 p = frame.objects[static_cast<std::size_t>(o)].position;
        const bool sees = mind_sees(m, frame, att, ctx, trace.occluders, params, p);
        BeliefDelta delta = BeliefDelta::Null;
        const auto it = state.tracked.find(o);
        if (it == state.tracked.end()) {
          if (sees) delta = BeliefDelta::Occur;
        } else if (sees) {
          if (distance(p, it->second) > kLocationTolerance) delta = BeliefDelta::Update;
        } else if (distance(p, it->second) > kLocationTolerance &&
                   mind_sees(m, frame, att, ctx, trace.occluders, params, it->second)) {
          delta = BeliefDelta::Disappear;
        }
        state = apply_delta(std::move(state), o, delta, p);
        gt.deltas.at(m, t, o) = delta;
      }
    }
    gt.mind_states.push_back(minds);
  }
  return gt;
}

ScenarioSpec random_scenario(std::uint64_t seed, const CorpusParams& params) {
  Rng rng(seed);
  ScenarioSpec spec;
  spec.seed = derive_seed(seed, 1);
  spec.object_count = params.object_count;
  const int n_events = rng.uniform_int(params.min_events, params.max_events);

  // Label chain favouring alternation between communicative and quiet spells.
  static constexpr double kTransition[3][3] = {{0.2, 0.4, 0.4}, {0.4, 0.2, 0.4}, {0.5, 0.3, 0.2}};
  std::vector<EventLabel> labels;
  int label = rng.uniform_int(0, 2);
  for (int i = 0; i < n_events; ++i) {
    if (params.object_count == 0) label = 0;
    labels.push_back(static_cast<EventLabel>(label));
    const double u = rng.uniform();
    double acc = 0.0;
    int next = 2;
    for (int j = 0; j < 3; ++j) {
      acc += kTransition[label][j];
      if (u < acc) {
        next = j;
        break;
      }
    }
    label = next;
  }

  const auto pick_index = [&](EventLabel want) {
    std::vector<int> idx;
    for (int i = 0; i < n_events; ++i) {
      if (labels[static_cast<std::size_t>(i)] == want) idx.push_back(i);
    }
    return idx.empty() ? -1 : idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(idx.size()) - 1))];
  };
  const int first_order = rng.bernoulli(params.first_order_rate) ? pick_index(EventLabel::NoCommunication) : -1;
  const int second_order = rng.bernoulli(params.second_order_rate) ? pick_index(EventLabel::AttentionFollowing) : -1;

  std::vector<int> visible;
  for (int o = 0; o < params.object_count; ++o) visible.push_back(o);
  const auto draw = [&](int count) {
    std::vector<int> pool = visible;
    std::vector<int> out;
    while (static_cast<int>(out.size()) < count && !pool.empty()) {
      const int k = rng.uniform_int(0, static_cast<int>(pool.size()) - 1);
      out.push_back(pool[static_cast<std::size_t>(k)]);
      pool.erase(pool.begin() + k);
    }
    return out;
  };

  for (int i = 0; i < n_events; ++i) {
    ScriptEntry e;
    e.kind = labels[static_cast<std::size_t>(i)];
    e.duration = rng.uniform_int(params.min_duration, params.max_duration);
    if (e.kind == EventLabel::NoCommunication) {
      e.objects = draw(2);
      if (i == first_order && !e.objects.empty()) {
        e.false_belief_order = 1;
        e.duration = std::max(e.duration, kFalseBeliefMinDuration + 10);
        visible.erase(std::find(visible.begin(), visible.end(), e.objects.front()));
      }
    } else {
      e.objects = draw(1);
      if (e.objects.empty()) {
        e.kind = EventLabel::NoCommunication;
      } else if (i == second_order) {
        e.false_belief_order = 2;
        e.duration = std::max(e.duration, kFalseBeliefMinDuration + 10);
      }
    }
    spec.script.push_back(std::move(e));
  }
  return spec;
}

ScenarioSpec false_belief_demo(std::uint64_t seed, int object_count) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.object_count = std::max(1, object_count);
  spec.script.push_back({EventLabel::JointAttention, 50, {0}, 0, std::nullopt});
  spec.script.push_back({EventLabel::NoCommunication, 70, {0}, 1, std::nullopt});
  return spec;
}

}  // namespace fmp
