#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace fmp {

enum class EventLabel : std::uint8_t { NoCommunication = 0, AttentionFollowing = 1, JointAttention = 2 };

inline constexpr int kNumEventLabels = 3;
inline constexpr std::array<EventLabel, kNumEventLabels> kEventLabels = {
    EventLabel::NoCommunication, EventLabel::AttentionFollowing, EventLabel::JointAttention};

/// The five minds: each agent's own mind, each agent's model of the other, and the common mind.
enum class MindId : std::uint8_t { M1 = 0, M2 = 1, M12 = 2, M21 = 3, MC = 4 };

inline constexpr int kNumMinds = 5;
inline constexpr std::array<MindId, kNumMinds> kMinds = {MindId::M1, MindId::M2, MindId::M12, MindId::M21,
                                                         MindId::MC};

/// Per-object belief change, coded 0..3 as occur, disappear, update, null.
enum class BeliefDelta : std::uint8_t { Occur = 0, Disappear = 1, Update = 2, Null = 3 };

inline constexpr int kNumDeltas = 4;
inline constexpr std::array<BeliefDelta, kNumDeltas> kDeltas = {BeliefDelta::Occur, BeliefDelta::Disappear,
                                                                 BeliefDelta::Update, BeliefDelta::Null};

constexpr int index(EventLabel e) { return static_cast<int>(e); }
constexpr int index(MindId m) { return static_cast<int>(m); }
constexpr int index(BeliefDelta d) { return static_cast<int>(d); }

std::string_view to_string(EventLabel e);
std::string_view to_string(MindId m);
std::string_view to_string(BeliefDelta d);

/// Short form used in compact dumps: N, AF, JA.
std::string_view short_name(EventLabel e);

/// Accepts the long names and the short forms; throws ConfigError otherwise.
EventLabel parse_event_label(std::string_view s);
MindId parse_mind(std::string_view s);
BeliefDelta parse_delta(std::string_view s);

}  // namespace fmp
