#include "fmp/labels.hpp"

#include <string>

#include "fmp/error.hpp"

namespace fmp {

std::string_view to_string(EventLabel e) {
  switch (e) {
    case EventLabel::NoCommunication: return "NoCommunication";
    case EventLabel::AttentionFollowing: return "AttentionFollowing";
    case EventLabel::JointAttention: return "JointAttention";
  }
  return "?";
}

std::string_view short_name(EventLabel e) {
  switch (e) {
    case EventLabel::NoCommunication: return "N";
    case EventLabel::AttentionFollowing: return "AF";
    case EventLabel::JointAttention: return "JA";
  }
  return "?";
}

std::string_view to_string(MindId m) {
  switch (m) {
    case MindId::M1: return "m1";
    case MindId::M2: return "m2";
    case MindId::M12: return "m12";
    case MindId::M21: return "m21";
    case MindId::MC: return "mc";
  }
  return "?";
}

std::string_view to_string(BeliefDelta d) {
  switch (d) {
    case BeliefDelta::Occur: return "occur";
    case BeliefDelta::Disappear: return "disappear";
    case BeliefDelta::Update: return "update";
    case BeliefDelta::Null: return "null";
  }
  return "?";
}

EventLabel parse_event_label(std::string_view s) {
  for (EventLabel e : kEventLabels) {
    if (s == to_string(e) || s == short_name(e)) return e;
  }
  throw ConfigError("unknown event label '" + std::string(s) + "'");
}

MindId parse_mind(std::string_view s) {
  for (MindId m : kMinds) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown mind '" + std::string(s) + "'");
}

BeliefDelta parse_delta(std::string_view s) {
  for (BeliefDelta d : kDeltas) {
    if (s == to_string(d) || (s.size() == 1 && s[0] - '0' == index(d))) return d;
  }
  throw ConfigError("unknown belief delta '" + std::string(s) + "'");
}

}  // namespace fmp
