#include "skilltrace/types.hpp"

#include <cmath>
#include <unordered_map>

#include "skilltrace/errors.hpp"

namespace skilltrace {

const char* to_string(Channel channel) noexcept {
  switch (channel) {
    case Channel::submission: return "submission";
    case Channel::participation: return "participation";
    case Channel::query: return "query";
  }
  return "unknown";
}

void validate(const SignalEvent& event) {
  if (event.student_id.empty()) {
    throw Error(ErrorKind::Validation, "event has empty student_id");
  }
  if (event.timestamp_ms <= 0) {
    throw Error(ErrorKind::Validation,
                "event timestamp must be strictly positive, got " +
                    std::to_string(event.timestamp_ms));
  }
  if (event.correct != 0 && event.correct != 1) {
    throw Error(ErrorKind::Validation, "event outcome must be 0 or 1");
  }
  for (double v : event.features) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::Validation, "event feature is not finite");
    }
  }
  if (!event.feature_present.empty() &&
      event.feature_present.size() != event.features.size()) {
    throw Error(ErrorKind::Shape, "feature presence mask length mismatch");
  }
  if (event.channel == Channel::submission && event.skill_ids.empty()) {
    throw Error(ErrorKind::Validation,
                "submission event for student " + event.student_id +
                    " carries no skill ids");
  }
}

void validate_stream(const std::vector<SignalEvent>& events) {
  std::unordered_map<std::string, std::int64_t> last_seen;
  for (const SignalEvent& event : events) {
    validate(event);
    auto [it, inserted] = last_seen.try_emplace(event.student_id, event.timestamp_ms);
    if (!inserted) {
      if (event.timestamp_ms < it->second) {
        throw Error(ErrorKind::Ordering,
                    "timestamps for student " + event.student_id + " decrease");
      }
      it->second = event.timestamp_ms;
    }
  }
}

}  // namespace skilltrace
