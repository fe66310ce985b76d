#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace skilltrace {

// Signal channels, mirroring the three collection categories: graded
// submissions, participation logs, and chat/feedback queries.
enum class Channel { submission, participation, query };

const char* to_string(Channel channel) noexcept;

// Fixed feature-vector layout for canonical interaction events.
namespace feature {
enum : std::size_t {
  attempts = 0,
  exec_time_ms = 1,
  memory_kb = 2,
  difficulty = 3,
  gap_seconds = 4,
  count = 5,
};
}  // namespace feature

/// One timestamped learner interaction: timestamp t, feature vector z,
/// binary outcome y, plus the item/skill routing metadata.
struct SignalEvent {
  std::string student_id;
  std::int64_t timestamp_ms = 0;
  std::string item_id;
  std::vector<std::string> skill_ids;  // sorted, unique
  int correct = 0;                     // y in {0, 1}
  std::vector<double> features;        // z
  std::vector<bool> feature_present;   // empty means all channels present
  Channel channel = Channel::submission;
};

// Throws Error{Validation} on violated invariants (nonpositive timestamp,
// non-binary outcome, non-finite features, submission event without skills).
void validate(const SignalEvent& event);

// Throws Error{Ordering} when any student's timestamps decrease.
void validate_stream(const std::vector<SignalEvent>& events);

}  // namespace skilltrace
