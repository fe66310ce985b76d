#pragma once

#include <cstddef>
#include <deque>
#include <vector>

namespace skilltrace {

/// Exponential-smoothing state for one student's ordered event stream.
/// Holds the smoothing factor alpha, the aggregation window W, the last
/// smoothed vector and a ring buffer of the most recent W smoothed vectors.
struct SmootherState {
  double alpha = 0.3;
  std::size_t window = 10;
  std::vector<double> last_smoothed;       // empty until the first event seeds it
  std::deque<std::vector<double>> buffer;  // length <= window
  bool initialized = false;
};

void validate(const SmootherState& state);

// smoothed = alpha * raw + (1 - alpha) * previous. The first vector passes
// through unchanged and seeds the state. Throws Error{Shape} on a
// dimensionality mismatch with the seeded state.
std::vector<double> smooth(SmootherState& state, const std::vector<double>& raw);

// Per-channel arithmetic mean over the most recent min(window, available)
// smoothed vectors. Throws Error{InsufficientData} on an empty buffer.
std::vector<double> aggregate_window(const SmootherState& state);

// Per-column z-score over rows using the population standard deviation;
// zero-variance columns map to all-zeros. Ragged input is a shape error.
std::vector<std::vector<double>> normalize(
    const std::vector<std::vector<double>>& rows);

}  // namespace skilltrace
