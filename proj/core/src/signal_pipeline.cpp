#include "skilltrace/signal_pipeline.hpp"

#include <cmath>
#include <string>

#include "skilltrace/errors.hpp"

namespace skilltrace {

void validate(const SmootherState& state) {
  if (!(state.alpha >= 0.0 && state.alpha <= 1.0)) {
    throw Error(ErrorKind::Domain, "smoothing factor must lie in [0, 1]");
  }
  if (state.window < 1) {
    throw Error(ErrorKind::Domain, "window size must be >= 1");
  }
  if (state.buffer.size() > state.window) {
    throw Error(ErrorKind::Validation, "smoother buffer exceeds window");
  }
}

std::vector<double> smooth(SmootherState& state, const std::vector<double>& raw) {
  validate(state);
  for (double v : raw) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::Validation, "raw feature is not finite");
    }
  }

  std::vector<double> smoothed;
  if (!state.initialized) {
    smoothed = raw;  // first event seeds the recursion
  } else {
    if (raw.size() != state.last_smoothed.size()) {
      throw Error(ErrorKind::Shape,
                  "feature dimension changed from " +
                      std::to_string(state.last_smoothed.size()) + " to " +
                      std::to_string(raw.size()));
    }
    smoothed.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      smoothed[i] = state.alpha * raw[i] + (1.0 - state.alpha) * state.last_smoothed[i];
    }
  }

  state.last_smoothed = smoothed;
  state.initialized = true;
  state.buffer.push_back(smoothed);
  while (state.buffer.size() > state.window) state.buffer.pop_front();
  return smoothed;
}

std::vector<double> aggregate_window(const SmootherState& state) {
  if (state.buffer.empty()) {
    throw Error(ErrorKind::InsufficientData, "no signal yet: smoother buffer is empty");
  }
  const std::size_t dim = state.buffer.back().size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& vec : state.buffer) {
    for (std::size_t i = 0; i < dim; ++i) mean[i] += vec[i];
  }
  const double inv = 1.0 / static_cast<double>(state.buffer.size());
  for (double& v : mean) v *= inv;
  return mean;
}

std::vector<std::vector<double>> normalize(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  for (const auto& row : rows) {
    if (row.size() != cols) {
      throw Error(ErrorKind::Shape, "ragged feature matrix");
    }
  }

  const double n = static_cast<double>(rows.size());
  std::vector<std::vector<double>> out(rows.size(), std::vector<double>(cols, 0.0));
  for (std::size_t c = 0; c < cols; ++c) {
    double mean = 0.0;
    for (const auto& row : rows) mean += row[c];
    mean /= n;
    double var = 0.0;
    for (const auto& row : rows) {
      const double d = row[c] - mean;
      var += d * d;
    }
    var /= n;  // population variance
    if (var <= 0.0) continue;  // zero-variance column stays all-zeros
    const double inv_std = 1.0 / std::sqrt(var);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out[r][c] = (rows[r][c] - mean) * inv_std;
    }
  }
  return out;
}

}  // namespace skilltrace
