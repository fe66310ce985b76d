#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "skilltrace/types.hpp"

namespace skilltrace {

// Probability box for all four parameters.
constexpr double kBktParamEps = 1e-3;

/// Two-state knowledge-tracing parameters for one skill: initial mastery,
/// learn, slip and guess probabilities. Each lives in
/// [kBktParamEps, 1 - kBktParamEps] and slip + guess must stay below 1,
/// which keeps the posterior update monotone in the evidence.
struct BktParams {
  double l0 = 0.2;
  double learn = 0.15;
  double slip = 0.1;
  double guess = 0.2;
};

void validate(const BktParams& params);

using SkillParams = std::map<std::string, BktParams>;

/// Evolving mastery estimate for one (student, skill) pair.
struct MasteryState {
  std::string skill_id;
  double p_mastery = 0.0;
  std::int64_t observation_count = 0;
};

// Bayes posterior of mastery given one binary observation.
double posterior_update(double prior, const BktParams& params, int observed);

// posterior + (1 - posterior) * learn; the no-forgetting transition.
double learn_transition(double posterior, const BktParams& params);

// p * (1 - slip) + (1 - p) * guess; probability of a correct response.
double predict_correct(double p_mastery, const BktParams& params);

/// Audit record for one (event, skill) update: mastery before the event,
/// the prediction made with it, and the posterior after the observation.
/// event_predicted is the event-level prediction (mean over tagged skills).
struct TrajectoryRecord {
  std::int64_t timestamp_ms = 0;
  std::size_t event_index = 0;
  std::string skill_id;
  double prior = 0.0;
  double posterior = 0.0;
  double predicted_correct = 0.0;
  int observed = 0;
  double event_predicted = 0.0;
};

struct MasteryTrajectory {
  std::vector<TrajectoryRecord> records;
};

// Replays one student's ordered events through predict -> posterior ->
// transition per tagged skill. Throws Error{Lookup} for a skill without
// parameters and Error{Ordering} for decreasing timestamps.
MasteryTrajectory trace_student(const std::vector<SignalEvent>& events,
                                const SkillParams& params);

// (event-level prediction, observed outcome) per event, in event order.
std::vector<std::pair<double, int>> event_predictions(
    const MasteryTrajectory& trajectory);

// One CSV row per (event, skill) record.
void write_trajectory_csv(std::ostream& out, const MasteryTrajectory& trajectory);

}  // namespace skilltrace
