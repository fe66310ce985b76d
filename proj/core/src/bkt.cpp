#include "skilltrace/bkt.hpp"

#include <cmath>
#include <ostream>

#include "skilltrace/csv.hpp"
#include "skilltrace/errors.hpp"

namespace skilltrace {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::Domain,
                std::string(name) + " must lie in [0, 1], got " +
                    std::to_string(p));
  }
}

double clamp01(double p) {
  if (p < 0.0) return 0.0;
  if (p > 1.0) return 1.0;
  return p;
}

}  // namespace

void validate(const BktParams& params) {
  const double lo = kBktParamEps;
  const double hi = 1.0 - kBktParamEps;
  const struct { const char* name; double value; } fields[] = {
      {"l0", params.l0}, {"learn", params.learn},
      {"slip", params.slip}, {"guess", params.guess}};
  for (const auto& f : fields) {
    if (!(f.value >= lo && f.value <= hi)) {
      throw Error(ErrorKind::Domain,
                  std::string("BKT parameter ") + f.name + " = " +
                      std::to_string(f.value) + " outside [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
  if (!(params.slip + params.guess < 1.0)) {
    throw Error(ErrorKind::Domain, "slip + guess must stay below 1");
  }
}

double posterior_update(double prior, const BktParams& params, int observed) {
  check_probability(prior, "prior");
  double numerator, denominator;
  if (observed) {
    numerator = prior * (1.0 - params.slip);
    denominator = numerator + (1.0 - prior) * params.guess;
  } else {
    numerator = prior * params.slip;
    denominator = numerator + (1.0 - prior) * (1.0 - params.guess);
  }
  if (denominator <= 0.0) {
    throw Error(ErrorKind::Domain,
                "degenerate BKT parameters: zero observation probability");
  }
  return clamp01(numerator / denominator);
}

double learn_transition(double posterior, const BktParams& params) {
  check_probability(posterior, "posterior");
  return clamp01(posterior + (1.0 - posterior) * params.learn);
}

double predict_correct(double p_mastery, const BktParams& params) {
  check_probability(p_mastery, "p_mastery");
  return p_mastery * (1.0 - params.slip) + (1.0 - p_mastery) * params.guess;
}

MasteryTrajectory trace_student(const std::vector<SignalEvent>& events,
                                const SkillParams& params) {
  MasteryTrajectory trajectory;
  if (events.empty()) return trajectory;

  std::map<std::string, MasteryState> states;
  std::int64_t last_ts = 0;

  for (std::size_t e = 0; e < events.size(); ++e) {
    const SignalEvent& event = events[e];
    validate(event);
    if (event.student_id != events.front().student_id) {
      throw Error(ErrorKind::Validation,
                  "trace_student received events from multiple students");
    }
    if (e > 0 && event.timestamp_ms < last_ts) {
      throw Error(ErrorKind::Ordering,
                  "events out of timestamp order at index " + std::to_string(e));
    }
    last_ts = event.timestamp_ms;

    const std::size_t first_record = trajectory.records.size();
    double prediction_sum = 0.0;
    for (const std::string& skill : event.skill_ids) {
      auto pit = params.find(skill);
      if (pit == params.end()) {
        throw Error(ErrorKind::Lookup, "no BKT parameters for skill " + skill);
      }
      const BktParams& p = pit->second;
      auto [sit, inserted] = states.try_emplace(skill, MasteryState{skill, p.l0, 0});
      MasteryState& state = sit->second;

      TrajectoryRecord record;
      record.timestamp_ms = event.timestamp_ms;
      record.event_index = e;
      record.skill_id = skill;
      record.prior = state.p_mastery;
      record.predicted_correct = predict_correct(state.p_mastery, p);
      record.observed = event.correct;
      record.posterior = posterior_update(state.p_mastery, p, event.correct);
      prediction_sum += record.predicted_correct;

      state.p_mastery = learn_transition(record.posterior, p);
      state.observation_count += 1;
      trajectory.records.push_back(std::move(record));
    }

    const double event_prediction =
        prediction_sum / static_cast<double>(event.skill_ids.size());
    for (std::size_t r = first_record; r < trajectory.records.size(); ++r) {
      trajectory.records[r].event_predicted = event_prediction;
    }
  }
  return trajectory;
}

std::vector<std::pair<double, int>> event_predictions(
    const MasteryTrajectory& trajectory) {
  std::vector<std::pair<double, int>> out;
  std::size_t last_event = SIZE_MAX;
  for (const TrajectoryRecord& record : trajectory.records) {
    if (record.event_index != last_event) {
      out.emplace_back(record.event_predicted, record.observed);
      last_event = record.event_index;
    }
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const MasteryTrajectory& trajectory) {
  csv::write_row(out, {"timestamp_ms", "event_index", "skill_id", "prior",
                       "posterior", "predicted_correct", "observed",
                       "event_predicted"});
  for (const TrajectoryRecord& r : trajectory.records) {
    csv::write_row(out, {std::to_string(r.timestamp_ms),
                         std::to_string(r.event_index), r.skill_id,
                         csv::format_double(r.prior),
                         csv::format_double(r.posterior),
                         csv::format_double(r.predicted_correct),
                         std::to_string(r.observed),
                         csv::format_double(r.event_predicted)});
  }
}

}  // namespace skilltrace
