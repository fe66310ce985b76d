#include "skilltrace/flywheel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skilltrace/errors.hpp"

namespace skilltrace {

namespace {

constexpr double kLossClip = 1e-9;
constexpr double kProbLo = kBktParamEps;
constexpr double kProbHi = 1.0 - kBktParamEps;
constexpr double kSlipGuessHi = 0.5 - kBktParamEps;

double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

double clip_prediction(double p) { return clamp(p, kLossClip, 1.0 - kLossClip); }

}  // namespace

const char* to_string(Tier tier) noexcept {
  switch (tier) {
    case Tier::foundational: return "foundational";
    case Tier::practice: return "practice";
    case Tier::advanced: return "advanced";
  }
  return "unknown";
}

void validate(const FlywheelConfig& config) {
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    throw Error(ErrorKind::Domain, "alpha must lie in [0, 1]");
  }
  if (config.window < 1) {
    throw Error(ErrorKind::Domain, "window must be >= 1");
  }
  if (!(config.learning_rate > 0.0)) {
    throw Error(ErrorKind::Domain, "learning rate must be positive");
  }
  if (!(config.regularizer >= 0.0)) {
    throw Error(ErrorKind::Domain, "regularizer must be >= 0");
  }
  if (!(config.low_threshold >= 0.0 && config.high_threshold <= 1.0 &&
        config.low_threshold <= config.high_threshold)) {
    throw Error(ErrorKind::Domain, "banding thresholds must satisfy 0 <= low <= high <= 1");
  }
  validate(config.curve);
}

FlywheelState make_flywheel_state(std::string student_id,
                                  const FlywheelConfig& config,
                                  const SkillParams& initial_policy) {
  validate(config);
  if (initial_policy.empty()) {
    throw Error(ErrorKind::Validation, "flywheel needs at least one tracked skill");
  }
  FlywheelState state;
  state.student_id = std::move(student_id);
  state.config = config;
  state.smoother.alpha = config.alpha;
  state.smoother.window = config.window;
  state.low_threshold = config.low_threshold;
  state.high_threshold = config.high_threshold;
  for (const auto& [skill, params] : initial_policy) {
    // Boundary probabilities (deterministic skills) are accepted as initial
    // policy; every proximal update lands inside the box regardless.
    for (double p : {params.l0, params.learn, params.slip, params.guess}) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorKind::Domain,
                    "policy probabilities for " + skill + " must lie in [0, 1]");
      }
    }
    state.policy.emplace(skill, params);
    state.skills.emplace(skill, SkillTrace{});
  }
  return state;
}

double mastery_estimate(const FlywheelState& state, const std::string& skill) {
  auto pit = state.policy.find(skill);
  auto sit = state.skills.find(skill);
  if (pit == state.policy.end() || sit == state.skills.end()) {
    throw Error(ErrorKind::Lookup, "skill " + skill + " is not tracked");
  }
  if (sit->second.observations == 0) return pit->second.l0;
  return learn_transition(sit->second.posterior, pit->second);
}

double policy_loss(double predicted, int observed) {
  if (observed != 0 && observed != 1) {
    throw Error(ErrorKind::Validation, "observed outcome must be 0 or 1");
  }
  const double p = clip_prediction(predicted);
  return observed == 1 ? -std::log(p) : -std::log(1.0 - p);
}

PolicyGradient policy_loss_gradient(double carried_posterior,
                                    bool has_observation,
                                    const BktParams& params, int observed) {
  const double prior = has_observation
                           ? carried_posterior + (1.0 - carried_posterior) * params.learn
                           : params.l0;
  const double raw = predict_correct(prior, params);
  const double p = clip_prediction(raw);
  // d BCE / d p at the clipped prediction.
  const double dl_dp = observed == 1 ? -1.0 / p : 1.0 / (1.0 - p);
  const double dp_dprior = (1.0 - params.slip) - params.guess;
  const double dl_dprior = dl_dp * dp_dprior;

  PolicyGradient g;
  g.l0 = has_observation ? 0.0 : dl_dprior;
  g.learn = has_observation ? dl_dprior * (1.0 - carried_posterior) : 0.0;
  g.slip = dl_dp * (-prior);
  g.guess = dl_dp * (1.0 - prior);
  return g;
}

std::vector<double> proximal_update(
    const std::vector<double>& policy, const std::vector<double>& gradient,
    double eta, double lambda,
    const std::vector<std::pair<double, double>>& box) {
  if (policy.size() != gradient.size() || policy.size() != box.size()) {
    throw Error(ErrorKind::Shape, "proximal update shape mismatch");
  }
  if (!(eta > 0.0) || !(lambda >= 0.0)) {
    throw Error(ErrorKind::Domain, "require eta > 0 and lambda >= 0");
  }
  std::vector<double> out(policy.size());
  const double shrink = 1.0 + eta * lambda;
  for (std::size_t i = 0; i < policy.size(); ++i) {
    out[i] = clamp((policy[i] - eta * gradient[i]) / shrink, box[i].first,
                   box[i].second);
  }
  return out;
}

BktParams proximal_update(const BktParams& params, const PolicyGradient& gradient,
                          double eta, double lambda) {
  const std::vector<double> updated = proximal_update(
      {params.l0, params.learn, params.slip, params.guess},
      {gradient.l0, gradient.learn, gradient.slip, gradient.guess}, eta, lambda,
      {{kProbLo, kProbHi},
       {kProbLo, kProbHi},
       {kProbLo, kSlipGuessHi},
       {kProbLo, kSlipGuessHi}});
  return BktParams{updated[0], updated[1], updated[2], updated[3]};
}

Recommendation recommend(const FlywheelState& state, const std::string& skill) {
  const double mastery = mastery_estimate(state, skill);

  Recommendation rec;
  rec.student_id = state.student_id;
  rec.mastery = mastery;
  if (mastery < state.low_threshold) {
    rec.tier = Tier::foundational;
  } else if (mastery < state.high_threshold) {
    rec.tier = Tier::practice;
  } else {
    rec.tier = Tier::advanced;  // upper band is inclusive
  }

  // Target: tracked skill with maximal engagement weight; ties keep the
  // lexicographically smallest id (map order).
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [id, trace] : state.skills) {
    const double weight =
        engagement_weight(mastery_estimate(state, id), state.config.curve);
    if (weight > best) {
      best = weight;
      rec.target_skill = id;
    }
  }
  rec.engagement = best;
  return rec;
}

Recommendation step(FlywheelState& state, const SignalEvent& event) {
  validate(event);
  if (event.student_id != state.student_id) {
    throw Error(ErrorKind::Validation,
                "event for student " + event.student_id +
                    " fed to the flywheel of " + state.student_id);
  }
  if (event.timestamp_ms < state.last_timestamp_ms) {
    throw Error(ErrorKind::Ordering,
                "stale timestamp " + std::to_string(event.timestamp_ms));
  }
  for (const std::string& skill : event.skill_ids) {
    if (!state.policy.count(skill)) {
      throw Error(ErrorKind::Lookup, "skill " + skill + " is not tracked");
    }
  }

  // Signal processing: smooth, then refresh the windowed aggregate that the
  // latent record carries.
  smooth(state.smoother, event.features);
  state.aggregated = aggregate_window(state.smoother);

  // Knowledge-state update; capture the pre-update latents for the gradients.
  struct Captured {
    std::string skill;
    double carried = 0.0;
    bool has_observation = false;
    PolicyGradient gradient;
  };
  std::vector<Captured> captured;
  captured.reserve(event.skill_ids.size());
  for (const std::string& skill : event.skill_ids) {
    const BktParams& params = state.policy.at(skill);
    SkillTrace& trace = state.skills.at(skill);

    Captured c;
    c.skill = skill;
    c.carried = trace.posterior;
    c.has_observation = trace.observations > 0;
    captured.push_back(c);

    const double prior = mastery_estimate(state, skill);
    trace.posterior = posterior_update(prior, params, event.correct);
    trace.observations += 1;
  }

  // Recommendation before the model update, as in the loop's step order.
  const Recommendation rec = recommend(state, event.skill_ids.front());

  // Proximal policy update for the event's skills, then the shared thresholds.
  for (const Captured& c : captured) {
    const BktParams& params = state.policy.at(c.skill);
    const PolicyGradient gradient = policy_loss_gradient(
        c.carried, c.has_observation, params, event.correct);
    state.policy[c.skill] = proximal_update(params, gradient,
                                            state.config.learning_rate,
                                            state.config.regularizer);
  }
  const double shrink =
      1.0 + state.config.learning_rate * state.config.regularizer;
  state.low_threshold = clamp(state.low_threshold / shrink, 0.0, 1.0);
  state.high_threshold = clamp(state.high_threshold / shrink, 0.0, 1.0);

  // Latent overwrite.
  state.event_count += 1;
  state.last_timestamp_ms = event.timestamp_ms;
  state.last_recommendation = rec.target_skill;
  return rec;
}

}  // namespace skilltrace
