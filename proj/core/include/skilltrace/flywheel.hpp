#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "skilltrace/allocation.hpp"
#include "skilltrace/bkt.hpp"
#include "skilltrace/signal_pipeline.hpp"
#include "skilltrace/types.hpp"

namespace skilltrace {

enum class Tier { foundational, practice, advanced };

const char* to_string(Tier tier) noexcept;

struct Recommendation {
  std::string student_id;
  Tier tier = Tier::practice;
  std::string target_skill;  // tracked skill with maximal engagement weight
  double mastery = 0.0;      // mastery of the banded skill
  double engagement = 0.0;   // engagement weight of the target skill
};

struct FlywheelConfig {
  double alpha = 0.3;
  std::size_t window = 10;
  double learning_rate = 0.05;  // eta > 0
  double regularizer = 0.0;     // lambda >= 0
  double low_threshold = 0.4;
  double high_threshold = 0.8;
  EngagementCurve curve;  // drives target-skill selection
};

void validate(const FlywheelConfig& config);

// Carried latent per skill: the posterior of the last observation before its
// learn transition, so the next prior can be formed under the current policy.
struct SkillTrace {
  double posterior = 0.0;
  std::int64_t observations = 0;
};

/// Per-student closed-loop state: smoothed signals, per-skill mastery latents,
/// the per-skill policy parameters, and the banding thresholds (the mutable
/// part of the policy vector together with the per-skill parameters).
struct FlywheelState {
  std::string student_id;
  FlywheelConfig config;
  SmootherState smoother;
  std::vector<double> aggregated;  // window mean after the latest step
  std::map<std::string, BktParams> policy;
  std::map<std::string, SkillTrace> skills;
  double low_threshold = 0.4;   // live copies; prox-updated
  double high_threshold = 0.8;
  std::int64_t event_count = 0;
  std::int64_t last_timestamp_ms = 0;
  std::string last_recommendation;
};

FlywheelState make_flywheel_state(std::string student_id,
                                  const FlywheelConfig& config,
                                  const SkillParams& initial_policy);

// l0 before any observation, otherwise the learn-transitioned last posterior
// under the current policy. Throws Error{Lookup} for untracked skills.
double mastery_estimate(const FlywheelState& state, const std::string& skill);

// Binary cross-entropy with the prediction clipped to [1e-9, 1 - 1e-9].
double policy_loss(double predicted, int observed);

struct PolicyGradient {
  double l0 = 0.0;
  double learn = 0.0;
  double slip = 0.0;
  double guess = 0.0;
};

// Gradient of policy_loss through prior -> predict_correct, holding the
// carried posterior fixed: before any observation the prior is l0; afterwards
// prior = posterior + (1 - posterior) * learn.
PolicyGradient policy_loss_gradient(double carried_posterior,
                                    bool has_observation,
                                    const BktParams& params, int observed);

// (policy - eta * gradient) / (1 + eta * lambda), then projection onto the
// per-coordinate [lo, hi] boxes.
std::vector<double> proximal_update(
    const std::vector<double>& policy, const std::vector<double>& gradient,
    double eta, double lambda,
    const std::vector<std::pair<double, double>>& box);

// Convenience overload on the BKT parameter box (probabilities in
// [1e-3, 1 - 1e-3], slip/guess capped below 0.5).
BktParams proximal_update(const BktParams& params, const PolicyGradient& gradient,
                          double eta, double lambda);

// Banding rule on the skill's mastery (low/high thresholds; the upper band is
// inclusive), target skill by maximal engagement weight.
Recommendation recommend(const FlywheelState& state, const std::string& skill);

// One closed-loop iteration: smooth + aggregate, per-skill Bayes update,
// recommendation, then the proximal policy update and latent overwrite.
Recommendation step(FlywheelState& state, const SignalEvent& event);

}  // namespace skilltrace
