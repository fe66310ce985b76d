#include <doctest.h>

#include <cmath>

#include "skilltrace/errors.hpp"
#include "skilltrace/flywheel.hpp"
#include "skilltrace/json_io.hpp"
#include "skilltrace/rng.hpp"

using namespace skilltrace;

namespace {

FlywheelState basic_state(const SkillParams& policy, FlywheelConfig config = {}) {
  return make_flywheel_state("u", config, policy);
}

SignalEvent event_for(const std::string& student, std::int64_t ts,
                      std::vector<std::string> skills, int correct) {
  SignalEvent e;
  e.student_id = student;
  e.timestamp_ms = ts;
  e.item_id = "item";
  e.skill_ids = std::move(skills);
  e.correct = correct;
  e.features = {1.0, 100.0, 2048.0, 2.0, 0.0};
  return e;
}

}  // namespace

TEST_CASE("policy loss hand cases") {
  CHECK(policy_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(policy_loss(1.0, 1) == doctest::Approx(0.0).epsilon(1e-6));
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const double p = rng.next_double();
    CHECK(policy_loss(p, 1) ==
          doctest::Approx(policy_loss(1.0 - p, 0)).epsilon(1e-12));
  }
}

TEST_CASE("analytic policy gradient matches central differences") {
  Rng rng(1001);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    BktParams params;
    params.l0 = rng.uniform(0.05, 0.95);
    params.learn = rng.uniform(0.05, 0.95);
    params.slip = rng.uniform(0.05, 0.45);
    params.guess = rng.uniform(0.05, 0.45);
    const double carried = rng.next_double();
    const bool has_observation = rng.bernoulli(0.5);
    const int observed = rng.bernoulli(0.5) ? 1 : 0;

    const PolicyGradient analytic =
        policy_loss_gradient(carried, has_observation, params, observed);

    const double h = 1e-5;
    const auto loss_at = [&](const BktParams& p) {
      const double prior =
          has_observation ? p.learn + carried * (1.0 - p.learn) : p.l0;
      return policy_loss(predict_correct(prior, p), observed);
    };
    const auto fd = [&](auto mutate) {
      BktParams hi = params, lo = params;
      mutate(hi, h);
      mutate(lo, -h);
      return (loss_at(hi) - loss_at(lo)) / (2.0 * h);
    };

    const double g[4] = {analytic.l0, analytic.learn, analytic.slip,
                         analytic.guess};
    const double numeric[4] = {
        fd([](BktParams& p, double d) { p.l0 += d; }),
        fd([](BktParams& p, double d) { p.learn += d; }),
        fd([](BktParams& p, double d) { p.slip += d; }),
        fd([](BktParams& p, double d) { p.guess += d; })};
    for (int k = 0; k < 4; ++k) {
      const double denom = std::max(1.0, std::abs(g[k]));
      CHECK(std::abs(g[k] - numeric[k]) / denom <= 1e-5);
      ++checked;
    }
  }
  CHECK(checked == 4000);
}

TEST_CASE("proximal update hand cases") {
  const std::vector<std::pair<double, double>> unit_box = {{0.0, 1.0}};
  CHECK(proximal_update({0.5}, {0.0}, 0.1, 0.0, unit_box)[0] ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(proximal_update({0.5}, {1.0}, 0.1, 0.0, unit_box)[0] ==
        doctest::Approx(0.4).epsilon(1e-15));
  // Heavy shrinkage pulls toward the box-projected origin.
  CHECK(proximal_update({0.9}, {0.0}, 1.0, 1e9, unit_box)[0] <= 1e-9);

  const BktParams params{0.5, 0.5, 0.25, 0.25};
  const BktParams shrunk = proximal_update(params, PolicyGradient{}, 1.0, 1e9);
  CHECK(shrunk.l0 == doctest::Approx(1e-3));
  CHECK(shrunk.slip == doctest::Approx(1e-3));
}

TEST_CASE("policy parameters stay inside the box under random updates") {
  Rng rng(2002);
  BktParams params{0.4, 0.2, 0.2, 0.2};
  for (int step = 0; step < 10000; ++step) {
    PolicyGradient g;
    g.l0 = rng.uniform(-50.0, 50.0);
    g.learn = rng.uniform(-50.0, 50.0);
    g.slip = rng.uniform(-50.0, 50.0);
    g.guess = rng.uniform(-50.0, 50.0);
    params = proximal_update(params, g, rng.uniform(1e-4, 1.0),
                             rng.uniform(0.0, 10.0));
    CHECK(params.l0 >= 1e-3);
    CHECK(params.l0 <= 0.999);
    CHECK(params.learn >= 1e-3);
    CHECK(params.learn <= 0.999);
    CHECK(params.slip >= 1e-3);
    CHECK(params.slip <= 0.5 - 1e-3);
    CHECK(params.guess >= 1e-3);
    CHECK(params.guess <= 0.5 - 1e-3);
    CHECK(params.slip + params.guess < 1.0);
  }
}

TEST_CASE("recommendation banding") {
  SkillParams policy;
  policy["low"] = BktParams{0.05, 0.2, 0.1, 0.2};
  policy["mid"] = BktParams{0.5, 0.2, 0.1, 0.2};
  policy["high"] = BktParams{0.8, 0.2, 0.1, 0.2};
  const FlywheelState state = basic_state(policy);

  CHECK(recommend(state, "low").tier == Tier::foundational);
  CHECK(recommend(state, "mid").tier == Tier::practice);
  // Exactly at the high threshold: the upper band is inclusive.
  CHECK(recommend(state, "high").tier == Tier::advanced);
}

TEST_CASE("target skill maximizes the engagement weight") {
  SkillParams policy;
  policy["half"] = BktParams{0.5, 0.2, 0.1, 0.2};
  policy["nine"] = BktParams{0.9, 0.2, 0.1, 0.2};
  FlywheelConfig config;
  config.curve = EngagementCurve{2.0, 1.0, 0.5};
  const FlywheelState state = basic_state(policy, config);
  const Recommendation rec = recommend(state, "nine");
  CHECK(rec.target_skill == "half");
  CHECK(rec.engagement == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("step keeps absorbing mastery and bands it as advanced") {
  SkillParams policy;
  policy["s"] = BktParams{1.0, 0.2, 0.0, 0.0};
  FlywheelConfig config;
  config.alpha = 1.0;
  config.window = 1;
  FlywheelState state = basic_state(policy, config);
  const Recommendation rec = step(state, event_for("u", 10, {"s"}, 1));
  CHECK(mastery_estimate(state, "s") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rec.tier == Tier::advanced);
}

TEST_CASE("low mastery bands as foundational") {
  SkillParams policy;
  policy["s"] = BktParams{0.1, 0.2, 0.1, 0.2};
  FlywheelState state = basic_state(policy);
  const Recommendation rec = recommend(state, "s");
  CHECK(rec.tier == Tier::foundational);
}

TEST_CASE("replaying a stream twice gives bit-identical states") {
  SkillParams policy;
  policy["a"] = BktParams{0.3, 0.25, 0.1, 0.2};
  policy["b"] = BktParams{0.6, 0.15, 0.15, 0.25};
  FlywheelConfig config;
  config.regularizer = 0.01;

  Rng rng(3003);
  std::vector<SignalEvent> events;
  for (int i = 0; i < 50; ++i) {
    events.push_back(event_for("u", 100 + i, {rng.bernoulli(0.5) ? "a" : "b"},
                               rng.bernoulli(0.6) ? 1 : 0));
  }
  FlywheelState first = basic_state(policy, config);
  FlywheelState second = basic_state(policy, config);
  for (const auto& e : events) step(first, e);
  for (const auto& e : events) step(second, e);
  CHECK(flywheel_state_to_json(first) == flywheel_state_to_json(second));
}

TEST_CASE("step rejects stale timestamps and unknown skills") {
  SkillParams policy;
  policy["s"] = BktParams{0.3, 0.2, 0.1, 0.2};
  FlywheelState state = basic_state(policy);
  step(state, event_for("u", 100, {"s"}, 1));
  try {
    step(state, event_for("u", 50, {"s"}, 1));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Ordering);
  }
  try {
    step(state, event_for("u", 200, {"other"}, 1));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Lookup);
  }
  try {
    step(state, event_for("someone_else", 200, {"s"}, 1));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
}

TEST_CASE("vanishing learning rate bounds the policy movement") {
  SkillParams policy;
  policy["s"] = BktParams{0.3, 0.2, 0.1, 0.2};
  for (double eta : {1e-2, 1e-4, 1e-6}) {
    FlywheelConfig config;
    config.learning_rate = eta;
    config.regularizer = 0.0;
    FlywheelState state = basic_state(policy, config);
    const BktParams before = state.policy.at("s");
    const PolicyGradient g = policy_loss_gradient(0.0, false, before, 0);
    step(state, event_for("u", 10, {"s"}, 0));
    const BktParams after = state.policy.at("s");
    const double moved = std::sqrt(
        std::pow(after.l0 - before.l0, 2) + std::pow(after.learn - before.learn, 2) +
        std::pow(after.slip - before.slip, 2) +
        std::pow(after.guess - before.guess, 2));
    const double bound = eta * std::sqrt(g.l0 * g.l0 + g.learn * g.learn +
                                         g.slip * g.slip + g.guess * g.guess);
    CHECK(moved <= bound + 1e-12);
  }
}

TEST_CASE("flywheel state JSON round-trips") {
  SkillParams policy;
  policy["a"] = BktParams{0.3, 0.25, 0.1, 0.2};
  FlywheelState state = basic_state(policy);
  step(state, event_for("u", 10, {"a"}, 1));
  step(state, event_for("u", 20, {"a"}, 0));
  const std::string text = flywheel_state_to_json(state);
  const FlywheelState restored = flywheel_state_from_json(text);
  CHECK(flywheel_state_to_json(restored) == text);
  // The restored state continues identically.
  FlywheelState continued = restored;
  FlywheelState original = state;
  const Recommendation ra = step(original, event_for("u", 30, {"a"}, 1));
  const Recommendation rb = step(continued, event_for("u", 30, {"a"}, 1));
  CHECK(ra.mastery == rb.mastery);
  CHECK(flywheel_state_to_json(original) == flywheel_state_to_json(continued));
}
