#include "skilltrace/json_io.hpp"

#include <json.hpp>

#include "skilltrace/errors.hpp"

namespace skilltrace {

namespace {

using json = nlohmann::ordered_json;

json parse(const std::string& text, const char* what) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorKind::Validation, std::string("malformed JSON for ") + what);
  }
  return doc;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const char* where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) known = true;
    }
    if (!known) {
      throw Error(ErrorKind::Validation,
                  std::string("unknown key \"") + key + "\" in " + where);
    }
  }
}

double number_at(const json& obj, const char* key, const char* where) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw Error(ErrorKind::Validation,
                std::string(where) + " needs numeric \"" + key + "\"");
  }
  return obj[key].get<double>();
}

json params_node(const BktParams& p) {
  return json{{"l0", p.l0}, {"learn", p.learn}, {"slip", p.slip}, {"guess", p.guess}};
}

BktParams params_from_node(const json& node, const char* where) {
  if (!node.is_object()) {
    throw Error(ErrorKind::Validation, std::string(where) + " must be an object");
  }
  reject_unknown(node, {"l0", "learn", "slip", "guess"}, where);
  BktParams p;
  p.l0 = number_at(node, "l0", where);
  p.learn = number_at(node, "learn", where);
  p.slip = number_at(node, "slip", where);
  p.guess = number_at(node, "guess", where);
  validate(p);
  return p;
}

json curve_node(const EngagementCurve& curve) {
  return json{{"sharpness", curve.sharpness},
              {"peak", curve.peak},
              {"target", curve.target}};
}

EngagementCurve curve_from_node(const json& node, const char* where) {
  reject_unknown(node, {"sharpness", "peak", "target"}, where);
  EngagementCurve curve;
  curve.sharpness = number_at(node, "sharpness", where);
  curve.peak = number_at(node, "peak", where);
  curve.target = number_at(node, "target", where);
  validate(curve);
  return curve;
}

}  // namespace

std::string params_to_json(const SkillParams& params) {
  json doc = json::object();
  for (const auto& [skill, p] : params) {
    doc[skill] = params_node(p);
  }
  return doc.dump(2) + "\n";
}

SkillParams params_from_json(const std::string& text) {
  const json doc = parse(text, "skill parameters");
  if (!doc.is_object()) {
    throw Error(ErrorKind::Validation, "skill parameters must be a JSON object");
  }
  SkillParams params;
  for (const auto& [skill, node] : doc.items()) {
    params.emplace(skill, params_from_node(node, ("skill " + skill).c_str()));
  }
  return params;
}

std::string metric_report_to_json(const MetricReport& report) {
  json doc;
  doc["accuracy"] = report.accuracy;
  if (report.auc_roc.has_value()) {
    doc["auc_roc"] = *report.auc_roc;
  } else {
    doc["auc_roc"] = nullptr;
  }
  if (report.pr_auc.has_value()) {
    doc["pr_auc"] = *report.pr_auc;
  } else {
    doc["pr_auc"] = nullptr;
  }
  doc["rmse"] = report.rmse;
  doc["nll"] = report.nll;
  doc["n"] = report.n;
  doc["positives"] = report.positives;
  return doc.dump(2) + "\n";
}

std::string problem_to_json(const AllocationProblem& problem) {
  json doc;
  doc["name"] = problem.name;
  doc["sessions"] = problem.sessions;
  doc["resources"] = problem.resources;
  doc["budgets"] = problem.budgets;
  doc["volatility"] = problem.volatility;
  doc["initial_sentiment"] = problem.initial_sentiment;
  doc["objective"] = to_string(problem.mode);
  json influence;
  influence["kind"] = to_string(problem.influence.kind);
  influence["exponent"] = problem.influence.exponent;
  influence["weights"] = problem.influence.weights;
  if (problem.influence.weights_clamped) influence["weights_clamped"] = true;
  doc["influence"] = std::move(influence);
  doc["precedence"] = json::array();
  for (const PrecedenceConstraint& c : problem.precedence) {
    doc["precedence"].push_back(json{{"dependent", c.dependent},
                                     {"prerequisite", c.prerequisite},
                                     {"scale", c.scale},
                                     {"threshold", c.threshold}});
  }
  return doc.dump(2) + "\n";
}

AllocationProblem problem_from_json(const std::string& text) {
  const json doc = parse(text, "allocation problem");
  if (!doc.is_object()) {
    throw Error(ErrorKind::Validation, "allocation problem must be a JSON object");
  }
  reject_unknown(doc,
                 {"name", "sessions", "resources", "budgets", "volatility",
                  "initial_sentiment", "objective", "influence", "precedence"},
                 "allocation problem");

  AllocationProblem problem;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) {
      throw Error(ErrorKind::Validation, "problem name must be a string");
    }
    problem.name = doc["name"].get<std::string>();
  }
  problem.sessions = static_cast<std::size_t>(number_at(doc, "sessions", "problem"));
  problem.resources = static_cast<std::size_t>(number_at(doc, "resources", "problem"));

  if (doc.contains("budgets") && doc["budgets"].is_array()) {
    problem.budgets = doc["budgets"].get<std::vector<double>>();
  } else if (doc.contains("budgets") && doc["budgets"].is_number()) {
    problem.budgets.assign(problem.sessions, doc["budgets"].get<double>());
  } else {
    problem.budgets.assign(problem.sessions, 1.0);
  }

  problem.volatility = number_at(doc, "volatility", "problem");
  if (doc.contains("initial_sentiment")) {
    problem.initial_sentiment = number_at(doc, "initial_sentiment", "problem");
  }
  if (doc.contains("objective")) {
    const std::string mode = doc["objective"].get<std::string>();
    if (mode == "sum") {
      problem.mode = ObjectiveMode::sum_sentiment;
    } else if (mode == "terminal") {
      problem.mode = ObjectiveMode::terminal_sentiment;
    } else {
      throw Error(ErrorKind::Validation,
                  "objective must be \"sum\" or \"terminal\", got " + mode);
    }
  }

  if (!doc.contains("influence") || !doc["influence"].is_object()) {
    throw Error(ErrorKind::Validation, "problem needs an influence object");
  }
  const json& influence = doc["influence"];
  reject_unknown(influence, {"kind", "exponent", "weights", "weights_clamped"},
                 "influence");
  const std::string kind = influence.contains("kind")
                               ? influence["kind"].get<std::string>()
                               : "linear";
  if (kind != "linear" && kind != "power") {
    throw Error(ErrorKind::Validation, "influence kind must be linear or power");
  }
  problem.influence.kind =
      kind == "linear" ? InfluenceKind::linear : InfluenceKind::power;
  problem.influence.exponent =
      influence.contains("exponent") ? number_at(influence, "exponent", "influence")
                                     : 1.0;
  if (!influence.contains("weights") || !influence["weights"].is_array()) {
    throw Error(ErrorKind::Validation, "influence needs a weights array");
  }
  problem.influence.weights = influence["weights"].get<std::vector<double>>();
  if (influence.contains("weights_clamped")) {
    problem.influence.weights_clamped = influence["weights_clamped"].get<bool>();
  }

  if (doc.contains("precedence")) {
    if (!doc["precedence"].is_array()) {
      throw Error(ErrorKind::Validation, "precedence must be an array");
    }
    for (const json& node : doc["precedence"]) {
      reject_unknown(node, {"dependent", "prerequisite", "scale", "threshold"},
                     "precedence constraint");
      PrecedenceConstraint c;
      c.dependent = static_cast<std::size_t>(number_at(node, "dependent", "precedence"));
      c.prerequisite =
          static_cast<std::size_t>(number_at(node, "prerequisite", "precedence"));
      c.scale = number_at(node, "scale", "precedence");
      c.threshold = number_at(node, "threshold", "precedence");
      problem.precedence.push_back(c);
    }
  }
  validate(problem);
  return problem;
}

std::string plan_to_json(const AllocationPlan& plan) {
  json doc;
  doc["objective"] = plan.objective;
  doc["allocation"] = plan.allocation;
  doc["sentiment"] = plan.sentiment;
  doc["kkt"] = json{{"primal_residual", plan.kkt.primal_residual},
                    {"stationarity_residual", plan.kkt.stationarity_residual},
                    {"complementarity_residual", plan.kkt.complementarity_residual}};
  doc["activation_index"] = plan.activation_index;
  doc["degenerate_volatility"] = plan.degenerate_volatility;
  return doc.dump(2) + "\n";
}

std::string flywheel_state_to_json(const FlywheelState& state) {
  json doc;
  doc["student_id"] = state.student_id;
  json config;
  config["alpha"] = state.config.alpha;
  config["window"] = state.config.window;
  config["learning_rate"] = state.config.learning_rate;
  config["regularizer"] = state.config.regularizer;
  config["low_threshold"] = state.config.low_threshold;
  config["high_threshold"] = state.config.high_threshold;
  config["curve"] = curve_node(state.config.curve);
  doc["config"] = std::move(config);

  json smoother;
  smoother["initialized"] = state.smoother.initialized;
  smoother["last_smoothed"] = state.smoother.last_smoothed;
  smoother["buffer"] = json::array();
  for (const auto& vec : state.smoother.buffer) smoother["buffer"].push_back(vec);
  doc["smoother"] = std::move(smoother);
  doc["aggregated"] = state.aggregated;

  json policy = json::object();
  for (const auto& [skill, params] : state.policy) policy[skill] = params_node(params);
  doc["policy"] = std::move(policy);

  json skills = json::object();
  for (const auto& [skill, trace] : state.skills) {
    skills[skill] = json{{"posterior", trace.posterior},
                         {"observations", trace.observations}};
  }
  doc["skills"] = std::move(skills);

  doc["low_threshold"] = state.low_threshold;
  doc["high_threshold"] = state.high_threshold;
  doc["event_count"] = state.event_count;
  doc["last_timestamp_ms"] = state.last_timestamp_ms;
  doc["last_recommendation"] = state.last_recommendation;
  return doc.dump(2) + "\n";
}

FlywheelState flywheel_state_from_json(const std::string& text) {
  const json doc = parse(text, "flywheel state");
  reject_unknown(doc,
                 {"student_id", "config", "smoother", "aggregated", "policy",
                  "skills", "low_threshold", "high_threshold", "event_count",
                  "last_timestamp_ms", "last_recommendation"},
                 "flywheel state");

  FlywheelConfig config;
  const json& c = doc.at("config");
  reject_unknown(c,
                 {"alpha", "window", "learning_rate", "regularizer",
                  "low_threshold", "high_threshold", "curve"},
                 "flywheel config");
  config.alpha = number_at(c, "alpha", "config");
  config.window = static_cast<std::size_t>(number_at(c, "window", "config"));
  config.learning_rate = number_at(c, "learning_rate", "config");
  config.regularizer = number_at(c, "regularizer", "config");
  config.low_threshold = number_at(c, "low_threshold", "config");
  config.high_threshold = number_at(c, "high_threshold", "config");
  config.curve = curve_from_node(c.at("curve"), "curve");

  SkillParams policy;
  for (const auto& [skill, node] : doc.at("policy").items()) {
    policy.emplace(skill, params_from_node(node, ("policy " + skill).c_str()));
  }

  FlywheelState state =
      make_flywheel_state(doc.at("student_id").get<std::string>(), config, policy);

  const json& smoother = doc.at("smoother");
  reject_unknown(smoother, {"initialized", "last_smoothed", "buffer"}, "smoother");
  state.smoother.initialized = smoother.at("initialized").get<bool>();
  state.smoother.last_smoothed =
      smoother.at("last_smoothed").get<std::vector<double>>();
  for (const json& vec : smoother.at("buffer")) {
    state.smoother.buffer.push_back(vec.get<std::vector<double>>());
  }
  if (doc.contains("aggregated")) {
    state.aggregated = doc.at("aggregated").get<std::vector<double>>();
  }

  for (const auto& [skill, node] : doc.at("skills").items()) {
    reject_unknown(node, {"posterior", "observations"}, "skill trace");
    if (!state.skills.count(skill)) {
      throw Error(ErrorKind::Validation,
                  "skill trace for untracked skill " + skill);
    }
    SkillTrace trace;
    trace.posterior = number_at(node, "posterior", "skill trace");
    trace.observations =
        static_cast<std::int64_t>(number_at(node, "observations", "skill trace"));
    state.skills[skill] = trace;
  }

  state.low_threshold = doc.at("low_threshold").get<double>();
  state.high_threshold = doc.at("high_threshold").get<double>();
  state.event_count = doc.at("event_count").get<std::int64_t>();
  state.last_timestamp_ms = doc.at("last_timestamp_ms").get<std::int64_t>();
  state.last_recommendation = doc.at("last_recommendation").get<std::string>();
  return state;
}

}  // namespace skilltrace
