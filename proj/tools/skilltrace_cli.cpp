// Batch front end: ingest, fit, trace, simulate, allocate, evaluate, flywheel.
// Config precedence is flags > --config file > built-in defaults; every output
// directory gets a report.json echoing the effective configuration.
// Exit codes: 0 success, 1 I/O, 2 validation, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "skilltrace/allocation.hpp"
#include "skilltrace/bkt.hpp"
#include "skilltrace/bkt_fit.hpp"
#include "skilltrace/csv.hpp"
#include "skilltrace/data_io.hpp"
#include "skilltrace/errors.hpp"
#include "skilltrace/flywheel.hpp"
#include "skilltrace/json_io.hpp"
#include "skilltrace/metrics.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace skilltrace;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
      return 1;
    case ErrorKind::Numerical:
    case ErrorKind::Infeasible:
      return 3;
    default:
      return 2;
  }
}

void emit_error(const std::string& type, const std::string& message) {
  json err;
  err["error"] = json{{"type", type}, {"message", message}};
  std::cerr << err.dump() << "\n";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::Io, "cannot read " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::Io, "cannot write " + path.string());
  }
  out << content;
  if (!out) {
    throw Error(ErrorKind::Io, "short write to " + path.string());
  }
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorKind::Io, "cannot create output directory " + out);
  }
  return dir;
}

// JSON config with per-command key allow-list; unknown keys are rejected.
json load_config(const std::string& path, std::initializer_list<const char*> allowed) {
  if (path.empty()) return json::object();
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorKind::Validation, "config must be a JSON object: " + path);
  }
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) known = true;
    }
    if (!known) {
      throw Error(ErrorKind::Validation, "unknown config key \"" + key + "\"");
    }
  }
  return doc;
}

template <typename T>
void apply(const json& config, const char* key, T& value) {
  if (config.contains(key)) value = config[key].get<T>();
}

struct Reporter {
  json config = json::object();
  json body = json::object();

  void write(const fs::path& dir, const std::string& command) const {
    json doc;
    doc["command"] = command;
    doc["config"] = config;
    for (const auto& [key, value] : body.items()) doc[key] = value;
    write_file(dir / "report.json", doc.dump(2) + "\n");
  }
};

json report_errors(const IngestReport& report) {
  json errors = json::array();
  for (const RowError& e : report.errors) {
    errors.push_back(json{{"line", e.line}, {"message", e.message}});
  }
  return errors;
}

std::vector<SignalEvent> load_canonical(const fs::path& path, std::size_t max_errors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::Io, "cannot read " + path.string());
  }
  IngestOptions options;
  options.max_errors = max_errors;
  IngestReport report;
  auto events = read_canonical_csv(in, options, report);
  if (!report.errors.empty()) {
    throw Error(ErrorKind::Validation,
                "canonical input has " + std::to_string(report.errors.size()) +
                    " malformed rows; re-ingest it first");
  }
  return events;
}

// ---------------------------------------------------------------- ingest ---

int cmd_ingest(const std::string& config_path, std::string input,
               std::string metadata, std::string source, std::string out,
               std::optional<std::size_t> max_errors_flag) {
  const json config = load_config(
      config_path, {"input", "metadata", "source", "out", "max_errors"});
  if (input.empty()) apply(config, "input", input);
  if (metadata.empty()) apply(config, "metadata", metadata);
  apply(config, "source", source);
  if (out.empty()) apply(config, "out", out);
  std::size_t max_errors = 100;
  apply(config, "max_errors", max_errors);
  if (max_errors_flag.has_value()) max_errors = *max_errors_flag;
  if (out.empty()) out = "out";

  if (input.empty()) {
    throw Error(ErrorKind::Validation, "ingest needs --input");
  }
  if (source != "oj" && source != "kt1" && source != "canonical") {
    throw Error(ErrorKind::Validation,
                "source must be one of oj, kt1, canonical; got " + source);
  }

  const fs::path dir = prepare_out_dir(out);
  Reporter reporter;
  reporter.config = json{{"input", input},
                         {"metadata", metadata},
                         {"source", source},
                         {"out", out},
                         {"max_errors", max_errors}};

  std::ifstream in(input, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::Io, "cannot read " + input);
  }
  IngestOptions options;
  options.max_errors = max_errors;

  if (source == "kt1") {
    if (metadata.empty()) {
      throw Error(ErrorKind::Validation, "kt1 ingest needs --metadata");
    }
    std::ifstream meta(metadata, std::ios::binary);
    if (!meta) {
      throw Error(ErrorKind::Io, "cannot read " + metadata);
    }
    const Kt1Result result = preprocess_kt1(in, meta);
    {
      std::ostringstream canonical;
      write_canonical_csv(canonical, result.events);
      write_file(dir / "canonical.csv", canonical.str());
    }
    {
      std::ostringstream q;
      write_qmatrix_csv(q, result.q);
      write_file(dir / "qmatrix.csv", q.str());
    }
    reporter.body["rows_in"] = result.report.rows_in;
    reporter.body["rows_out"] = result.report.rows_out;
    reporter.body["steps"] =
        json{{"duplicates_removed", result.report.duplicates_removed},
             {"missing_answer_removed", result.report.missing_answer_removed},
             {"undefined_tag_removed", result.report.undefined_tag_removed},
             {"students_below_min_removed", result.report.students_below_min_removed}};
    reporter.body["students_out"] = result.report.students_out;
    reporter.write(dir, "ingest");
    return 0;
  }

  IngestReport report;
  std::vector<SignalEvent> events;
  if (source == "oj") {
    events = ingest_oj(in, options, report);
  } else {
    events = read_canonical_csv(in, options, report);
  }
  {
    std::ostringstream canonical;
    write_canonical_csv(canonical, events);
    write_file(dir / "canonical.csv", canonical.str());
  }
  reporter.body["rows_in"] = report.rows_in;
  reporter.body["rows_out"] = report.rows_out;
  reporter.body["rows_rejected"] = report.errors.size();
  reporter.body["errors"] = report_errors(report);
  reporter.write(dir, "ingest");
  return 0;
}

// ------------------------------------------------------------------- fit ---

int cmd_fit(const std::string& config_path, std::string input, std::string out,
            std::optional<std::uint64_t> seed_flag, std::optional<int> threads_flag) {
  const json config = load_config(
      config_path,
      {"input", "out", "seed", "threads", "restarts", "max_iterations", "tolerance"});
  if (input.empty()) apply(config, "input", input);
  if (out.empty()) apply(config, "out", out);
  if (out.empty()) out = "out";
  FitConfig fit;
  apply(config, "seed", fit.seed);
  apply(config, "threads", fit.threads);
  apply(config, "restarts", fit.restarts);
  apply(config, "max_iterations", fit.max_iterations);
  apply(config, "tolerance", fit.tolerance);
  if (seed_flag.has_value()) fit.seed = *seed_flag;
  if (threads_flag.has_value()) fit.threads = *threads_flag;
  if (input.empty()) {
    throw Error(ErrorKind::Validation, "fit needs --input");
  }

  const fs::path dir = prepare_out_dir(out);
  const auto events = load_canonical(input, 0);
  const auto sequences = outcome_sequences(events);
  if (sequences.empty()) {
    throw Error(ErrorKind::InsufficientData, "no outcome sequences in input");
  }

  SkillParams fitted;
  json per_skill = json::object();
  for (const auto& [skill, seqs] : sequences) {
    const FitResult result = fit_parameters(seqs, fit);
    fitted.emplace(skill, result.params);
    per_skill[skill] = json{{"log_likelihood", result.log_likelihood},
                            {"iterations", result.iterations},
                            {"sequences", seqs.size()}};
  }
  write_file(dir / "params.json", params_to_json(fitted));

  Reporter reporter;
  reporter.config = json{{"input", input},
                         {"out", out},
                         {"seed", fit.seed},
                         {"threads", fit.threads},
                         {"restarts", fit.restarts},
                         {"max_iterations", fit.max_iterations},
                         {"tolerance", fit.tolerance}};
  reporter.body["skills"] = per_skill;
  reporter.write(dir, "fit");
  return 0;
}

// ----------------------------------------------------------------- trace ---

int cmd_trace(const std::string& config_path, std::string input,
              std::string params_path, std::string out) {
  const json config = load_config(config_path, {"input", "params", "out"});
  if (input.empty()) apply(config, "input", input);
  if (params_path.empty()) apply(config, "params", params_path);
  if (out.empty()) apply(config, "out", out);
  if (out.empty()) out = "out";
  if (input.empty() || params_path.empty()) {
    throw Error(ErrorKind::Validation, "trace needs --input and --params");
  }

  const fs::path dir = prepare_out_dir(out);
  const auto events = load_canonical(input, 0);
  const SkillParams params = params_from_json(read_file(params_path));

  // Group per student preserving order.
  std::map<std::string, std::vector<SignalEvent>> streams;
  for (const SignalEvent& event : events) {
    streams[event.student_id].push_back(event);
  }

  std::ostringstream csv_out;
  csv::write_row(csv_out, {"student_id", "timestamp_ms", "event_index",
                           "skill_id", "prior", "posterior", "predicted_correct",
                           "observed", "event_predicted"});
  std::size_t records = 0;
  for (const auto& [student, stream] : streams) {
    const MasteryTrajectory trajectory = trace_student(stream, params);
    for (const TrajectoryRecord& r : trajectory.records) {
      csv::write_row(csv_out,
                     {student, std::to_string(r.timestamp_ms),
                      std::to_string(r.event_index), r.skill_id,
                      csv::format_double(r.prior), csv::format_double(r.posterior),
                      csv::format_double(r.predicted_correct),
                      std::to_string(r.observed),
                      csv::format_double(r.event_predicted)});
      ++records;
    }
  }
  write_file(dir / "trajectory.csv", csv_out.str());

  Reporter reporter;
  reporter.config = json{{"input", input}, {"params", params_path}, {"out", out}};
  reporter.body["students"] = streams.size();
  reporter.body["records"] = records;
  reporter.write(dir, "trace");
  return 0;
}

// -------------------------------------------------------------- simulate ---

int cmd_simulate(const std::string& config_path, std::string out,
                 std::optional<std::uint64_t> seed_flag,
                 std::optional<std::size_t> students_flag,
                 std::optional<std::size_t> steps_flag) {
  const json config =
      load_config(config_path, {"out", "seed", "students", "steps", "skills"});
  if (out.empty()) apply(config, "out", out);
  if (out.empty()) out = "out";

  SyntheticConfig synth;
  synth.skills.emplace("skill_a", BktParams{0.3, 0.2, 0.1, 0.2});
  apply(config, "seed", synth.seed);
  apply(config, "students", synth.students);
  apply(config, "steps", synth.steps);
  if (config.contains("skills")) {
    synth.skills.clear();
    for (const auto& [skill, node] : config["skills"].items()) {
      BktParams p;
      p.l0 = node.at("l0").get<double>();
      p.learn = node.at("learn").get<double>();
      p.slip = node.at("slip").get<double>();
      p.guess = node.at("guess").get<double>();
      synth.skills.emplace(skill, p);
    }
  }
  if (seed_flag.has_value()) synth.seed = *seed_flag;
  if (students_flag.has_value()) synth.students = *students_flag;
  if (steps_flag.has_value()) synth.steps = *steps_flag;

  const fs::path dir = prepare_out_dir(out);
  const SyntheticResult result = generate_synthetic(synth);
  {
    std::ostringstream canonical;
    write_canonical_csv(canonical, result.events);
    write_file(dir / "events.csv", canonical.str());
  }
  {
    std::ostringstream hidden;
    write_hidden_csv(hidden, result.hidden);
    write_file(dir / "hidden.csv", hidden.str());
  }

  Reporter reporter;
  json skills = json::object();
  for (const auto& [skill, p] : synth.skills) {
    skills[skill] = json{{"l0", p.l0}, {"learn", p.learn},
                         {"slip", p.slip}, {"guess", p.guess}};
  }
  reporter.config = json{{"out", out},
                         {"seed", synth.seed},
                         {"students", synth.students},
                         {"steps", synth.steps},
                         {"skills", skills}};
  reporter.body["events"] = result.events.size();
  reporter.write(dir, "simulate");
  return 0;
}

// -------------------------------------------------------------- allocate ---

json plan_summary(const AllocationProblem& problem, const AllocationPlan& plan) {
  return json{{"name", problem.name},
              {"objective", plan.objective},
              {"degenerate_volatility", plan.degenerate_volatility},
              {"activation_index", plan.activation_index},
              {"kkt",
               json{{"primal_residual", plan.kkt.primal_residual},
                    {"stationarity_residual", plan.kkt.stationarity_residual},
                    {"complementarity_residual", plan.kkt.complementarity_residual}}}};
}

void write_plan_files(const fs::path& dir, const std::string& stem,
                      const AllocationPlan& plan) {
  std::ostringstream csv_out;
  write_plan_csv(csv_out, plan);
  write_file(dir / (stem + ".plan.csv"), csv_out.str());
  write_file(dir / (stem + ".plan.json"), plan_to_json(plan));
}

int cmd_allocate(const std::string& config_path, std::string problem_path,
                 std::string out, bool demo, std::string objective_flag) {
  const json config =
      load_config(config_path, {"problem", "out", "demo", "objective"});
  if (problem_path.empty()) apply(config, "problem", problem_path);
  if (out.empty()) apply(config, "out", out);
  if (out.empty()) out = "out";
  if (!demo && config.contains("demo")) demo = config["demo"].get<bool>();
  std::string objective = objective_flag;
  if (objective.empty()) apply(config, "objective", objective);

  const fs::path dir = prepare_out_dir(out);
  Reporter reporter;
  reporter.config = json{{"problem", problem_path},
                         {"out", out},
                         {"demo", demo},
                         {"objective", objective}};

  const auto apply_objective = [&](AllocationProblem& problem) {
    if (objective.empty()) return;
    if (objective == "sum") {
      problem.mode = ObjectiveMode::sum_sentiment;
    } else if (objective == "terminal") {
      problem.mode = ObjectiveMode::terminal_sentiment;
    } else {
      throw Error(ErrorKind::Validation,
                  "--objective must be sum or terminal, got " + objective);
    }
  };

  if (demo) {
    json profiles = json::array();
    for (AllocationProblem problem : demo_profiles()) {
      apply_objective(problem);
      const AllocationPlan plan = solve_allocation(problem);
      write_plan_files(dir, problem.name, plan);
      write_file(dir / (problem.name + ".problem.json"), problem_to_json(problem));
      profiles.push_back(plan_summary(problem, plan));
    }
    reporter.body["profiles"] = profiles;
    reporter.write(dir, "allocate");
    return 0;
  }

  if (problem_path.empty()) {
    throw Error(ErrorKind::Validation, "allocate needs --problem or --demo");
  }
  const std::string text = read_file(problem_path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorKind::Validation, "malformed problem JSON");
  }

  if (doc.is_array()) {
    // A JSON array of problems solves the group maximin.
    std::vector<AllocationProblem> problems;
    for (const json& node : doc) {
      AllocationProblem problem = problem_from_json(node.dump());
      apply_objective(problem);
      problems.push_back(std::move(problem));
    }
    const GroupPlan group = solve_group_maximin(problems);
    json members = json::array();
    for (std::size_t s = 0; s < problems.size(); ++s) {
      const std::string stem = problems[s].name.empty()
                                   ? "student" + std::to_string(s)
                                   : problems[s].name;
      write_plan_files(dir, stem, group.plans[s]);
      members.push_back(plan_summary(problems[s], group.plans[s]));
    }
    reporter.body["maximin_lower_bound"] = group.lower_bound;
    reporter.body["members"] = members;
    reporter.write(dir, "allocate");
    return 0;
  }

  AllocationProblem problem = problem_from_json(text);
  apply_objective(problem);
  if (problem.influence.weights_clamped) {
    std::cerr << "warning: negative power-mode weights clamped to zero\n";
  }
  const AllocationPlan plan = solve_allocation(problem);
  const std::string stem = problem.name.empty() ? "allocation" : problem.name;
  write_plan_files(dir, stem, plan);
  reporter.body["plan"] = plan_summary(problem, plan);
  reporter.write(dir, "allocate");
  return 0;
}

// -------------------------------------------------------------- evaluate ---

std::string format_metric(std::optional<double> value) {
  if (!value.has_value()) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", *value);
  return buf;
}

int cmd_evaluate(const std::string& config_path, std::string input,
                 std::string out, std::optional<double> train_fraction_flag,
                 std::optional<std::uint64_t> seed_flag,
                 std::optional<int> threads_flag) {
  const json config = load_config(
      config_path, {"input", "out", "train_fraction", "seed", "threads",
                    "restarts", "max_iterations", "tolerance"});
  if (input.empty()) apply(config, "input", input);
  if (out.empty()) apply(config, "out", out);
  if (out.empty()) out = "out";

  EvalConfig eval;
  apply(config, "train_fraction", eval.train_fraction);
  apply(config, "seed", eval.fit.seed);
  apply(config, "threads", eval.fit.threads);
  apply(config, "restarts", eval.fit.restarts);
  apply(config, "max_iterations", eval.fit.max_iterations);
  apply(config, "tolerance", eval.fit.tolerance);
  if (train_fraction_flag.has_value()) eval.train_fraction = *train_fraction_flag;
  if (seed_flag.has_value()) eval.fit.seed = *seed_flag;
  if (threads_flag.has_value()) eval.fit.threads = *threads_flag;
  if (input.empty()) {
    throw Error(ErrorKind::Validation, "evaluate needs --input");
  }

  const fs::path dir = prepare_out_dir(out);
  const auto events = load_canonical(input, 0);
  const EvalResult result = evaluate_model(events, eval);

  write_file(dir / "metrics.json", metric_report_to_json(result.report));
  write_file(dir / "params.json", params_to_json(result.fitted));

  // Render the metrics table.
  char accuracy[32];
  std::snprintf(accuracy, sizeof(accuracy), "%.1f%%", result.report.accuracy * 100.0);
  std::ostringstream table;
  table << "Model  Accuracy  AUC-ROC  PR-AUC  RMSE   NLL\n";
  table << "BKT    " << accuracy << "     " << format_metric(result.report.auc_roc)
        << "    " << format_metric(result.report.pr_auc) << "   "
        << format_metric(result.report.rmse) << "  "
        << format_metric(result.report.nll) << "\n";
  std::cout << table.str();
  write_file(dir / "metrics_table.txt", table.str());

  Reporter reporter;
  reporter.config = json{{"input", input},
                         {"out", out},
                         {"train_fraction", eval.train_fraction},
                         {"seed", eval.fit.seed},
                         {"threads", eval.fit.threads},
                         {"restarts", eval.fit.restarts},
                         {"max_iterations", eval.fit.max_iterations},
                         {"tolerance", eval.fit.tolerance}};
  reporter.body["train_events"] = result.train_events;
  reporter.body["test_events"] = result.test_events;
  reporter.write(dir, "evaluate");
  return 0;
}

// -------------------------------------------------------------- flywheel ---

int cmd_flywheel(const std::string& config_path, std::string input,
                 std::string params_path, std::string out,
                 std::optional<double> alpha_flag,
                 std::optional<std::size_t> window_flag) {
  const json config = load_config(
      config_path, {"input", "params", "out", "alpha", "window", "eta", "lambda",
                    "low_threshold", "high_threshold", "curve"});
  if (input.empty()) apply(config, "input", input);
  if (params_path.empty()) apply(config, "params", params_path);
  if (out.empty()) apply(config, "out", out);
  if (out.empty()) out = "out";

  FlywheelConfig fly;
  apply(config, "alpha", fly.alpha);
  apply(config, "window", fly.window);
  apply(config, "eta", fly.learning_rate);
  apply(config, "lambda", fly.regularizer);
  apply(config, "low_threshold", fly.low_threshold);
  apply(config, "high_threshold", fly.high_threshold);
  if (config.contains("curve")) {
    const json& c = config["curve"];
    fly.curve.sharpness = c.at("sharpness").get<double>();
    fly.curve.peak = c.at("peak").get<double>();
    fly.curve.target = c.at("target").get<double>();
  }
  if (alpha_flag.has_value()) fly.alpha = *alpha_flag;
  if (window_flag.has_value()) fly.window = *window_flag;
  if (input.empty()) {
    throw Error(ErrorKind::Validation, "flywheel needs --input");
  }

  const fs::path dir = prepare_out_dir(out);
  const auto events = load_canonical(input, 0);
  const SkillParams initial =
      params_path.empty() ? SkillParams{} : params_from_json(read_file(params_path));

  std::map<std::string, std::vector<SignalEvent>> streams;
  for (const SignalEvent& event : events) {
    streams[event.student_id].push_back(event);
  }

  std::ostringstream recs;
  csv::write_row(recs, {"student_id", "timestamp_ms", "item_id", "tier",
                        "target_skill", "mastery", "engagement"});
  json states = json::object();
  std::size_t steps = 0;
  for (const auto& [student, stream] : streams) {
    SkillParams policy;
    for (const SignalEvent& event : stream) {
      for (const std::string& skill : event.skill_ids) {
        auto it = initial.find(skill);
        policy.emplace(skill, it != initial.end() ? it->second : BktParams{});
      }
    }
    FlywheelState state = make_flywheel_state(student, fly, policy);
    for (const SignalEvent& event : stream) {
      const Recommendation rec = step(state, event);
      csv::write_row(recs, {student, std::to_string(event.timestamp_ms),
                            event.item_id, to_string(rec.tier), rec.target_skill,
                            csv::format_double(rec.mastery),
                            csv::format_double(rec.engagement)});
      ++steps;
    }
    states[student] = json::parse(flywheel_state_to_json(state));
  }
  write_file(dir / "recommendations.csv", recs.str());
  write_file(dir / "states.json", states.dump(2) + "\n");

  Reporter reporter;
  reporter.config = json{{"input", input},
                         {"params", params_path},
                         {"out", out},
                         {"alpha", fly.alpha},
                         {"window", fly.window},
                         {"eta", fly.learning_rate},
                         {"lambda", fly.regularizer},
                         {"low_threshold", fly.low_threshold},
                         {"high_threshold", fly.high_threshold},
                         {"curve", json{{"sharpness", fly.curve.sharpness},
                                        {"peak", fly.curve.peak},
                                        {"target", fly.curve.target}}}};
  reporter.body["students"] = streams.size();
  reporter.body["steps"] = steps;
  reporter.write(dir, "flywheel");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge tracing and curriculum allocation toolkit"};
  app.require_subcommand(1);

  std::string config_path, input, metadata, params_path, problem_path, out;
  std::string source = "canonical", objective;
  bool demo = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> train_fraction, alpha;
  std::optional<std::size_t> window, max_errors, students, steps;

  auto* ingest = app.add_subcommand("ingest", "convert logs to canonical CSV");
  ingest->add_option("--config", config_path);
  ingest->add_option("--input", input);
  ingest->add_option("--metadata", metadata);
  ingest->add_option("--source", source)->check(CLI::IsMember({"oj", "kt1", "canonical"}));
  ingest->add_option("--out", out);
  ingest->add_option("--max-errors", max_errors);

  auto* fit = app.add_subcommand("fit", "fit per-skill BKT parameters");
  fit->add_option("--config", config_path);
  fit->add_option("--input", input);
  fit->add_option("--out", out);
  fit->add_option("--seed", seed);
  fit->add_option("--threads", threads);

  auto* trace = app.add_subcommand("trace", "replay events into mastery trajectories");
  trace->add_option("--config", config_path);
  trace->add_option("--input", input);
  trace->add_option("--params", params_path);
  trace->add_option("--out", out);

  auto* simulate = app.add_subcommand("simulate", "generate synthetic ground-truth data");
  simulate->add_option("--config", config_path);
  simulate->add_option("--out", out);
  simulate->add_option("--seed", seed);
  simulate->add_option("--students", students);
  simulate->add_option("--steps", steps);

  auto* allocate = app.add_subcommand("allocate", "solve resource allocation plans");
  allocate->add_option("--config", config_path);
  allocate->add_option("--problem", problem_path);
  allocate->add_option("--out", out);
  allocate->add_flag("--demo", demo);
  allocate->add_option("--objective", objective)->check(CLI::IsMember({"sum", "terminal"}));

  auto* evaluate = app.add_subcommand("evaluate", "chronological train/test metric report");
  evaluate->add_option("--config", config_path);
  evaluate->add_option("--input", input);
  evaluate->add_option("--out", out);
  evaluate->add_option("--train-fraction", train_fraction);
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--threads", threads);

  auto* flywheel = app.add_subcommand("flywheel", "replay events through the closed loop");
  flywheel->add_option("--config", config_path);
  flywheel->add_option("--input", input);
  flywheel->add_option("--params", params_path);
  flywheel->add_option("--out", out);
  flywheel->add_option("--alpha", alpha);
  flywheel->add_option("--window", window);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(ingest)) {
      return cmd_ingest(config_path, input, metadata, source, out, max_errors);
    }
    if (app.got_subcommand(fit)) {
      return cmd_fit(config_path, input, out, seed, threads);
    }
    if (app.got_subcommand(trace)) {
      return cmd_trace(config_path, input, params_path, out);
    }
    if (app.got_subcommand(simulate)) {
      return cmd_simulate(config_path, out, seed, students, steps);
    }
    if (app.got_subcommand(allocate)) {
      return cmd_allocate(config_path, problem_path, out, demo, objective);
    }
    if (app.got_subcommand(evaluate)) {
      return cmd_evaluate(config_path, input, out, train_fraction, seed, threads);
    }
    if (app.got_subcommand(flywheel)) {
      return cmd_flywheel(config_path, input, params_path, out, alpha, window);
    }
  } catch (const Error& e) {
    emit_error(to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("io", e.what());
    return 1;
  }
  return 0;
}
