#include "skilltrace/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <set>
#include <unordered_map>

#include "skilltrace/csv.hpp"
#include "skilltrace/errors.hpp"
#include "skilltrace/rng.hpp"

namespace skilltrace {

namespace {

const std::vector<std::string> kOjHeader = {
    "submission_id", "student_id", "problem_id", "verdict", "exec_time_ms",
    "memory_kb",     "timestamp_ms", "attempts",  "difficulty"};

const std::vector<std::string> kCanonicalHeader = {
    "student_id", "timestamp_ms", "item_id",  "skill_ids", "correct",
    "attempts",   "exec_time_ms", "memory_kb", "difficulty"};

std::optional<OjVerdict> parse_verdict(const std::string& text) {
  if (text == "AC") return OjVerdict::AC;
  if (text == "WA") return OjVerdict::WA;
  if (text == "RTE") return OjVerdict::RTE;
  if (text == "CE") return OjVerdict::CE;
  if (text == "TLE") return OjVerdict::TLE;
  if (text == "MLE") return OjVerdict::MLE;
  // Remaining platform verdicts fold into the catch-all bucket.
  if (text == "IR" || text == "OLE" || text == "AB" || text == "IE" ||
      text == "OTHER") {
    return OjVerdict::other;
  }
  return std::nullopt;
}

std::optional<double> parse_difficulty(const std::string& text) {
  if (text == "easy") return 1.0;
  if (text == "medium") return 2.0;
  if (text == "hard") return 3.0;
  return csv::parse_double(text);
}

void check_header(const std::vector<std::string>& got,
                  const std::vector<std::string>& want, const char* what) {
  if (got != want) {
    std::string expected;
    for (std::size_t i = 0; i < want.size(); ++i) {
      if (i) expected += ',';
      expected += want[i];
    }
    throw Error(ErrorKind::Validation,
                std::string(what) + " header must be exactly: " + expected);
  }
}

std::vector<std::string> split_skills(const std::string& joined) {
  std::vector<std::string> skills;
  std::string current;
  for (char c : joined) {
    if (c == ';') {
      if (!current.empty()) skills.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) skills.push_back(std::move(current));
  std::sort(skills.begin(), skills.end());
  skills.erase(std::unique(skills.begin(), skills.end()), skills.end());
  return skills;
}

std::string join_skills(const std::vector<std::string>& skills) {
  std::string joined;
  for (std::size_t i = 0; i < skills.size(); ++i) {
    if (i) joined += ';';
    joined += skills[i];
  }
  return joined;
}

void enforce_error_budget(const IngestReport& report, const IngestOptions& options) {
  if (report.errors.size() > options.max_errors) {
    const RowError& last = report.errors.back();
    throw Error(ErrorKind::Validation,
                "aborting after " + std::to_string(report.errors.size()) +
                    " malformed rows (max-errors " +
                    std::to_string(options.max_errors) + "); line " +
                    std::to_string(last.line) + ": " + last.message);
  }
}

// Sort per student by timestamp and fill the gap-seconds channel.
void finalize_events(std::vector<SignalEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const SignalEvent& a, const SignalEvent& b) {
                     if (a.student_id != b.student_id) {
                       return a.student_id < b.student_id;
                     }
                     return a.timestamp_ms < b.timestamp_ms;
                   });
  std::unordered_map<std::string, std::int64_t> last_seen;
  for (SignalEvent& event : events) {
    auto [it, inserted] =
        last_seen.try_emplace(event.student_id, event.timestamp_ms);
    const double gap =
        inserted ? 0.0
                 : static_cast<double>(event.timestamp_ms - it->second) / 1000.0;
    it->second = event.timestamp_ms;
    event.features[feature::gap_seconds] = gap;
    event.feature_present[feature::gap_seconds] = true;
  }
}

}  // namespace

SignalEvent to_signal_event(const OjSubmission& submission) {
  SignalEvent event;
  event.student_id = submission.student_id;
  event.timestamp_ms = submission.timestamp_ms;
  event.item_id = submission.problem_id;
  event.skill_ids = {submission.problem_id};  // the problem is the traced skill
  event.correct = submission.verdict == OjVerdict::AC ? 1 : 0;
  event.channel = Channel::submission;
  event.features.assign(feature::count, 0.0);
  event.feature_present.assign(feature::count, false);
  event.features[feature::attempts] = static_cast<double>(submission.attempts);
  event.feature_present[feature::attempts] = true;
  if (submission.has_exec_time) {
    event.features[feature::exec_time_ms] = submission.exec_time_ms;
    event.feature_present[feature::exec_time_ms] = true;
  }
  if (submission.has_memory) {
    event.features[feature::memory_kb] = submission.memory_kb;
    event.feature_present[feature::memory_kb] = true;
  }
  if (submission.has_difficulty) {
    event.features[feature::difficulty] = submission.difficulty;
    event.feature_present[feature::difficulty] = true;
  }
  return event;
}

std::vector<SignalEvent> ingest_oj(std::istream& in, const IngestOptions& options,
                                   IngestReport& report) {
  const auto rows = csv::parse(in);
  if (rows.empty()) {
    throw Error(ErrorKind::Validation, "online-judge file has no header");
  }
  check_header(rows.front(), kOjHeader, "online-judge");

  std::vector<SignalEvent> events;
  report = IngestReport{};
  report.rows_in = rows.size() - 1;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::size_t line = r + 1;
    const auto& row = rows[r];
    const auto reject = [&](std::string message) {
      report.errors.push_back({line, std::move(message)});
      enforce_error_budget(report, options);
    };

    if (row.size() != kOjHeader.size()) {
      reject("expected " + std::to_string(kOjHeader.size()) + " fields, got " +
             std::to_string(row.size()));
      continue;
    }
    const auto verdict = parse_verdict(row[3]);
    if (!verdict.has_value()) {
      reject("unknown verdict \"" + row[3] + "\"");
      continue;
    }
    const auto timestamp = csv::parse_i64(row[6]);
    if (!timestamp.has_value() || *timestamp <= 0) {
      reject("malformed timestamp \"" + row[6] + "\"");
      continue;
    }
    const auto attempts = csv::parse_i64(row[7]);
    if (!attempts.has_value() || *attempts < 1) {
      reject("attempts must be an integer >= 1, got \"" + row[7] + "\"");
      continue;
    }
    if (row[1].empty() || row[2].empty()) {
      reject("student and problem ids must be nonempty");
      continue;
    }

    OjSubmission submission;
    submission.submission_id = row[0];
    submission.student_id = row[1];
    submission.problem_id = row[2];
    submission.verdict = *verdict;
    submission.timestamp_ms = *timestamp;
    submission.attempts = *attempts;

    bool bad = false;
    if (!row[4].empty()) {
      const auto value = csv::parse_double(row[4]);
      if (!value.has_value() || !std::isfinite(*value)) {
        reject("malformed exec_time_ms \"" + row[4] + "\"");
        bad = true;
      } else {
        submission.exec_time_ms = *value;
        submission.has_exec_time = true;
      }
    }
    if (!bad && !row[5].empty()) {
      const auto value = csv::parse_double(row[5]);
      if (!value.has_value() || !std::isfinite(*value)) {
        reject("malformed memory_kb \"" + row[5] + "\"");
        bad = true;
      } else {
        submission.memory_kb = *value;
        submission.has_memory = true;
      }
    }
    if (!bad && !row[8].empty()) {
      const auto value = parse_difficulty(row[8]);
      if (!value.has_value() || !std::isfinite(*value)) {
        reject("malformed difficulty \"" + row[8] + "\"");
        bad = true;
      } else {
        submission.difficulty = *value;
        submission.has_difficulty = true;
      }
    }
    if (bad) continue;

    events.push_back(to_signal_event(submission));
  }

  finalize_events(events);
  validate_stream(events);
  report.rows_out = events.size();
  return events;
}

void write_canonical_csv(std::ostream& out, const std::vector<SignalEvent>& events) {
  csv::write_row(out, kCanonicalHeader);
  for (const SignalEvent& event : events) {
    const auto field = [&](std::size_t channel) -> std::string {
      if (channel < event.features.size() &&
          (event.feature_present.empty() || event.feature_present[channel])) {
        return csv::format_double(event.features[channel]);
      }
      return "";
    };
    csv::write_row(out, {event.student_id, std::to_string(event.timestamp_ms),
                         event.item_id, join_skills(event.skill_ids),
                         std::to_string(event.correct), field(feature::attempts),
                         field(feature::exec_time_ms), field(feature::memory_kb),
                         field(feature::difficulty)});
  }
}

std::vector<SignalEvent> read_canonical_csv(std::istream& in,
                                            const IngestOptions& options,
                                            IngestReport& report) {
  const auto rows = csv::parse(in);
  if (rows.empty()) {
    throw Error(ErrorKind::Validation, "canonical file has no header");
  }
  check_header(rows.front(), kCanonicalHeader, "canonical");

  std::vector<SignalEvent> events;
  report = IngestReport{};
  report.rows_in = rows.size() - 1;
  std::unordered_map<std::string, std::int64_t> last_seen;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::size_t line = r + 1;
    const auto& row = rows[r];
    const auto reject = [&](std::string message) {
      report.errors.push_back({line, std::move(message)});
      enforce_error_budget(report, options);
    };

    if (row.size() != kCanonicalHeader.size()) {
      reject("expected " + std::to_string(kCanonicalHeader.size()) +
             " fields, got " + std::to_string(row.size()));
      continue;
    }
    const auto timestamp = csv::parse_i64(row[1]);
    if (!timestamp.has_value() || *timestamp <= 0) {
      reject("malformed timestamp \"" + row[1] + "\"");
      continue;
    }
    const auto correct = csv::parse_i64(row[4]);
    if (!correct.has_value() || (*correct != 0 && *correct != 1)) {
      reject("correct must be 0 or 1");
      continue;
    }
    SignalEvent event;
    event.student_id = row[0];
    event.timestamp_ms = *timestamp;
    event.item_id = row[2];
    event.skill_ids = split_skills(row[3]);
    event.correct = static_cast<int>(*correct);
    event.channel = Channel::submission;
    event.features.assign(feature::count, 0.0);
    event.feature_present.assign(feature::count, false);

    bool bad = false;
    const std::size_t channels[] = {feature::attempts, feature::exec_time_ms,
                                    feature::memory_kb, feature::difficulty};
    for (std::size_t k = 0; k < 4; ++k) {
      const std::string& text = row[5 + k];
      if (text.empty()) continue;
      const auto value = csv::parse_double(text);
      if (!value.has_value() || !std::isfinite(*value)) {
        reject("malformed numeric \"" + text + "\"");
        bad = true;
        break;
      }
      event.features[channels[k]] = *value;
      event.feature_present[channels[k]] = true;
    }
    if (bad) continue;

    if (event.skill_ids.empty()) {
      reject("submission row without skill ids");
      continue;
    }

    // Canonical files are stored per-student ordered; preserve row order and
    // derive the gap channel in place.
    auto [it, inserted] = last_seen.try_emplace(event.student_id, event.timestamp_ms);
    if (!inserted && event.timestamp_ms < it->second) {
      reject("timestamps decrease for student " + event.student_id);
      continue;
    }
    const double gap =
        inserted ? 0.0
                 : static_cast<double>(event.timestamp_ms - it->second) / 1000.0;
    it->second = event.timestamp_ms;
    event.features[feature::gap_seconds] = gap;
    event.feature_present[feature::gap_seconds] = true;

    events.push_back(std::move(event));
  }
  report.rows_out = events.size();
  return events;
}

void validate(const QMatrix& q) {
  if (q.membership.size() != q.items.size()) {
    throw Error(ErrorKind::Shape, "q-matrix row count mismatch");
  }
  for (const auto& row : q.membership) {
    if (row.size() != q.skills.size()) {
      throw Error(ErrorKind::Shape, "q-matrix column count mismatch");
    }
    int nonzero = 0;
    for (int v : row) {
      if (v != 0 && v != 1) {
        throw Error(ErrorKind::Validation, "q-matrix entries must be 0/1");
      }
      nonzero += v;
    }
    if (nonzero == 0) {
      throw Error(ErrorKind::Validation, "q-matrix row without any skill");
    }
  }
}

Kt1Result preprocess_kt1(std::istream& interactions, std::istream& metadata,
                         std::size_t min_interactions) {
  const auto meta_rows = csv::parse(metadata);
  if (meta_rows.empty()) {
    throw Error(ErrorKind::Validation, "metadata file has no header");
  }
  check_header(meta_rows.front(), {"item_id", "correct_answer", "skill_ids"},
               "metadata");
  struct ItemMeta {
    std::string answer;
    std::vector<std::string> skills;
  };
  std::unordered_map<std::string, ItemMeta> items;
  for (std::size_t r = 1; r < meta_rows.size(); ++r) {
    const auto& row = meta_rows[r];
    if (row.size() != 3) {
      throw Error(ErrorKind::Validation,
                  "metadata line " + std::to_string(r + 1) + " malformed");
    }
    items[row[0]] = ItemMeta{row[1], split_skills(row[2])};
  }

  const auto rows = csv::parse(interactions);
  if (rows.empty()) {
    throw Error(ErrorKind::Validation, "interactions file has no header");
  }
  check_header(rows.front(), {"student_id", "timestamp_ms", "item_id", "answer"},
               "interactions");

  Kt1Result result;
  result.report.rows_in = rows.size() - 1;

  // 1) Exact-duplicate removal over all columns, keeping first occurrences.
  std::vector<std::vector<std::string>> unique_rows;
  {
    std::set<std::vector<std::string>> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (seen.insert(rows[r]).second) {
        unique_rows.push_back(rows[r]);
      } else {
        ++result.report.duplicates_removed;
      }
    }
  }

  // 2) Drop missing answers, then items that cannot map to a known skill.
  struct Parsed {
    std::string student;
    std::int64_t timestamp;
    std::string item;
    std::string answer;
  };
  std::vector<Parsed> kept;
  for (std::size_t r = 0; r < unique_rows.size(); ++r) {
    const auto& row = unique_rows[r];
    if (row.size() != 4) {
      throw Error(ErrorKind::Validation, "interaction row malformed");
    }
    if (row[3].empty()) {
      ++result.report.missing_answer_removed;
      continue;
    }
    const auto timestamp = csv::parse_i64(row[1]);
    if (!timestamp.has_value() || *timestamp <= 0) {
      throw Error(ErrorKind::Validation,
                  "malformed timestamp \"" + row[1] + "\" in interactions");
    }
    auto it = items.find(row[2]);
    if (it == items.end() || it->second.skills.empty()) {
      ++result.report.undefined_tag_removed;  // unknown item == undefined tag
      continue;
    }
    kept.push_back({row[0], *timestamp, row[2], row[3]});
  }

  // 3) Q-matrix over the surviving items.
  {
    std::set<std::string> item_set;
    for (const Parsed& p : kept) item_set.insert(p.item);
    std::set<std::string> skill_set;
    for (const std::string& item : item_set) {
      for (const std::string& s : items.at(item).skills) skill_set.insert(s);
    }
    result.q.items.assign(item_set.begin(), item_set.end());
    result.q.skills.assign(skill_set.begin(), skill_set.end());
    result.q.membership.assign(result.q.items.size(),
                               std::vector<int>(result.q.skills.size(), 0));
    for (std::size_t i = 0; i < result.q.items.size(); ++i) {
      for (const std::string& s : items.at(result.q.items[i]).skills) {
        const auto pos = std::lower_bound(result.q.skills.begin(),
                                          result.q.skills.end(), s) -
                         result.q.skills.begin();
        result.q.membership[i][static_cast<std::size_t>(pos)] = 1;
      }
    }
    if (!result.q.items.empty()) validate(result.q);
  }

  // 4) Drop students left with fewer than min_interactions rows.
  std::unordered_map<std::string, std::size_t> per_student;
  for (const Parsed& p : kept) ++per_student[p.student];
  std::vector<Parsed> final_rows;
  for (const Parsed& p : kept) {
    if (per_student[p.student] < min_interactions) {
      ++result.report.students_below_min_removed;
    } else {
      final_rows.push_back(p);
    }
  }

  std::set<std::string> students;
  for (const Parsed& p : final_rows) {
    const ItemMeta& meta = items.at(p.item);
    SignalEvent event;
    event.student_id = p.student;
    event.timestamp_ms = p.timestamp;
    event.item_id = p.item;
    event.skill_ids = meta.skills;
    event.correct = p.answer == meta.answer ? 1 : 0;
    event.channel = Channel::submission;
    event.features.assign(feature::count, 0.0);
    event.feature_present.assign(feature::count, false);
    result.events.push_back(std::move(event));
    students.insert(p.student);
  }
  finalize_events(result.events);
  validate_stream(result.events);
  result.report.rows_out = result.events.size();
  result.report.students_out = students.size();
  return result;
}

SyntheticResult generate_synthetic(const SyntheticConfig& config) {
  if (config.skills.empty()) {
    throw Error(ErrorKind::Validation, "synthetic config needs >= 1 skill");
  }
  if (config.students < 1 || config.steps < 1) {
    throw Error(ErrorKind::Validation, "synthetic config needs students and steps");
  }
  // Boundary probabilities (deterministic chains) are legal for the generator,
  // unlike the tighter box the fitter works in.
  for (const auto& [skill, params] : config.skills) {
    for (double p : {params.l0, params.learn, params.slip, params.guess}) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorKind::Domain, "synthetic probabilities must lie in [0, 1]");
      }
    }
  }

  SyntheticResult result;
  Rng rng(config.seed);

  std::size_t width = 1;
  for (std::size_t v = config.students; v >= 10; v /= 10) ++width;

  for (std::size_t u = 0; u < config.students; ++u) {
    std::string student = std::to_string(u + 1);
    student.insert(0, width - std::min(width, student.size()), '0');
    student.insert(0, "s");

    std::size_t skill_index = 0;
    for (const auto& [skill, params] : config.skills) {
      bool mastered = rng.bernoulli(params.l0);
      for (std::size_t step = 0; step < config.steps; ++step) {
        const double p_correct = mastered ? 1.0 - params.slip : params.guess;
        const int observed = rng.bernoulli(p_correct) ? 1 : 0;

        result.hidden.push_back(
            {student, skill, step, mastered ? 1 : 0, observed});

        SignalEvent event;
        event.student_id = student;
        event.timestamp_ms =
            static_cast<std::int64_t>(step + 1) * 1000 +
            static_cast<std::int64_t>(skill_index);
        event.item_id = skill + "_q" + std::to_string(step + 1);
        event.skill_ids = {skill};
        event.correct = observed;
        event.channel = Channel::submission;
        event.features.assign(feature::count, 0.0);
        event.feature_present.assign(feature::count, false);
        result.events.push_back(std::move(event));

        if (!mastered) mastered = rng.bernoulli(params.learn);
      }
      ++skill_index;
    }
  }
  finalize_events(result.events);
  validate_stream(result.events);
  return result;
}

void write_qmatrix_csv(std::ostream& out, const QMatrix& q) {
  std::vector<std::string> header = {"item_id"};
  header.insert(header.end(), q.skills.begin(), q.skills.end());
  csv::write_row(out, header);
  for (std::size_t i = 0; i < q.items.size(); ++i) {
    std::vector<std::string> row = {q.items[i]};
    for (int v : q.membership[i]) row.push_back(std::to_string(v));
    csv::write_row(out, row);
  }
}

void write_hidden_csv(std::ostream& out, const std::vector<HiddenStateRecord>& log) {
  csv::write_row(out, {"student_id", "skill_id", "step", "mastered", "observed"});
  for (const HiddenStateRecord& r : log) {
    csv::write_row(out, {r.student_id, r.skill_id, std::to_string(r.step),
                         std::to_string(r.mastered), std::to_string(r.observed)});
  }
}

}  // namespace skilltrace
