#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "skilltrace/bkt.hpp"
#include "skilltrace/types.hpp"

namespace skilltrace {

struct RowError {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

struct IngestOptions {
  std::size_t max_errors = 100;  // abort (Error{Validation}) once exceeded
};

struct IngestReport {
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  std::vector<RowError> errors;
};

enum class OjVerdict { AC, WA, RTE, CE, TLE, MLE, other };

struct OjSubmission {
  std::string submission_id;
  std::string student_id;
  std::string problem_id;
  OjVerdict verdict = OjVerdict::other;
  double exec_time_ms = 0.0;
  bool has_exec_time = false;
  double memory_kb = 0.0;
  bool has_memory = false;
  std::int64_t timestamp_ms = 0;
  std::int64_t attempts = 1;  // >= 1
  double difficulty = 0.0;
  bool has_difficulty = false;
};

// Submission-channel event with correct = (verdict == AC) and the problem id
// as the traced skill. The gap channel stays unset until the stream is
// ordered (ingest_oj fills it).
SignalEvent to_signal_event(const OjSubmission& submission);

// Online-judge submission export:
// submission_id,student_id,problem_id,verdict,exec_time_ms,memory_kb,timestamp_ms,attempts,difficulty
// Verdicts: AC WA RTE CE TLE MLE (IR OLE AB IE fold into "other"); anything
// else is a row-level error. Difficulty accepts easy/medium/hard (1/2/3) or a
// number.
std::vector<SignalEvent> ingest_oj(std::istream& in, const IngestOptions& options,
                                   IngestReport& report);

/// Binary item-by-skill membership matrix.
struct QMatrix {
  std::vector<std::string> items;
  std::vector<std::string> skills;
  std::vector<std::vector<int>> membership;  // items x skills, entries 0/1
};

void validate(const QMatrix& q);

struct Kt1Report {
  std::size_t rows_in = 0;
  std::size_t duplicates_removed = 0;
  std::size_t missing_answer_removed = 0;
  std::size_t undefined_tag_removed = 0;
  std::size_t students_below_min_removed = 0;
  std::size_t rows_out = 0;
  std::size_t students_out = 0;
};

struct Kt1Result {
  std::vector<SignalEvent> events;
  QMatrix q;
  Kt1Report report;
};

// KT1-style logs. Interactions: student_id,timestamp_ms,item_id,answer.
// Metadata: item_id,correct_answer,skill_ids (semicolon-joined).
// Steps in order: dedupe (all columns), drop missing answers and items with
// undefined tags, build the q-matrix, drop students with fewer than
// min_interactions remaining rows.
Kt1Result preprocess_kt1(std::istream& interactions, std::istream& metadata,
                         std::size_t min_interactions = 10);

/// Ground-truth generator for the two-state process: mastery starts
/// Bernoulli(l0), emits correct with probability 1-slip when mastered else
/// guess, and transitions to mastered with probability learn after each step.
struct SyntheticConfig {
  std::map<std::string, BktParams> skills;
  std::size_t students = 100;
  std::size_t steps = 20;  // per student per skill
  std::uint64_t seed = 1;
};

struct HiddenStateRecord {
  std::string student_id;
  std::string skill_id;
  std::size_t step = 0;  // 0-based within the (student, skill) sequence
  int mastered = 0;      // latent state at emission time
  int observed = 0;
};

struct SyntheticResult {
  std::vector<SignalEvent> events;
  std::vector<HiddenStateRecord> hidden;
};

SyntheticResult generate_synthetic(const SyntheticConfig& config);

// Canonical interaction CSV (fixed column order):
// student_id,timestamp_ms,item_id,skill_ids,correct,attempts,exec_time_ms,memory_kb,difficulty
// skill_ids are semicolon-joined; empty optional numerics read as value 0
// with the presence flag cleared.
void write_canonical_csv(std::ostream& out, const std::vector<SignalEvent>& events);
std::vector<SignalEvent> read_canonical_csv(std::istream& in,
                                            const IngestOptions& options,
                                            IngestReport& report);

// items x skills 0/1 grid with row/column headers.
void write_qmatrix_csv(std::ostream& out, const QMatrix& q);

void write_hidden_csv(std::ostream& out, const std::vector<HiddenStateRecord>& log);

}  // namespace skilltrace
