#include <doctest.h>

#include <cmath>
#include <sstream>

#include "skilltrace/data_io.hpp"
#include "skilltrace/errors.hpp"
#include "skilltrace/rng.hpp"

using namespace skilltrace;

namespace {

const char* kOjHeader =
    "submission_id,student_id,problem_id,verdict,exec_time_ms,memory_kb,"
    "timestamp_ms,attempts,difficulty\n";

std::vector<SignalEvent> ingest(const std::string& body,
                                std::size_t max_errors, IngestReport& report) {
  std::istringstream in(std::string(kOjHeader) + body);
  IngestOptions options;
  options.max_errors = max_errors;
  return ingest_oj(in, options, report);
}

}  // namespace

TEST_CASE("verdict mapping and feature extraction") {
  IngestReport report;
  const auto events = ingest(
      "1,alice,p1,AC,120,2048,1000,1,easy\n"
      "2,alice,p1,WA,80,1024,61000,2,easy\n"
      "3,bob,p2,TLE,5000,4096,2000,1,3\n",
      0, report);
  REQUIRE(events.size() == 3);
  CHECK(report.rows_in == 3);
  CHECK(report.rows_out == 3);

  // Sorted by student then timestamp; alice first.
  CHECK(events[0].student_id == "alice");
  CHECK(events[0].correct == 1);   // AC
  CHECK(events[1].correct == 0);   // WA
  CHECK(events[2].student_id == "bob");
  CHECK(events[2].correct == 0);   // TLE

  CHECK(events[0].skill_ids == std::vector<std::string>{"p1"});
  CHECK(events[0].features[feature::attempts] == 1.0);
  CHECK(events[0].features[feature::difficulty] == 1.0);  // "easy"
  CHECK(events[2].features[feature::difficulty] == 3.0);  // numeric
  // Gap: 60 seconds between alice's submissions, 0 for first events.
  CHECK(events[0].features[feature::gap_seconds] == 0.0);
  CHECK(events[1].features[feature::gap_seconds] == doctest::Approx(60.0));
}

TEST_CASE("empty file with a valid header ingests to nothing") {
  IngestReport report;
  const auto events = ingest("", 0, report);
  CHECK(events.empty());
  CHECK(report.rows_in == 0);
}

TEST_CASE("row-level errors carry line numbers") {
  IngestReport report;
  const auto events = ingest(
      "1,alice,p1,NOT_A_VERDICT,1,1,1000,1,easy\n"
      "2,alice,p1,AC,1,1,2000,1,easy\n"
      "3,alice,p1,AC,1,1,zzz,1,easy\n",
      10, report);
  CHECK(events.size() == 1);
  REQUIRE(report.errors.size() == 2);
  CHECK(report.errors[0].line == 2);
  CHECK(report.errors[0].message.find("verdict") != std::string::npos);
  CHECK(report.errors[1].line == 4);
  CHECK(report.errors[1].message.find("timestamp") != std::string::npos);
}

TEST_CASE("max-error budget aborts ingestion") {
  IngestReport report;
  CHECK_THROWS_AS(
      ingest("1,alice,p1,BOGUS,1,1,1000,1,easy\n", 0, report), Error);
}

TEST_CASE("other-bucket verdicts ingest as incorrect") {
  IngestReport report;
  const auto events = ingest("1,a,p,IR,1,1,1000,1,2\n", 0, report);
  REQUIRE(events.size() == 1);
  CHECK(events[0].correct == 0);
}

TEST_CASE("canonical CSV round-trips byte-exactly") {
  Rng rng(606);
  std::vector<SignalEvent> events;
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 10; ++i) {
      SignalEvent e;
      e.student_id = "u" + std::to_string(u);
      e.timestamp_ms = 1000 * (i + 1) + u;
      e.item_id = "item_" + std::to_string(rng.next_below(20));
      e.skill_ids = {"sk" + std::to_string(rng.next_below(3))};
      e.correct = rng.bernoulli(0.5) ? 1 : 0;
      e.features.assign(feature::count, 0.0);
      e.feature_present.assign(feature::count, false);
      if (rng.bernoulli(0.8)) {
        e.features[feature::attempts] = double(1 + rng.next_below(5));
        e.feature_present[feature::attempts] = true;
      }
      if (rng.bernoulli(0.5)) {
        e.features[feature::exec_time_ms] = rng.uniform(1.0, 5000.0);
        e.feature_present[feature::exec_time_ms] = true;
      }
      e.features[feature::gap_seconds] = i == 0 ? 0.0 : 1.0;
      e.feature_present[feature::gap_seconds] = true;
      events.push_back(std::move(e));
    }
  }

  std::ostringstream first;
  write_canonical_csv(first, events);

  std::istringstream in(first.str());
  IngestOptions options;
  IngestReport report;
  const auto back = read_canonical_csv(in, options, report);
  CHECK(report.errors.empty());
  REQUIRE(back.size() == events.size());

  std::ostringstream second;
  write_canonical_csv(second, back);
  CHECK(first.str() == second.str());
}

TEST_CASE("kt1 preprocessing applies the four steps in order") {
  // Metadata: items q1 (skills 1;3), q2 (skill 2), q3 (no tags -> undefined).
  std::istringstream metadata(
      "item_id,correct_answer,skill_ids\n"
      "q1,a,1;3\n"
      "q2,b,2\n"
      "q3,c,\n");

  std::ostringstream interactions;
  interactions << "student_id,timestamp_ms,item_id,answer\n";
  // Student "keep" gets 12 valid interactions.
  for (int i = 0; i < 12; ++i) {
    interactions << "keep," << (1000 + i) << ",q" << (i % 2 + 1) << ",a\n";
  }
  // An exact duplicate row.
  interactions << "keep,1000,q1,a\n";
  // A missing answer, an undefined-tag item, and an unknown item.
  interactions << "keep,2000,q1,\n";
  interactions << "keep,2100,q3,c\n";
  interactions << "keep,2200,q9,a\n";
  // Student "drop" ends up with 9 interactions after filtering.
  for (int i = 0; i < 9; ++i) {
    interactions << "drop," << (1000 + i) << ",q2,b\n";
  }

  std::istringstream in(interactions.str());
  std::istringstream meta(metadata.str());
  const Kt1Result result = preprocess_kt1(in, meta, 10);

  CHECK(result.report.rows_in == 12 + 1 + 3 + 9);
  CHECK(result.report.duplicates_removed == 1);
  CHECK(result.report.missing_answer_removed == 1);
  CHECK(result.report.undefined_tag_removed == 2);
  CHECK(result.report.students_below_min_removed == 9);
  CHECK(result.report.rows_out == 12);
  CHECK(result.report.students_out == 1);

  // Removal counts account exactly for the dropped rows.
  CHECK(result.report.rows_in - result.report.rows_out ==
        result.report.duplicates_removed + result.report.missing_answer_removed +
            result.report.undefined_tag_removed +
            result.report.students_below_min_removed);

  // q-matrix: q1 -> (1,0,1) over skills {1,2,3}; q2 -> (0,1,0).
  REQUIRE(result.q.items == std::vector<std::string>{"q1", "q2"});
  REQUIRE(result.q.skills == std::vector<std::string>{"1", "2", "3"});
  CHECK(result.q.membership[0] == std::vector<int>{1, 0, 1});
  CHECK(result.q.membership[1] == std::vector<int>{0, 1, 0});

  // Correctness comes from answer comparison: q2 answered "a" != "b".
  for (const SignalEvent& e : result.events) {
    if (e.item_id == "q2") CHECK(e.correct == 0);
    if (e.item_id == "q1") CHECK(e.correct == 1);
  }
}

TEST_CASE("exactly nine interactions is below the keep threshold") {
  std::istringstream metadata("item_id,correct_answer,skill_ids\nq,x,s\n");
  std::ostringstream interactions;
  interactions << "student_id,timestamp_ms,item_id,answer\n";
  for (int i = 0; i < 9; ++i) {
    interactions << "u," << (100 + i) << ",q,x\n";
  }
  std::istringstream in(interactions.str());
  const Kt1Result result = preprocess_kt1(in, metadata, 10);
  CHECK(result.events.empty());
  CHECK(result.report.students_below_min_removed == 9);
}

TEST_CASE("deterministic synthetic chains") {
  SyntheticConfig config;
  config.skills.emplace("s", BktParams{0.0, 1.0, 0.0, 0.0});
  config.students = 4;
  config.steps = 6;
  config.seed = 1;
  const auto result = generate_synthetic(config);
  // Every sequence is 0 then all 1s.
  for (const auto& h : result.hidden) {
    CHECK(h.observed == (h.step == 0 ? 0 : 1));
  }

  SyntheticConfig always;
  always.skills.emplace("s", BktParams{0.5, 0.3, 0.0, 1.0});
  always.students = 4;
  always.steps = 6;
  always.seed = 2;
  for (const auto& e : generate_synthetic(always).events) {
    CHECK(e.correct == 1);  // guess 1, slip 0: correct regardless of mastery
  }
}

TEST_CASE("synthetic generator matches the analytic first-step marginal") {
  SyntheticConfig config;
  config.skills.emplace("s", BktParams{0.3, 0.2, 0.1, 0.2});
  config.students = 4000;
  config.steps = 3;
  config.seed = 77;
  const auto result = generate_synthetic(config);
  double first_correct = 0.0;
  for (const auto& h : result.hidden) {
    if (h.step == 0) first_correct += h.observed;
  }
  const double rate = first_correct / 4000.0;
  const double expected = 0.3 * 0.9 + 0.7 * 0.2;  // 0.41
  const double sigma = std::sqrt(expected * (1.0 - expected) / 4000.0);
  CHECK(std::abs(rate - expected) <= 3.0 * sigma);
}

TEST_CASE("emission frequencies conditioned on the hidden state") {
  SyntheticConfig config;
  config.skills.emplace("s", BktParams{0.3, 0.15, 0.12, 0.22});
  config.students = 3000;
  config.steps = 10;
  config.seed = 99;
  const auto result = generate_synthetic(config);

  double mastered_correct = 0, mastered_total = 0;
  double unmastered_correct = 0, unmastered_total = 0;
  for (const auto& h : result.hidden) {
    if (h.mastered) {
      mastered_total += 1;
      mastered_correct += h.observed;
    } else {
      unmastered_total += 1;
      unmastered_correct += h.observed;
    }
  }
  const double p_mastered = mastered_correct / mastered_total;
  const double p_unmastered = unmastered_correct / unmastered_total;
  CHECK(std::abs(p_mastered - 0.88) <=
        3.0 * std::sqrt(0.88 * 0.12 / mastered_total));
  CHECK(std::abs(p_unmastered - 0.22) <=
        3.0 * std::sqrt(0.22 * 0.78 / unmastered_total));
}

TEST_CASE("same seed reproduces the synthetic stream bit for bit") {
  SyntheticConfig config;
  config.skills.emplace("s", BktParams{0.3, 0.2, 0.1, 0.2});
  config.students = 50;
  config.steps = 10;
  config.seed = 31337;
  const auto a = generate_synthetic(config);
  const auto b = generate_synthetic(config);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].correct == b.events[i].correct);
    CHECK(a.events[i].timestamp_ms == b.events[i].timestamp_ms);
  }
}
