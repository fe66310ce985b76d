#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "skilltrace/bkt_fit.hpp"
#include "skilltrace/types.hpp"

namespace skilltrace {

/// Paired (predicted probability, observed label) set.
struct PredictionSet {
  std::vector<double> p;
  std::vector<int> y;
};

void validate(const PredictionSet& set);

struct MetricReport {
  double accuracy = 0.0;
  std::optional<double> auc_roc;  // empty when the set is single-class
  std::optional<double> pr_auc;   // empty when the set has no positives
  double rmse = 0.0;
  double nll = 0.0;
  std::size_t n = 0;
  std::size_t positives = 0;
};

// Fraction with (p >= threshold) == y; ties classify as positive.
double accuracy(const PredictionSet& set, double threshold = 0.5);

// Mann-Whitney form: probability a random positive outranks a random
// negative, ties counting 1/2. Throws Error{UndefinedMetric} on a
// single-class set.
double auc_roc(const PredictionSet& set);

// Average precision (step-wise summation, no interpolation); tied scores
// enter as one threshold group. Throws Error{UndefinedMetric} with zero
// positives.
double pr_auc(const PredictionSet& set);

double rmse(const PredictionSet& set);

// Mean negative log-likelihood; probabilities clipped to [1e-9, 1 - 1e-9].
double nll(const PredictionSet& set);

// All five metrics; auc_roc left empty on a single-class set.
MetricReport compute_report(const PredictionSet& set);

/// Chronological per-student evaluation protocol: the first train_fraction
/// of each student's events trains the per-skill models, the rest is scored
/// on next-event correctness.
struct EvalConfig {
  double train_fraction = 0.8;
  FitConfig fit;
};

struct EvalResult {
  MetricReport report;
  SkillParams fitted;
  std::size_t train_events = 0;
  std::size_t test_events = 0;
};

EvalResult evaluate_model(const std::vector<SignalEvent>& events,
                          const EvalConfig& config = {});

// Same protocol without fitting: scores the supplied parameters on the test
// portion. Used to compare a fitted model against ground-truth parameters.
MetricReport evaluate_with_params(const std::vector<SignalEvent>& events,
                                  const SkillParams& params,
                                  double train_fraction);

// The test-portion prediction set itself (event-level mean rule).
PredictionSet test_predictions(const std::vector<SignalEvent>& events,
                               const SkillParams& params,
                               double train_fraction);

}  // namespace skilltrace
