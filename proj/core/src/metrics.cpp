#include "skilltrace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "skilltrace/errors.hpp"

namespace skilltrace {

namespace {

constexpr double kProbClip = 1e-9;

double clip_probability(double p) {
  if (p < kProbClip) return kProbClip;
  if (p > 1.0 - kProbClip) return 1.0 - kProbClip;
  return p;
}

std::size_t count_positives(const PredictionSet& set) {
  std::size_t positives = 0;
  for (int y : set.y) positives += (y == 1);
  return positives;
}

}  // namespace

void validate(const PredictionSet& set) {
  if (set.p.size() != set.y.size()) {
    throw Error(ErrorKind::Shape, "prediction/label length mismatch");
  }
  if (set.p.empty()) {
    throw Error(ErrorKind::Validation, "empty prediction set");
  }
  for (double p : set.p) {
    if (!std::isfinite(p)) {
      throw Error(ErrorKind::Validation, "non-finite prediction");
    }
  }
  for (int y : set.y) {
    if (y != 0 && y != 1) {
      throw Error(ErrorKind::Validation, "labels must be 0 or 1");
    }
  }
}

double accuracy(const PredictionSet& set, double threshold) {
  validate(set);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < set.p.size(); ++i) {
    const int predicted = set.p[i] >= threshold ? 1 : 0;  // ties go positive
    hits += (predicted == set.y[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(set.p.size());
}

double auc_roc(const PredictionSet& set) {
  validate(set);
  const std::size_t positives = count_positives(set);
  const std::size_t negatives = set.p.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorKind::UndefinedMetric,
                "AUC-ROC needs at least one positive and one negative");
  }

  // Mann-Whitney via average ranks; ties contribute 1/2 per pair.
  std::vector<std::size_t> order(set.p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.p[a] < set.p[b];
  });

  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && set.p[order[j]] == set.p[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (set.y[order[k]] == 1) positive_rank_sum += mean_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) /
         (p * static_cast<double>(negatives));
}

double pr_auc(const PredictionSet& set) {
  validate(set);
  const std::size_t positives = count_positives(set);
  if (positives == 0) {
    throw Error(ErrorKind::UndefinedMetric, "PR-AUC needs at least one positive");
  }

  // Average precision: step-wise sum over descending score thresholds, tied
  // scores entering as one group, no interpolation.
  std::vector<std::size_t> order(set.p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.p[a] > set.p[b];
  });

  double ap = 0.0;
  double recall_prev = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && set.p[order[j]] == set.p[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (set.y[order[k]] == 1) ++tp; else ++fp;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    ap += (recall - recall_prev) * precision;
    recall_prev = recall;
    i = j;
  }
  return ap;
}

double rmse(const PredictionSet& set) {
  validate(set);
  double sum = 0.0;
  for (std::size_t i = 0; i < set.p.size(); ++i) {
    const double d = set.p[i] - set.y[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(set.p.size()));
}

double nll(const PredictionSet& set) {
  validate(set);
  double sum = 0.0;
  for (std::size_t i = 0; i < set.p.size(); ++i) {
    const double p = clip_probability(set.p[i]);
    sum += set.y[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(set.p.size());
}

MetricReport compute_report(const PredictionSet& set) {
  validate(set);
  MetricReport report;
  report.n = set.p.size();
  report.positives = count_positives(set);
  report.accuracy = accuracy(set);
  report.rmse = rmse(set);
  report.nll = nll(set);
  if (report.positives > 0 && report.positives < report.n) {
    report.auc_roc = auc_roc(set);
  }
  if (report.positives > 0) {
    report.pr_auc = pr_auc(set);
  }
  return report;
}

namespace {

struct SplitEvents {
  // Per student: events plus the index of the first test event.
  std::vector<std::vector<SignalEvent>> streams;
  std::vector<std::size_t> train_counts;
  std::size_t total_train = 0;
  std::size_t total_test = 0;
};

SplitEvents split_by_student(const std::vector<SignalEvent>& events,
                             double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw Error(ErrorKind::Validation, "train fraction must lie in [0, 1]");
  }
  validate_stream(events);

  std::unordered_map<std::string, std::size_t> index;
  SplitEvents split;
  for (const SignalEvent& event : events) {
    auto [it, inserted] = index.try_emplace(event.student_id, split.streams.size());
    if (inserted) split.streams.emplace_back();
    split.streams[it->second].push_back(event);
  }
  split.train_counts.resize(split.streams.size());
  for (std::size_t s = 0; s < split.streams.size(); ++s) {
    const std::size_t n = split.streams[s].size();
    const auto train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(n)));
    split.train_counts[s] = train;
    split.total_train += train;
    split.total_test += n - train;
  }
  if (split.total_test == 0) {
    throw Error(ErrorKind::Validation,
                "chronological split leaves an empty test set");
  }
  if (split.total_train == 0) {
    throw Error(ErrorKind::Validation,
                "chronological split leaves an empty training set");
  }
  return split;
}

PredictionSet score_split(const SplitEvents& split, const SkillParams& params) {
  PredictionSet set;
  for (std::size_t s = 0; s < split.streams.size(); ++s) {
    const MasteryTrajectory trajectory = trace_student(split.streams[s], params);
    const auto predictions = event_predictions(trajectory);
    for (std::size_t e = split.train_counts[s]; e < predictions.size(); ++e) {
      set.p.push_back(predictions[e].first);
      set.y.push_back(predictions[e].second);
    }
  }
  return set;
}

// Every skill referenced anywhere must resolve; skills absent from training
// fall back to one background model fitted on the pooled training outcomes.
SkillParams with_fallback(const SplitEvents& split, SkillParams fitted,
                          const FitConfig& fit_config) {
  std::unordered_set<std::string> missing;
  for (const auto& stream : split.streams) {
    for (const SignalEvent& event : stream) {
      for (const std::string& skill : event.skill_ids) {
        if (!fitted.count(skill)) missing.insert(skill);
      }
    }
  }
  if (!missing.empty()) {
    std::vector<std::vector<int>> pooled;
    for (std::size_t s = 0; s < split.streams.size(); ++s) {
      std::vector<int> seq;
      for (std::size_t e = 0; e < split.train_counts[s]; ++e) {
        seq.push_back(split.streams[s][e].correct);
      }
      if (!seq.empty()) pooled.push_back(std::move(seq));
    }
    const BktParams background = fit_parameters(pooled, fit_config).params;
    for (const std::string& skill : missing) fitted.emplace(skill, background);
  }
  return fitted;
}

}  // namespace

PredictionSet test_predictions(const std::vector<SignalEvent>& events,
                               const SkillParams& params,
                               double train_fraction) {
  const SplitEvents split = split_by_student(events, train_fraction);
  return score_split(split, params);
}

MetricReport evaluate_with_params(const std::vector<SignalEvent>& events,
                                  const SkillParams& params,
                                  double train_fraction) {
  return compute_report(test_predictions(events, params, train_fraction));
}

EvalResult evaluate_model(const std::vector<SignalEvent>& events,
                          const EvalConfig& config) {
  const SplitEvents split = split_by_student(events, config.train_fraction);

  std::vector<SignalEvent> train_events;
  train_events.reserve(split.total_train);
  for (std::size_t s = 0; s < split.streams.size(); ++s) {
    for (std::size_t e = 0; e < split.train_counts[s]; ++e) {
      train_events.push_back(split.streams[s][e]);
    }
  }

  EvalResult result;
  for (const auto& [skill, sequences] : outcome_sequences(train_events)) {
    result.fitted.emplace(skill, fit_parameters(sequences, config.fit).params);
  }
  const SkillParams effective = with_fallback(split, result.fitted, config.fit);

  result.report = compute_report(score_split(split, effective));
  result.train_events = split.total_train;
  result.test_events = split.total_test;
  return result;
}

}  // namespace skilltrace
