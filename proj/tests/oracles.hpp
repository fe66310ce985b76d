#pragma once

// Test-only oracles. Each one is an independent route to a quantity the
// library computes, kept deliberately naive so disagreements indict the
// implementation, not the oracle.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "skilltrace/allocation.hpp"
#include "skilltrace/bkt.hpp"
#include "skilltrace/metrics.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Two-state likelihood via the onset-time mixture. The learned state is
// absorbing, so a sequence's hidden path is fully described by the number of
// unmastered steps j: P(y) = l0 lik(0) + (1-l0) [ sum_{j=1}^{n-1}
// (1-T)^(j-1) T lik(j) + (1-T)^(n-1) lik(n) ]. Independent of the forward
// recursion used by the library.
// ---------------------------------------------------------------------------

struct OnsetStats {
  std::vector<int> prefix_correct;  // c_j = #correct among the first j steps
  int total_correct = 0;
  int length = 0;
};

inline OnsetStats onset_stats(const std::vector<int>& seq) {
  OnsetStats s;
  s.length = static_cast<int>(seq.size());
  s.prefix_correct.resize(seq.size() + 1);
  s.prefix_correct[0] = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    s.prefix_correct[i + 1] = s.prefix_correct[i] + seq[i];
  }
  s.total_correct = s.prefix_correct[seq.size()];
  return s;
}

// lik(j): probability of the observations given j unmastered steps.
inline void onset_likelihoods(const OnsetStats& s, double slip, double guess,
                              std::vector<double>& lik) {
  const double lg = std::log(guess);
  const double lng = std::log(1.0 - guess);
  const double lns = std::log(1.0 - slip);
  const double ls = std::log(slip);
  const int n = s.length;
  lik.resize(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) {
    const int c = s.prefix_correct[static_cast<std::size_t>(j)];
    const int correct_mastered = s.total_correct - c;
    const int wrong_mastered = (n - j) - correct_mastered;
    lik[static_cast<std::size_t>(j)] =
        std::exp(c * lg + (j - c) * lng + correct_mastered * lns + wrong_mastered * ls);
  }
}

inline double onset_sequence_probability(const std::vector<double>& lik,
                                         double l0, double learn) {
  const int n = static_cast<int>(lik.size()) - 1;
  double mixed = 0.0;
  double stay = 1.0;  // (1 - T)^(j-1)
  for (int j = 1; j <= n - 1; ++j) {
    mixed += stay * learn * lik[static_cast<std::size_t>(j)];
    stay *= 1.0 - learn;
  }
  if (n >= 1) mixed += stay * lik[static_cast<std::size_t>(n)];
  return l0 * lik[0] + (1.0 - l0) * mixed;
}

inline double onset_log_likelihood(const std::vector<int>& seq,
                                   const skilltrace::BktParams& p) {
  const OnsetStats stats = onset_stats(seq);
  std::vector<double> lik;
  onset_likelihoods(stats, p.slip, p.guess, lik);
  return std::log(onset_sequence_probability(lik, p.l0, p.learn));
}

inline double onset_total_log_likelihood(const std::vector<std::vector<int>>& seqs,
                                         const skilltrace::BktParams& p) {
  double ll = 0.0;
  for (const auto& seq : seqs) ll += onset_log_likelihood(seq, p);
  return ll;
}

struct GridSpec {
  std::vector<double> l0s, learns, slips, guesses;
};

inline std::vector<double> grid_range(double lo, double hi, double step) {
  std::vector<double> values;
  for (int i = 0;; ++i) {
    const double v = lo + i * step;  // index form avoids accumulation drift
    if (v > hi + 1e-12) break;
    values.push_back(v);
  }
  return values;
}

struct GridBest {
  skilltrace::BktParams params;
  double log_likelihood = -std::numeric_limits<double>::infinity();
};

// Exhaustive scan over the grid; ties keep the earliest point in scan order
// (slip, guess, learn, l0 loops from the outside in).
inline GridBest grid_search_bkt(const std::vector<std::vector<int>>& seqs,
                                const GridSpec& grid, int threads = 1) {
  std::vector<OnsetStats> stats;
  stats.reserve(seqs.size());
  for (const auto& seq : seqs) stats.push_back(onset_stats(seq));

  const std::size_t slip_count = grid.slips.size();
  std::vector<GridBest> partial(slip_count);

  auto scan_slip = [&](std::size_t si) {
    const double slip = grid.slips[si];
    GridBest& best = partial[si];
    std::vector<std::vector<double>> lik(seqs.size());
    std::vector<double> mixed(seqs.size());
    for (double guess : grid.guesses) {
      for (std::size_t q = 0; q < seqs.size(); ++q) {
        onset_likelihoods(stats[q], slip, guess, lik[q]);
      }
      for (double learn : grid.learns) {
        for (std::size_t q = 0; q < seqs.size(); ++q) {
          const auto& l = lik[q];
          const int n = static_cast<int>(l.size()) - 1;
          double m = 0.0;
          double stay = 1.0;
          for (int j = 1; j <= n - 1; ++j) {
            m += stay * learn * l[static_cast<std::size_t>(j)];
            stay *= 1.0 - learn;
          }
          if (n >= 1) m += stay * l[static_cast<std::size_t>(n)];
          mixed[q] = m;
        }
        for (double l0 : grid.l0s) {
          double ll = 0.0;
          for (std::size_t q = 0; q < seqs.size(); ++q) {
            ll += std::log(l0 * lik[q][0] + (1.0 - l0) * mixed[q]);
          }
          if (ll > best.log_likelihood) {
            best.log_likelihood = ll;
            best.params = skilltrace::BktParams{l0, learn, slip, guess};
          }
        }
      }
    }
  };

  if (threads <= 1) {
    for (std::size_t si = 0; si < slip_count; ++si) scan_slip(si);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t si = next.fetch_add(1); si < slip_count;
             si = next.fetch_add(1)) {
          scan_slip(si);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  GridBest best;
  for (const GridBest& b : partial) {
    if (b.log_likelihood > best.log_likelihood) best = b;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Allocation oracle: exhaustive grid over per-session splits with the original
// max-form precedence check. Only sensible for n <= 3, m == 2.
// ---------------------------------------------------------------------------

inline double grid_best_objective(const skilltrace::AllocationProblem& problem,
                                  double step) {
  using skilltrace::InfluenceKind;
  const std::size_t n = problem.sessions;
  const auto discounts = skilltrace::objective_weights(problem);

  struct Candidate {
    double r0, r1, value;
  };
  std::vector<std::vector<Candidate>> per_session(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int max_units = static_cast<int>(std::round(problem.budgets[i] / step));
    for (int u0 = 0; u0 <= max_units; ++u0) {
      for (int u1 = 0; u1 + u0 <= max_units; ++u1) {
        const double r0 = u0 * step;
        const double r1 = u1 * step;
        double f = 0.0;
        const auto& inf = problem.influence;
        if (inf.kind == InfluenceKind::linear) {
          f = inf.weights[0] * r0 + inf.weights[1] * r1;
        } else {
          f = inf.weights[0] * std::pow(r0, inf.exponent) +
              inf.weights[1] * std::pow(r1, inf.exponent);
        }
        per_session[i].push_back({r0, r1, discounts[i] * f});
      }
    }
  }

  const auto precedence_ok = [&](const std::vector<double>& cum0,
                                 const std::vector<double>& cum1,
                                 std::size_t upto) {
    for (const auto& c : problem.precedence) {
      double dep = c.dependent == 0 ? cum0[upto] : cum1[upto];
      double pre = c.prerequisite == 0 ? cum0[upto] : cum1[upto];
      if (dep > c.scale * std::max(pre - c.threshold, 0.0) + 1e-9) return false;
    }
    return true;
  };

  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> cum0(n + 1, 0.0), cum1(n + 1, 0.0);
  std::vector<std::size_t> pick(n, 0);

  // Depth-first over sessions with prefix feasibility pruning.
  std::size_t depth = 0;
  double running = 0.0;
  std::vector<double> partial(n + 1, 0.0);
  while (true) {
    if (pick[depth] < per_session[depth].size()) {
      const Candidate& c = per_session[depth][pick[depth]];
      cum0[depth + 1] = cum0[depth] + c.r0;
      cum1[depth + 1] = cum1[depth] + c.r1;
      if (!precedence_ok(cum0, cum1, depth + 1)) {
        ++pick[depth];
        continue;
      }
      partial[depth + 1] = running + c.value;
      if (depth + 1 == n) {
        best = std::max(best, partial[depth + 1]);
        ++pick[depth];
      } else {
        ++depth;
        running = partial[depth];
        pick[depth] = 0;
      }
    } else {
      if (depth == 0) break;
      --depth;
      running = partial[depth];
      ++pick[depth];
    }
  }
  if (best == -std::numeric_limits<double>::infinity()) return best;
  return skilltrace::objective_constant(problem) + best;
}

// ---------------------------------------------------------------------------
// Metric oracles: definitional forms.
// ---------------------------------------------------------------------------

inline double brute_accuracy(const skilltrace::PredictionSet& set, double thr = 0.5) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < set.p.size(); ++i) {
    hits += ((set.p[i] >= thr ? 1 : 0) == set.y[i]);
  }
  return double(hits) / double(set.p.size());
}

inline double brute_auc(const skilltrace::PredictionSet& set) {
  double wins = 0.0;
  std::size_t positives = 0, negatives = 0;
  for (std::size_t i = 0; i < set.p.size(); ++i) {
    if (set.y[i] != 1) continue;
    ++positives;
    for (std::size_t j = 0; j < set.p.size(); ++j) {
      if (set.y[j] == 1) continue;
      if (set.p[i] > set.p[j]) wins += 1.0;
      else if (set.p[i] == set.p[j]) wins += 0.5;
    }
  }
  for (int y : set.y) negatives += (y == 0);
  return wins / (double(positives) * double(negatives));
}

// Average precision via per-positive precision-at-rank; assumes tie-free
// scores so the ranking is unambiguous.
inline double brute_average_precision(const skilltrace::PredictionSet& set) {
  std::vector<std::size_t> order(set.p.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return set.p[a] > set.p[b]; });
  double ap = 0.0;
  std::size_t positives = 0, seen_positives = 0;
  for (int y : set.y) positives += (y == 1);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (set.y[order[rank]] == 1) {
      ++seen_positives;
      ap += double(seen_positives) / double(rank + 1);
    }
  }
  return ap / double(positives);
}

inline double brute_rmse(const skilltrace::PredictionSet& set) {
  double acc = 0.0;
  for (std::size_t i = 0; i < set.p.size(); ++i) {
    acc += (set.p[i] - set.y[i]) * (set.p[i] - set.y[i]);
  }
  return std::sqrt(acc / double(set.p.size()));
}

inline double brute_nll(const skilltrace::PredictionSet& set) {
  double acc = 0.0;
  for (std::size_t i = 0; i < set.p.size(); ++i) {
    double p = std::min(std::max(set.p[i], 1e-9), 1.0 - 1e-9);
    acc += set.y[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc / double(set.p.size());
}

}  // namespace oracles
