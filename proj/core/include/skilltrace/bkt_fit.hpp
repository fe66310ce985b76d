#pragma once

#include <cstdint>
#include <vector>

#include "skilltrace/bkt.hpp"

namespace skilltrace {

/// EM (Baum-Welch specialized to the two-state, no-forgetting chain) over a
/// set of binary outcome sequences for one skill.
struct FitConfig {
  int restarts = 5;
  int max_iterations = 200;
  double tolerance = 1e-6;   // stop when the log-likelihood gain drops below
  std::uint64_t seed = 7;
  int threads = 1;           // E-step workers; chunked reduction keeps results
                             // bit-identical for any thread count
};

struct FitResult {
  BktParams params;
  double log_likelihood = 0.0;
  int iterations = 0;                 // of the winning restart
  std::vector<double> ll_history;     // per-iteration, nondecreasing
};

// Throws Error{InsufficientData} when no sequence has any observation.
// Deterministic for a fixed config.
FitResult fit_parameters(const std::vector<std::vector<int>>& sequences,
                         const FitConfig& config = {});

// Forward-algorithm log-likelihood of one sequence; the same quantity the
// E-step accumulates via its scaling factors.
double forward_log_likelihood(const std::vector<int>& sequence,
                              const BktParams& params);

double total_log_likelihood(const std::vector<std::vector<int>>& sequences,
                            const BktParams& params);

// Per-skill outcome sequences extracted from ordered events, keyed by skill;
// one sequence per student, students in lexicographic order. Multi-skill
// events contribute their outcome to every tagged skill.
std::map<std::string, std::vector<std::vector<int>>> outcome_sequences(
    const std::vector<SignalEvent>& events);

}  // namespace skilltrace
