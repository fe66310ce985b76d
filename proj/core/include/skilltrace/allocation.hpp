#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "skilltrace/barrier.hpp"

namespace skilltrace {

enum class InfluenceKind { linear, power };
enum class ObjectiveMode { sum_sentiment, terminal_sentiment };

const char* to_string(InfluenceKind kind) noexcept;
const char* to_string(ObjectiveMode mode) noexcept;

/// Inverted-U engagement curve: weight(p) = -sharpness * (p - target)^2 + peak,
/// maximal exactly at p == target.
struct EngagementCurve {
  double sharpness = 1.0;  // > 0
  double peak = 1.0;
  double target = 0.5;     // in (0, 1)
};

void validate(const EngagementCurve& curve);

double engagement_weight(double p_mastery, const EngagementCurve& curve);

/// Session influence f(E_i): sum_j w_j R_{j,i} (linear) or
/// sum_j w_j R_{j,i}^k (power, 0 < k <= 1, w_j >= 0).
struct InfluenceModel {
  InfluenceKind kind = InfluenceKind::linear;
  double exponent = 1.0;         // power mode only
  std::vector<double> weights;   // per resource
  bool weights_clamped = false;  // negative mastery-derived weights raised to 0
};

void validate(const InfluenceModel& model, std::size_t resources);

// Power mode rejects negative fixed weights outright (Error{Model}).
InfluenceModel make_influence(InfluenceKind kind, double exponent,
                              std::vector<double> weights);

// Weights derived from mastery through the curves; power mode clamps negative
// values to zero and marks weights_clamped so callers can warn.
InfluenceModel influence_from_mastery(InfluenceKind kind, double exponent,
                                      const std::vector<EngagementCurve>& curves,
                                      const std::vector<double>& mastery);

/// Cumulative unlock rule between two resources: for every session prefix j,
/// sum_{i<=j} R[dependent] <= scale * max(sum_{i<=j} R[prerequisite] - threshold, 0).
struct PrecedenceConstraint {
  std::size_t dependent = 0;
  std::size_t prerequisite = 0;
  double scale = 1.0;      // > 0
  double threshold = 0.0;  // >= 0
};

struct AllocationProblem {
  std::string name;
  std::size_t sessions = 1;     // n
  std::size_t resources = 1;    // m
  std::vector<double> budgets;  // per session, positive
  double volatility = 0.5;      // theta in [0, 1]
  double initial_sentiment = 0.0;
  InfluenceModel influence;
  std::vector<PrecedenceConstraint> precedence;
  ObjectiveMode mode = ObjectiveMode::sum_sentiment;
};

void validate(const AllocationProblem& problem);

// R indexed [resource][session].
using AllocationMatrix = std::vector<std::vector<double>>;

AllocationMatrix zero_allocation(std::size_t resources, std::size_t sessions);

// f(E_i) per session.
std::vector<double> session_influences(const AllocationMatrix& allocation,
                                       const AllocationProblem& problem);

// s_i = theta * s_{i-1} + (1 - theta) * f(E_i), i = 1..n.
std::vector<double> sentiment_trajectory(const AllocationMatrix& allocation,
                                         const AllocationProblem& problem);

// Closed-form per-session discounts d_t so that
// objective = objective_constant + sum_t d_t * f(E_t).
std::vector<double> objective_weights(const AllocationProblem& problem);
double objective_constant(const AllocationProblem& problem);

double objective_value(const AllocationMatrix& allocation,
                       const AllocationProblem& problem);

// Largest violation of budgets, nonnegativity and the max-form precedence
// constraints; <= 0 means feasible.
double primal_violation(const AllocationMatrix& allocation,
                        const AllocationProblem& problem);

struct KktReport {
  double primal_residual = 0.0;
  double stationarity_residual = 0.0;
  double complementarity_residual = 0.0;
};

struct AllocationPlan {
  AllocationMatrix allocation;  // m x n
  std::vector<double> sentiment;
  double objective = 0.0;
  KktReport kkt;
  // Zero-prefix length chosen per precedence constraint; == sessions means the
  // dependent resource never activates.
  std::vector<std::size_t> activation_index;
  bool degenerate_volatility = false;  // theta == 1; objective ignores R
};

struct SolverOptions {
  barrier::Options barrier;
  // Rows within this slack may carry duals in the certificate; near-degenerate
  // optimal faces need a window well above the primal gap.
  double kkt_active_slack = 1e-2;
  double tie_epsilon = 1e-12;  // suffix argmax tie window (smallest wins)
};

/// Exact solve by activation-suffix enumeration: each precedence constraint's
/// piecewise bound is active on a session suffix, so enumerating the suffix
/// start per constraint yields convex subproblems whose union covers the
/// feasible set exactly; the best subproblem optimum is the global optimum.
AllocationPlan solve_allocation(const AllocationProblem& problem,
                                const SolverOptions& options = {});

struct GroupPlan {
  std::vector<AllocationPlan> plans;
  double lower_bound = 0.0;  // certified max-min objective value
};

// Maximin over students with independent per-student allocations under a
// shared (n, m, budgets) schedule, via the epigraph form max t subject to
// objective_s >= t.
GroupPlan solve_group_maximin(const std::vector<AllocationProblem>& problems,
                              const SolverOptions& options = {});

// Independent certification of a plan: rebuilds the plan's suffix system,
// estimates duals by nonnegative least squares on the active rows, and
// reports the residual triple.
KktReport check_kkt(const AllocationPlan& plan, const AllocationProblem& problem,
                    const SolverOptions& options = {});

// Five named n=30, m=2 configurations used by the CLI demo.
std::vector<AllocationProblem> demo_profiles();

// session,resource,amount,sentiment rows.
void write_plan_csv(std::ostream& out, const AllocationPlan& plan);

// --- activation-suffix machinery, exposed for property tests ---

// Prefix lengths implied by a point: per constraint, the number of leading
// sessions where the prerequisite cumulative stays below the threshold.
std::vector<std::size_t> implied_prefix_lengths(const AllocationMatrix& allocation,
                                                const AllocationProblem& problem);

// Does the point satisfy the affine suffix system for the given per-constraint
// zero-prefix lengths (within eps)?
bool suffix_feasible(const AllocationMatrix& allocation,
                     const AllocationProblem& problem,
                     const std::vector<std::size_t>& prefix_lengths, double eps);

}  // namespace skilltrace
