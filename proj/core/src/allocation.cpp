#include "skilltrace/allocation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "skilltrace/csv.hpp"
#include "skilltrace/errors.hpp"

namespace skilltrace {

const char* to_string(InfluenceKind kind) noexcept {
  return kind == InfluenceKind::linear ? "linear" : "power";
}

const char* to_string(ObjectiveMode mode) noexcept {
  return mode == ObjectiveMode::sum_sentiment ? "sum" : "terminal";
}

void validate(const EngagementCurve& curve) {
  if (!(curve.sharpness > 0.0)) {
    throw Error(ErrorKind::Domain, "engagement sharpness must be positive");
  }
  if (!(curve.target > 0.0 && curve.target < 1.0)) {
    throw Error(ErrorKind::Domain, "engagement target must lie in (0, 1)");
  }
  if (!std::isfinite(curve.peak)) {
    throw Error(ErrorKind::Domain, "engagement peak must be finite");
  }
}

double engagement_weight(double p_mastery, const EngagementCurve& curve) {
  validate(curve);
  if (!(p_mastery >= 0.0 && p_mastery <= 1.0)) {
    throw Error(ErrorKind::Domain, "mastery must lie in [0, 1]");
  }
  const double d = p_mastery - curve.target;
  return -curve.sharpness * d * d + curve.peak;
}

void validate(const InfluenceModel& model, std::size_t resources) {
  if (model.weights.size() != resources) {
    throw Error(ErrorKind::Shape, "influence weights must cover every resource");
  }
  for (double w : model.weights) {
    if (!std::isfinite(w)) {
      throw Error(ErrorKind::Domain, "influence weight must be finite");
    }
  }
  if (model.kind == InfluenceKind::power) {
    if (!(model.exponent > 0.0 && model.exponent <= 1.0)) {
      throw Error(ErrorKind::Model, "power exponent must lie in (0, 1]");
    }
    for (double w : model.weights) {
      if (w < 0.0) {
        throw Error(ErrorKind::Model,
                    "power influence requires nonnegative weights");
      }
    }
  }
}

InfluenceModel make_influence(InfluenceKind kind, double exponent,
                              std::vector<double> weights) {
  InfluenceModel model;
  model.kind = kind;
  model.exponent = kind == InfluenceKind::power ? exponent : 1.0;
  model.weights = std::move(weights);
  validate(model, model.weights.size());
  return model;
}

InfluenceModel influence_from_mastery(InfluenceKind kind, double exponent,
                                      const std::vector<EngagementCurve>& curves,
                                      const std::vector<double>& mastery) {
  if (curves.size() != mastery.size()) {
    throw Error(ErrorKind::Shape, "one engagement curve per resource required");
  }
  InfluenceModel model;
  model.kind = kind;
  model.exponent = kind == InfluenceKind::power ? exponent : 1.0;
  model.weights.reserve(curves.size());
  for (std::size_t j = 0; j < curves.size(); ++j) {
    double w = engagement_weight(mastery[j], curves[j]);
    if (kind == InfluenceKind::power && w < 0.0) {
      w = 0.0;  // negative weight would break concavity of w * R^k
      model.weights_clamped = true;
    }
    model.weights.push_back(w);
  }
  validate(model, model.weights.size());
  return model;
}

void validate(const AllocationProblem& problem) {
  if (problem.sessions < 1 || problem.resources < 1) {
    throw Error(ErrorKind::Validation, "need at least one session and resource");
  }
  if (problem.budgets.size() != problem.sessions) {
    throw Error(ErrorKind::Shape, "one budget per session required");
  }
  for (double b : problem.budgets) {
    if (!(b > 0.0) || !std::isfinite(b)) {
      throw Error(ErrorKind::Validation, "budgets must be positive and finite");
    }
  }
  if (!(problem.volatility >= 0.0 && problem.volatility <= 1.0)) {
    throw Error(ErrorKind::Domain, "volatility must lie in [0, 1]");
  }
  if (!std::isfinite(problem.initial_sentiment)) {
    throw Error(ErrorKind::Domain, "initial sentiment must be finite");
  }
  validate(problem.influence, problem.resources);
  for (const PrecedenceConstraint& c : problem.precedence) {
    if (c.dependent >= problem.resources || c.prerequisite >= problem.resources) {
      throw Error(ErrorKind::Shape, "precedence resource index out of range");
    }
    if (c.dependent == c.prerequisite) {
      throw Error(ErrorKind::Validation,
                  "precedence must couple two distinct resources");
    }
    if (!(c.scale > 0.0)) {
      throw Error(ErrorKind::Validation, "precedence scale must be positive");
    }
    if (!(c.threshold >= 0.0)) {
      throw Error(ErrorKind::Validation, "precedence threshold must be >= 0");
    }
  }
}

AllocationMatrix zero_allocation(std::size_t resources, std::size_t sessions) {
  return AllocationMatrix(resources, std::vector<double>(sessions, 0.0));
}

namespace {

void check_dimensions(const AllocationMatrix& allocation,
                      const AllocationProblem& problem) {
  if (allocation.size() != problem.resources) {
    throw Error(ErrorKind::Shape, "allocation resource dimension mismatch");
  }
  for (const auto& row : allocation) {
    if (row.size() != problem.sessions) {
      throw Error(ErrorKind::Shape, "allocation session dimension mismatch");
    }
  }
}

}  // namespace

std::vector<double> session_influences(const AllocationMatrix& allocation,
                                       const AllocationProblem& problem) {
  check_dimensions(allocation, problem);
  const InfluenceModel& f = problem.influence;
  std::vector<double> values(problem.sessions, 0.0);
  for (std::size_t i = 0; i < problem.sessions; ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < problem.resources; ++j) {
      const double r = allocation[j][i];
      v += f.kind == InfluenceKind::linear
               ? f.weights[j] * r
               : f.weights[j] * std::pow(r, f.exponent);
    }
    values[i] = v;
  }
  return values;
}

std::vector<double> sentiment_trajectory(const AllocationMatrix& allocation,
                                         const AllocationProblem& problem) {
  const std::vector<double> f = session_influences(allocation, problem);
  std::vector<double> s(problem.sessions, 0.0);
  double prev = problem.initial_sentiment;
  for (std::size_t i = 0; i < problem.sessions; ++i) {
    prev = problem.volatility * prev + (1.0 - problem.volatility) * f[i];
    s[i] = prev;
  }
  return s;
}

std::vector<double> objective_weights(const AllocationProblem& problem) {
  validate(problem);
  const double theta = problem.volatility;
  const std::size_t n = problem.sessions;
  std::vector<double> d(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    if (problem.mode == ObjectiveMode::sum_sentiment) {
      // sum_i s_i = s_0 sum theta^i + sum_t (1 - theta^(n-t)) f_t  (0-based t)
      d[t] = 1.0 - std::pow(theta, static_cast<double>(n - t));
    } else {
      // s_n = theta^n s_0 + sum_t (1 - theta) theta^(n-1-t) f_t
      d[t] = (1.0 - theta) * std::pow(theta, static_cast<double>(n - 1 - t));
    }
  }
  return d;
}

double objective_constant(const AllocationProblem& problem) {
  const double theta = problem.volatility;
  const double n = static_cast<double>(problem.sessions);
  if (problem.mode == ObjectiveMode::terminal_sentiment) {
    return std::pow(theta, n) * problem.initial_sentiment;
  }
  double geometric = 0.0;  // sum_{i=1..n} theta^i
  double power = theta;
  for (std::size_t i = 0; i < problem.sessions; ++i) {
    geometric += power;
    power *= theta;
  }
  return geometric * problem.initial_sentiment;
}

double objective_value(const AllocationMatrix& allocation,
                       const AllocationProblem& problem) {
  const std::vector<double> f = session_influences(allocation, problem);
  const std::vector<double> d = objective_weights(problem);
  double value = objective_constant(problem);
  for (std::size_t t = 0; t < problem.sessions; ++t) value += d[t] * f[t];
  return value;
}

double primal_violation(const AllocationMatrix& allocation,
                        const AllocationProblem& problem) {
  check_dimensions(allocation, problem);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < problem.sessions; ++i) {
    double column = 0.0;
    for (std::size_t j = 0; j < problem.resources; ++j) {
      column += allocation[j][i];
      worst = std::max(worst, -allocation[j][i]);
    }
    worst = std::max(worst, column - problem.budgets[i]);
  }
  for (const PrecedenceConstraint& c : problem.precedence) {
    double cum_dep = 0.0, cum_pre = 0.0;
    for (std::size_t i = 0; i < problem.sessions; ++i) {
      cum_dep += allocation[c.dependent][i];
      cum_pre += allocation[c.prerequisite][i];
      const double bound = c.scale * std::max(cum_pre - c.threshold, 0.0);
      worst = std::max(worst, cum_dep - bound);
    }
  }
  return worst;
}

std::vector<std::size_t> implied_prefix_lengths(const AllocationMatrix& allocation,
                                                const AllocationProblem& problem) {
  check_dimensions(allocation, problem);
  std::vector<std::size_t> prefixes;
  prefixes.reserve(problem.precedence.size());
  for (const PrecedenceConstraint& c : problem.precedence) {
    double cum_pre = 0.0;
    std::size_t prefix = problem.sessions;
    for (std::size_t i = 0; i < problem.sessions; ++i) {
      cum_pre += allocation[c.prerequisite][i];
      if (cum_pre >= c.threshold) {
        prefix = i;
        break;
      }
    }
    prefixes.push_back(prefix);
  }
  return prefixes;
}

bool suffix_feasible(const AllocationMatrix& allocation,
                     const AllocationProblem& problem,
                     const std::vector<std::size_t>& prefix_lengths, double eps) {
  check_dimensions(allocation, problem);
  if (prefix_lengths.size() != problem.precedence.size()) {
    throw Error(ErrorKind::Shape, "one prefix length per precedence constraint");
  }
  for (std::size_t i = 0; i < problem.sessions; ++i) {
    double column = 0.0;
    for (std::size_t j = 0; j < problem.resources; ++j) {
      if (allocation[j][i] < -eps) return false;
      column += allocation[j][i];
    }
    if (column > problem.budgets[i] + eps) return false;
  }
  for (std::size_t c = 0; c < problem.precedence.size(); ++c) {
    const PrecedenceConstraint& pc = problem.precedence[c];
    const std::size_t prefix = prefix_lengths[c];
    double cum_dep = 0.0, cum_pre = 0.0;
    for (std::size_t i = 0; i < problem.sessions; ++i) {
      cum_dep += allocation[pc.dependent][i];
      cum_pre += allocation[pc.prerequisite][i];
      if (i < prefix) {
        if (cum_dep > eps) return false;  // zero prefix
      } else {
        if (cum_dep > pc.scale * (cum_pre - pc.threshold) + eps) return false;
      }
    }
  }
  return true;
}

namespace {

struct VarMap {
  std::vector<std::vector<int>> index;             // [resource][session] -> kept id
  std::vector<std::pair<std::size_t, std::size_t>> vars;  // kept id -> (j, i)
};

VarMap build_var_map(const AllocationProblem& problem,
                     const std::vector<std::size_t>& prefixes) {
  VarMap map;
  map.index.assign(problem.resources,
                   std::vector<int>(problem.sessions, 0));
  std::vector<std::vector<char>> eliminated(
      problem.resources, std::vector<char>(problem.sessions, 0));
  for (std::size_t c = 0; c < problem.precedence.size(); ++c) {
    const std::size_t dep = problem.precedence[c].dependent;
    for (std::size_t i = 0; i < prefixes[c] && i < problem.sessions; ++i) {
      eliminated[dep][i] = 1;
    }
  }
  for (std::size_t j = 0; j < problem.resources; ++j) {
    for (std::size_t i = 0; i < problem.sessions; ++i) {
      if (eliminated[j][i]) {
        map.index[j][i] = -1;
      } else {
        map.index[j][i] = static_cast<int>(map.vars.size());
        map.vars.emplace_back(j, i);
      }
    }
  }
  return map;
}

// Builds the convex subproblem for one suffix combination. The objective is
// the negated discounted influence sum over kept variables.
barrier::Program build_subproblem(const AllocationProblem& problem,
                                  const std::vector<double>& discounts,
                                  const std::vector<std::size_t>& prefixes,
                                  const VarMap& map) {
  barrier::Program program;
  program.num_vars = map.vars.size();
  program.objective.linear.assign(program.num_vars, 0.0);

  const InfluenceModel& f = problem.influence;
  for (std::size_t v = 0; v < map.vars.size(); ++v) {
    const auto [j, i] = map.vars[v];
    const double coeff = discounts[i] * f.weights[j];
    if (coeff == 0.0) continue;
    if (f.kind == InfluenceKind::linear || f.exponent == 1.0) {
      program.objective.linear[v] = -coeff;
    } else {
      program.objective.powers.push_back({v, -coeff, f.exponent});
    }
  }

  for (std::size_t v = 0; v < map.vars.size(); ++v) {
    barrier::LinearConstraint row;
    row.terms.emplace_back(v, -1.0);
    row.rhs = 0.0;
    const auto [j, i] = map.vars[v];
    row.label = "nonneg[r" + std::to_string(j) + ",s" + std::to_string(i) + "]";
    program.linear.push_back(std::move(row));
  }

  for (std::size_t i = 0; i < problem.sessions; ++i) {
    barrier::LinearConstraint row;
    for (std::size_t j = 0; j < problem.resources; ++j) {
      if (map.index[j][i] >= 0) {
        row.terms.emplace_back(static_cast<std::size_t>(map.index[j][i]), 1.0);
      }
    }
    if (row.terms.empty()) continue;
    row.rhs = problem.budgets[i];
    row.label = "budget[s" + std::to_string(i) + "]";
    program.linear.push_back(std::move(row));
  }

  for (std::size_t c = 0; c < problem.precedence.size(); ++c) {
    const PrecedenceConstraint& pc = problem.precedence[c];
    for (std::size_t j = prefixes[c]; j < problem.sessions; ++j) {
      barrier::LinearConstraint row;
      for (std::size_t i = 0; i <= j; ++i) {
        if (map.index[pc.dependent][i] >= 0) {
          row.terms.emplace_back(
              static_cast<std::size_t>(map.index[pc.dependent][i]), 1.0);
        }
        if (map.index[pc.prerequisite][i] >= 0) {
          row.terms.emplace_back(
              static_cast<std::size_t>(map.index[pc.prerequisite][i]), -pc.scale);
        }
      }
      row.rhs = -pc.scale * pc.threshold;
      row.label = "precedence[" + std::to_string(c) + "]@s" + std::to_string(j);
      program.linear.push_back(std::move(row));
    }
  }
  return program;
}

// Cheap necessary condition: an activation at prefix q needs the prerequisite
// cumulative to clear the threshold within the first q+1 sessions.
bool combo_possibly_feasible(const AllocationProblem& problem,
                             const std::vector<std::size_t>& prefixes) {
  for (std::size_t c = 0; c < problem.precedence.size(); ++c) {
    const std::size_t q = prefixes[c];
    if (q >= problem.sessions) continue;  // never active, nothing to clear
    double capacity = 0.0;
    for (std::size_t i = 0; i <= q; ++i) capacity += problem.budgets[i];
    if (capacity <= problem.precedence[c].threshold) return false;
  }
  return true;
}

struct SubproblemResult {
  bool feasible = false;
  double objective = -std::numeric_limits<double>::infinity();  // maximized
  std::vector<double> x;
  barrier::Solution solution;
  std::vector<std::size_t> prefixes;
  std::string infeasible_label;
};

SubproblemResult solve_subproblem(const AllocationProblem& problem,
                                  const std::vector<double>& discounts,
                                  const std::vector<std::size_t>& prefixes,
                                  const SolverOptions& options) {
  SubproblemResult result;
  result.prefixes = prefixes;
  if (!combo_possibly_feasible(problem, prefixes)) return result;

  const VarMap map = build_var_map(problem, prefixes);
  if (map.vars.empty()) {
    // Everything eliminated: the zero allocation is the only point.
    result.feasible = true;
    result.objective = objective_constant(problem);
    return result;
  }

  const barrier::Program program = build_subproblem(problem, discounts, prefixes, map);
  const barrier::Solution solution = barrier::solve(program, options.barrier);
  if (!solution.feasible) {
    result.infeasible_label = solution.infeasible_label;
    return result;
  }
  result.feasible = true;
  result.x = solution.x;
  result.objective = objective_constant(problem) - solution.objective;
  result.solution = solution;
  return result;
}

AllocationMatrix expand(const VarMap& map, const std::vector<double>& x,
                        std::size_t resources, std::size_t sessions) {
  AllocationMatrix allocation = zero_allocation(resources, sessions);
  for (std::size_t v = 0; v < map.vars.size(); ++v) {
    const auto [j, i] = map.vars[v];
    allocation[j][i] = x[v];
  }
  return allocation;
}

// min ||A x - b||_2 subject to x >= 0 (Lawson-Hanson active set, deterministic
// first-index tie-breaking).
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::Index n = A.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (n == 0) return x;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) *
                     std::max(1.0, b.cwiseAbs().maxCoeff());

  const auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    }
    z.setZero(n);
    if (cols.empty()) return;
    Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) Ap.col(static_cast<Eigen::Index>(c)) = A.col(cols[c]);
    const Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    for (std::size_t c = 0; c < cols.size(); ++c) z(cols[c]) = zp(static_cast<Eigen::Index>(c));
  };

  for (int outer = 0; outer < 3 * n + 30; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    Eigen::VectorXd z;
    for (int inner = 0; inner < n + 1; ++inner) {
      solve_passive(z);
      bool all_positive = true;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!passive[static_cast<std::size_t>(j)] || z(j) > 0.0) continue;
        all_positive = false;
        const double denom = x(j) - z(j);
        if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
      }
      if (all_positive) {
        x = z;
        break;
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  return x.cwiseMax(0.0);
}

// Odometer over {0..n}^constraints in lexicographic order, so equal objectives
// keep the smallest activation indices.
bool advance(std::vector<std::size_t>& combo, std::size_t limit) {
  for (std::size_t pos = combo.size(); pos-- > 0;) {
    if (combo[pos] < limit) {
      ++combo[pos];
      std::fill(combo.begin() + static_cast<std::ptrdiff_t>(pos) + 1, combo.end(), 0);
      return true;
    }
  }
  return false;
}

AllocationPlan degenerate_plan(const AllocationProblem& problem) {
  AllocationPlan plan;
  plan.allocation = zero_allocation(problem.resources, problem.sessions);
  plan.sentiment = sentiment_trajectory(plan.allocation, problem);
  plan.objective = objective_value(plan.allocation, problem);
  plan.activation_index.assign(problem.precedence.size(), problem.sessions);
  plan.degenerate_volatility = true;
  return plan;
}

}  // namespace

AllocationPlan solve_allocation(const AllocationProblem& problem,
                                const SolverOptions& options) {
  validate(problem);
  const std::vector<double> discounts = objective_weights(problem);
  double max_discount = 0.0;
  for (double d : discounts) max_discount = std::max(max_discount, d);
  if (max_discount == 0.0) {
    return degenerate_plan(problem);  // theta == 1: objective ignores R
  }

  SubproblemResult best;
  std::string last_label;
  std::vector<std::size_t> combo(problem.precedence.size(), 0);
  while (true) {
    SubproblemResult candidate = solve_subproblem(problem, discounts, combo, options);
    if (candidate.feasible && candidate.objective > best.objective) {
      best = std::move(candidate);
    } else if (!candidate.feasible && !candidate.infeasible_label.empty()) {
      last_label = candidate.infeasible_label;
    }
    if (combo.empty() || !advance(combo, problem.sessions)) break;
  }

  if (!best.feasible) {
    throw Error(ErrorKind::Infeasible,
                "no feasible activation suffix; binding constraint: " +
                    (last_label.empty() ? std::string("budget/nonnegativity")
                                        : last_label));
  }

  AllocationPlan plan;
  const VarMap map = build_var_map(problem, best.prefixes);
  plan.allocation = best.x.empty()
                        ? zero_allocation(problem.resources, problem.sessions)
                        : expand(map, best.x, problem.resources, problem.sessions);
  plan.sentiment = sentiment_trajectory(plan.allocation, problem);
  plan.objective = objective_value(plan.allocation, problem);
  plan.activation_index = best.prefixes;
  plan.kkt = check_kkt(plan, problem, options);
  return plan;
}

namespace {

struct StudentBlock {
  VarMap map;
  std::size_t offset = 0;  // first joint-variable index of this student
  std::vector<std::size_t> prefixes;
  std::vector<double> discounts;
};

}  // namespace

GroupPlan solve_group_maximin(const std::vector<AllocationProblem>& problems,
                              const SolverOptions& options) {
  if (problems.empty()) {
    throw Error(ErrorKind::Validation, "group maximin needs at least one student");
  }
  for (const AllocationProblem& p : problems) {
    validate(p);
    if (p.sessions != problems.front().sessions ||
        p.resources != problems.front().resources ||
        p.budgets != problems.front().budgets) {
      throw Error(ErrorKind::Validation,
                  "group members must share sessions, resources and budgets");
    }
  }

  // Per-student allocations are independent, so in the product enumeration of
  // suffix candidates every combination containing a suboptimal per-student
  // suffix is dominated; each student's individually best suffix survives the
  // bound pruning. Solve per student first, then certify jointly.
  std::vector<AllocationPlan> individual;
  individual.reserve(problems.size());
  for (const AllocationProblem& p : problems) {
    individual.push_back(solve_allocation(p, options));
  }

  GroupPlan group;
  group.plans = individual;
  double bound = std::numeric_limits<double>::infinity();
  for (const AllocationPlan& plan : individual) {
    bound = std::min(bound, plan.objective);
  }

  // Degenerate members have fixed objectives; the epigraph solve only refines
  // the certified common floor over the non-degenerate ones.
  bool all_degenerate = true;
  for (const AllocationPlan& plan : individual) {
    if (!plan.degenerate_volatility) all_degenerate = false;
  }
  if (all_degenerate) {
    group.lower_bound = bound;
    return group;
  }

  // Joint epigraph program: maximize t subject to objective_s(x_s) >= t.
  std::vector<StudentBlock> blocks(problems.size());
  std::size_t total_vars = 0;
  for (std::size_t s = 0; s < problems.size(); ++s) {
    blocks[s].prefixes = individual[s].activation_index;
    blocks[s].map = build_var_map(problems[s], blocks[s].prefixes);
    blocks[s].offset = total_vars;
    blocks[s].discounts = objective_weights(problems[s]);
    total_vars += blocks[s].map.vars.size();
  }
  const std::size_t t_var = total_vars;

  barrier::Program joint;
  joint.num_vars = total_vars + 1;
  joint.objective.linear.assign(joint.num_vars, 0.0);
  joint.objective.linear[t_var] = -1.0;  // maximize t

  std::vector<double> start(joint.num_vars, 0.0);
  double start_t = std::numeric_limits<double>::infinity();

  for (std::size_t s = 0; s < problems.size(); ++s) {
    const AllocationProblem& p = problems[s];
    const StudentBlock& block = blocks[s];
    barrier::Program sub = build_subproblem(p, block.discounts, block.prefixes, block.map);

    for (barrier::LinearConstraint row : sub.linear) {
      for (auto& [var, coeff] : row.terms) var += block.offset;
      row.label = "student" + std::to_string(s) + ":" + row.label;
      joint.linear.push_back(std::move(row));
    }

    // t - objective_s(x_s) <= 0. sub.objective already carries the negated
    // influence sum, so reuse it shifted by the student's constant.
    barrier::SeparableFunc epi;
    epi.constant = -objective_constant(p);
    epi.linear.assign(joint.num_vars, 0.0);
    for (std::size_t v = 0; v < sub.objective.linear.size(); ++v) {
      epi.linear[v + block.offset] = sub.objective.linear[v];
    }
    epi.linear[t_var] = 1.0;
    for (barrier::PowerTerm term : sub.objective.powers) {
      term.var += block.offset;
      epi.powers.push_back(term);
    }
    joint.nonlinear.push_back(std::move(epi));

    // Strictly feasible start: the student's own interior point.
    auto interior = barrier::phase1(sub, options.barrier);
    if (!interior.has_value()) {
      throw Error(ErrorKind::Infeasible,
                  "student " + std::to_string(s) + " has no interior point");
    }
    AllocationMatrix alloc = expand(block.map, *interior, p.resources, p.sessions);
    start_t = std::min(start_t, objective_value(alloc, p));
    for (std::size_t v = 0; v < interior->size(); ++v) {
      start[block.offset + v] = (*interior)[v];
    }
  }
  start[t_var] = start_t - 1.0;

  const barrier::Solution solution = barrier::solve(joint, options.barrier, &start);
  if (!solution.feasible) {
    throw Error(ErrorKind::Numerical, "joint epigraph solve failed");
  }

  group.lower_bound = solution.x[t_var];
  for (std::size_t s = 0; s < problems.size(); ++s) {
    const StudentBlock& block = blocks[s];
    if (individual[s].degenerate_volatility) continue;  // keeps its zero plan
    if (block.map.vars.empty()) continue;
    std::vector<double> xs(block.map.vars.size());
    for (std::size_t v = 0; v < xs.size(); ++v) xs[v] = solution.x[block.offset + v];
    AllocationPlan& plan = group.plans[s];
    plan.allocation = expand(block.map, xs, problems[s].resources, problems[s].sessions);
    plan.sentiment = sentiment_trajectory(plan.allocation, problems[s]);
    plan.objective = objective_value(plan.allocation, problems[s]);
    plan.activation_index = block.prefixes;
    // Joint-system residuals: non-binding students are not individually
    // stationary, so the per-problem check does not apply here.
    plan.kkt.primal_residual =
        std::max(0.0, primal_violation(plan.allocation, problems[s]));
    plan.kkt.stationarity_residual = solution.stationarity_residual;
    plan.kkt.complementarity_residual = 1.0 / solution.barrier_parameter;
  }
  return group;
}

KktReport check_kkt(const AllocationPlan& plan, const AllocationProblem& problem,
                    const SolverOptions& options) {
  validate(problem);
  check_dimensions(plan.allocation, problem);

  KktReport report;
  report.primal_residual = std::max(0.0, primal_violation(plan.allocation, problem));
  if (plan.degenerate_volatility) return report;  // objective ignores R

  const std::vector<std::size_t> prefixes =
      plan.activation_index.size() == problem.precedence.size()
          ? plan.activation_index
          : implied_prefix_lengths(plan.allocation, problem);
  const VarMap map = build_var_map(problem, prefixes);
  const std::vector<double> discounts = objective_weights(problem);
  const barrier::Program program =
      build_subproblem(problem, discounts, prefixes, map);

  std::vector<double> x(map.vars.size());
  for (std::size_t v = 0; v < map.vars.size(); ++v) {
    const auto [j, i] = map.vars[v];
    x[v] = plan.allocation[j][i];
  }

  // Gradient of the minimized objective at the plan.
  std::vector<double> gradient(map.vars.size(), 0.0);
  if (!x.empty()) program.objective.accumulate_gradient(x, 1.0, gradient);

  std::vector<double> slack(program.linear.size());
  bool strictly_interior = true;
  for (std::size_t r = 0; r < program.linear.size(); ++r) {
    slack[r] = program.linear[r].rhs - program.linear[r].value(x);
    if (slack[r] <= 0.0) strictly_interior = false;
  }

  const auto score = [&](const std::vector<double>& duals)
      -> std::pair<double, double> {
    std::vector<double> residual = gradient;
    double complementarity = 0.0;
    for (std::size_t r = 0; r < program.linear.size(); ++r) {
      if (duals[r] == 0.0) continue;
      for (const auto& [var, coeff] : program.linear[r].terms) {
        residual[var] += duals[r] * coeff;
      }
      complementarity = std::max(complementarity, std::abs(duals[r] * slack[r]));
    }
    double stationarity = 0.0;
    for (double r : residual) stationarity = std::max(stationarity, std::abs(r));
    return {stationarity, complementarity};
  };

  // Certificate 1: nonnegative least-squares duals over the near-active rows.
  // Exact whenever the plan sits at a true optimum, whatever produced it.
  std::vector<double> nnls_duals(program.linear.size(), 0.0);
  {
    std::vector<std::size_t> working;
    for (std::size_t r = 0; r < program.linear.size(); ++r) {
      if (slack[r] <= options.kkt_active_slack) working.push_back(r);
    }
    const std::size_t n = map.vars.size();
    if (!working.empty() && n > 0) {
      Eigen::MatrixXd A(n, working.size());
      A.setZero();
      for (std::size_t c = 0; c < working.size(); ++c) {
        for (const auto& [var, coeff] : program.linear[working[c]].terms) {
          A(static_cast<Eigen::Index>(var), static_cast<Eigen::Index>(c)) = coeff;
        }
      }
      Eigen::VectorXd minus_g(n);
      for (std::size_t v = 0; v < n; ++v) minus_g(v) = -gradient[v];
      const Eigen::VectorXd lambda = nnls(A, minus_g);
      for (std::size_t c = 0; c < working.size(); ++c) {
        nnls_duals[working[c]] = lambda(static_cast<Eigen::Index>(c));
      }
    }
  }
  auto [stationarity, complementarity] = score(nnls_duals);

  // Certificate 2: central-path duals 1/(t * slack) at the barrier parameter
  // the solver finishes on. Tightest for plans coming off the central path.
  if (strictly_interior && !program.linear.empty()) {
    const double t =
        barrier::final_barrier_parameter(program.linear.size(), options.barrier);
    std::vector<double> central(program.linear.size());
    for (std::size_t r = 0; r < program.linear.size(); ++r) {
      central[r] = 1.0 / (t * slack[r]);
    }
    auto [central_stationarity, central_complementarity] = score(central);
    if (central_stationarity < stationarity) {
      stationarity = central_stationarity;
      complementarity = central_complementarity;
    }
  }

  report.stationarity_residual = stationarity;
  report.complementarity_residual = complementarity;
  return report;
}

std::vector<AllocationProblem> demo_profiles() {
  // Five n=30, m=2 (theory, application) student configurations with distinct
  // volatility, weights and unlock parameters; budgets default to 1.
  std::vector<AllocationProblem> profiles;
  const std::size_t n = 30;
  const std::vector<double> budgets(n, 1.0);

  {
    AllocationProblem p;
    p.name = "steady_theorist";
    p.sessions = n;
    p.resources = 2;
    p.budgets = budgets;
    p.volatility = 0.2;
    p.initial_sentiment = 0.0;
    p.influence = make_influence(InfluenceKind::linear, 1.0, {1.0, 0.6});
    p.precedence.push_back({1, 0, 1.0, 2.0});
    profiles.push_back(std::move(p));
  }
  {
    AllocationProblem p;
    p.name = "eager_applier";
    p.sessions = n;
    p.resources = 2;
    p.budgets = budgets;
    p.volatility = 0.5;
    p.initial_sentiment = 0.1;
    p.influence = make_influence(InfluenceKind::linear, 1.0, {0.5, 1.0});
    p.precedence.push_back({1, 0, 2.0, 3.0});
    profiles.push_back(std::move(p));
  }
  {
    AllocationProblem p;
    p.name = "volatile_generalist";
    p.sessions = n;
    p.resources = 2;
    p.budgets = budgets;
    p.volatility = 0.8;
    p.initial_sentiment = -0.2;
    p.influence = influence_from_mastery(
        InfluenceKind::linear, 1.0,
        {EngagementCurve{2.0, 1.0, 0.5}, EngagementCurve{2.0, 1.0, 0.5}},
        {0.35, 0.55});
    p.precedence.push_back({1, 0, 1.5, 4.0});
    profiles.push_back(std::move(p));
  }
  {
    AllocationProblem p;
    p.name = "power_balanced";
    p.sessions = n;
    p.resources = 2;
    p.budgets = budgets;
    p.volatility = 0.4;
    p.initial_sentiment = 0.0;
    p.influence = make_influence(InfluenceKind::power, 0.5, {1.0, 1.0});
    p.precedence.push_back({1, 0, 1.5, 5.0});
    profiles.push_back(std::move(p));
  }
  {
    AllocationProblem p;
    p.name = "power_theory_first";
    p.sessions = n;
    p.resources = 2;
    p.budgets = budgets;
    p.volatility = 0.6;
    p.initial_sentiment = 0.2;
    p.influence = make_influence(InfluenceKind::power, 0.7, {1.2, 0.8});
    p.precedence.push_back({1, 0, 1.0, 4.0});
    profiles.push_back(std::move(p));
  }
  return profiles;
}

void write_plan_csv(std::ostream& out, const AllocationPlan& plan) {
  csv::write_row(out, {"session", "resource", "amount", "sentiment"});
  const std::size_t resources = plan.allocation.size();
  const std::size_t sessions = resources == 0 ? 0 : plan.allocation.front().size();
  for (std::size_t i = 0; i < sessions; ++i) {
    for (std::size_t j = 0; j < resources; ++j) {
      csv::write_row(out, {std::to_string(i + 1), std::to_string(j + 1),
                           csv::format_double(plan.allocation[j][i]),
                           csv::format_double(plan.sentiment[i])});
    }
  }
}

}  // namespace skilltrace
