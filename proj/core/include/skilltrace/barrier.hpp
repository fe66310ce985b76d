#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace skilltrace::barrier {

// One monomial term coeff * x_var^exponent with coeff <= 0 and
// 0 < exponent <= 1, so the term is convex on x_var > 0.
struct PowerTerm {
  std::size_t var = 0;
  double coeff = 0.0;
  double exponent = 1.0;
};

// constant + linear . x + sum of power terms. Used for both the objective
// and nonlinear inequality constraints g(x) <= 0.
struct SeparableFunc {
  double constant = 0.0;
  std::vector<double> linear;  // sized num_vars (may be empty == all zero)
  std::vector<PowerTerm> powers;

  double value(const std::vector<double>& x) const;
  // g += scale * gradient(x)
  void accumulate_gradient(const std::vector<double>& x, double scale,
                           std::vector<double>& g) const;
  // h_diag += scale * diag(hessian(x)); the hessian is diagonal by construction
  void accumulate_hessian_diag(const std::vector<double>& x, double scale,
                               std::vector<double>& h) const;
};

struct LinearConstraint {
  std::vector<std::pair<std::size_t, double>> terms;  // sparse row
  double rhs = 0.0;
  std::string label;

  double value(const std::vector<double>& x) const;  // row . x
};

struct Program {
  std::size_t num_vars = 0;
  SeparableFunc objective;                  // minimized
  std::vector<LinearConstraint> linear;     // row . x <= rhs
  std::vector<SeparableFunc> nonlinear;     // g(x) <= 0, convex
};

struct Options {
  double mu = 10.0;                // outer barrier-parameter growth factor
  double gap_tolerance = 1e-8;     // stop when m / t falls below
  double newton_tolerance = 1e-16; // on the squared Newton decrement / 2
  int max_newton_iterations = 100;
  double t0 = 1.0;
  double phase1_target = 1e-7;     // strict-interior margin phase I must reach
};

struct Solution {
  bool feasible = false;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> linear_duals;     // one per linear row
  std::vector<double> nonlinear_duals;  // one per nonlinear constraint
  double gap_estimate = 0.0;
  double barrier_parameter = 0.0;       // final t; duals are 1 / (t * slack)
  double stationarity_residual = 0.0;   // ||grad f0 + sum dual_i grad g_i||_inf
  std::string infeasible_label;         // most violated row when infeasible
};

// The final barrier parameter the outer loop reaches for a given constraint
// count; lets independent checkers reproduce central-path duals from slacks.
double final_barrier_parameter(std::size_t num_constraints, const Options& options);

// Follows the primal central path with damped Newton centering. When `start`
// is null a phase-I solve over the affine rows supplies the interior point
// (the program must then have no nonlinear constraints at phase-I time that
// the affine interior point could violate; callers with nonlinear rows pass
// their own strictly feasible start).
Solution solve(const Program& program, const Options& options = {},
               const std::vector<double>* start = nullptr);

// minimize s subject to row . x - rhs <= s over the affine rows; returns a
// strictly feasible x (margin >= options.phase1_target) or nothing.
std::optional<std::vector<double>> phase1(const Program& program,
                                          const Options& options = {});

}  // namespace skilltrace::barrier
