#include "skilltrace/barrier.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "skilltrace/errors.hpp"

namespace skilltrace::barrier {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_power_terms(const SeparableFunc& f, std::size_t num_vars,
                       const char* where) {
  if (!f.linear.empty() && f.linear.size() != num_vars) {
    throw Error(ErrorKind::Shape, std::string(where) + ": linear part sized wrong");
  }
  for (const PowerTerm& t : f.powers) {
    if (t.var >= num_vars) {
      throw Error(ErrorKind::Shape, std::string(where) + ": power term out of range");
    }
    if (!(t.exponent > 0.0 && t.exponent <= 1.0)) {
      throw Error(ErrorKind::Model,
                  std::string(where) + ": power exponent must lie in (0, 1]");
    }
    if (t.coeff > 0.0) {
      throw Error(ErrorKind::Model,
                  std::string(where) + ": positive power coefficient breaks convexity");
    }
  }
}

}  // namespace

double SeparableFunc::value(const std::vector<double>& x) const {
  double v = constant;
  for (std::size_t i = 0; i < linear.size(); ++i) v += linear[i] * x[i];
  for (const PowerTerm& t : powers) {
    v += t.coeff * std::pow(x[t.var], t.exponent);
  }
  return v;
}

void SeparableFunc::accumulate_gradient(const std::vector<double>& x, double scale,
                                        std::vector<double>& g) const {
  for (std::size_t i = 0; i < linear.size(); ++i) g[i] += scale * linear[i];
  for (const PowerTerm& t : powers) {
    g[t.var] += scale * t.coeff * t.exponent * std::pow(x[t.var], t.exponent - 1.0);
  }
}

void SeparableFunc::accumulate_hessian_diag(const std::vector<double>& x,
                                            double scale,
                                            std::vector<double>& h) const {
  for (const PowerTerm& t : powers) {
    if (t.exponent == 1.0) continue;
    h[t.var] += scale * t.coeff * t.exponent * (t.exponent - 1.0) *
                std::pow(x[t.var], t.exponent - 2.0);
  }
}

double LinearConstraint::value(const std::vector<double>& x) const {
  double v = 0.0;
  for (const auto& [var, coeff] : terms) v += coeff * x[var];
  return v;
}

namespace {

struct Evaluation {
  bool interior = false;
  std::vector<double> linear_slack;     // rhs - row.x, > 0 when interior
  std::vector<double> nonlinear_slack;  // -g(x), > 0 when interior
};

// Variables appearing in any power term must stay strictly positive for the
// fractional powers to be defined.
bool power_domain_ok(const Program& p, const std::vector<double>& x) {
  for (const PowerTerm& t : p.objective.powers) {
    if (x[t.var] <= 0.0) return false;
  }
  for (const SeparableFunc& g : p.nonlinear) {
    for (const PowerTerm& t : g.powers) {
      if (x[t.var] <= 0.0) return false;
    }
  }
  return true;
}

Evaluation evaluate(const Program& p, const std::vector<double>& x) {
  Evaluation e;
  e.linear_slack.reserve(p.linear.size());
  for (const LinearConstraint& row : p.linear) {
    const double slack = row.rhs - row.value(x);
    if (slack <= 0.0) return e;  // interior stays false
    e.linear_slack.push_back(slack);
  }
  if (!power_domain_ok(p, x)) return e;
  e.nonlinear_slack.reserve(p.nonlinear.size());
  for (const SeparableFunc& g : p.nonlinear) {
    const double slack = -g.value(x);
    if (slack <= 0.0) return e;
    e.nonlinear_slack.push_back(slack);
  }
  e.interior = true;
  return e;
}

double barrier_value(const Program& p, double t, const std::vector<double>& x,
                     const Evaluation& e) {
  double v = t * p.objective.value(x);
  for (double s : e.linear_slack) v -= std::log(s);
  for (double s : e.nonlinear_slack) v -= std::log(s);
  return v;
}

// One centering run: minimize t*f0 + phi from a strictly feasible x.
// Returns the final gradient of the barrier function for dual extraction.
void center(const Program& p, double t, std::vector<double>& x,
            const Options& options) {
  const std::size_t n = p.num_vars;
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd hess(n, n);
  std::vector<double> g_buf(n);
  std::vector<double> h_buf(n);
  std::vector<double> nl_grad(n);

  for (int iter = 0; iter < options.max_newton_iterations; ++iter) {
    Evaluation e = evaluate(p, x);
    if (!e.interior) {
      throw Error(ErrorKind::Numerical, "barrier centering left the interior");
    }

    std::fill(g_buf.begin(), g_buf.end(), 0.0);
    std::fill(h_buf.begin(), h_buf.end(), 0.0);
    p.objective.accumulate_gradient(x, t, g_buf);
    p.objective.accumulate_hessian_diag(x, t, h_buf);

    hess.setZero();
    for (std::size_t i = 0; i < p.linear.size(); ++i) {
      const double inv_s = 1.0 / e.linear_slack[i];
      for (const auto& [var, coeff] : p.linear[i].terms) {
        g_buf[var] += coeff * inv_s;
      }
      for (const auto& [va, ca] : p.linear[i].terms) {
        for (const auto& [vb, cb] : p.linear[i].terms) {
          hess(va, vb) += ca * cb * inv_s * inv_s;
        }
      }
    }
    for (std::size_t i = 0; i < p.nonlinear.size(); ++i) {
      const double inv_s = 1.0 / e.nonlinear_slack[i];
      std::fill(nl_grad.begin(), nl_grad.end(), 0.0);
      p.nonlinear[i].accumulate_gradient(x, 1.0, nl_grad);
      for (std::size_t a = 0; a < n; ++a) g_buf[a] += nl_grad[a] * inv_s;
      for (std::size_t a = 0; a < n; ++a) {
        if (nl_grad[a] == 0.0) continue;
        for (std::size_t b = 0; b < n; ++b) {
          if (nl_grad[b] == 0.0) continue;
          hess(a, b) += nl_grad[a] * nl_grad[b] * inv_s * inv_s;
        }
      }
      p.nonlinear[i].accumulate_hessian_diag(x, inv_s, h_buf);
    }
    for (std::size_t i = 0; i < n; ++i) {
      grad(i) = g_buf[i];
      hess(i, i) += h_buf[i];
    }

    // Newton direction; ridge fallback for numerically defective systems.
    Eigen::VectorXd direction;
    double ridge = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      Eigen::MatrixXd h = hess;
      if (ridge > 0.0) h.diagonal().array() += ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() == Eigen::Success) {
        direction = -ldlt.solve(grad);
        if (direction.allFinite()) break;
      }
      ridge = ridge == 0.0 ? 1e-12 * hess.diagonal().maxCoeff() : ridge * 1e3;
      direction.resize(0);
    }
    if (direction.size() == 0) {
      throw Error(ErrorKind::Numerical, "Newton system could not be solved");
    }

    const double decrement_sq = -grad.dot(direction);
    if (decrement_sq * 0.5 <= options.newton_tolerance) return;

    std::vector<double> candidate(n);
    bool moved = false;
    if (decrement_sq < 0.01) {
      // Quadratic convergence region: the barrier value is too coarse at
      // large t to drive an Armijo test, so take the full Newton step on a
      // feasibility-only check and keep polishing the gradient.
      double step = 1.0;
      while (step > 1e-15) {
        for (std::size_t i = 0; i < n; ++i) candidate[i] = x[i] + step * direction(i);
        if (evaluate(p, candidate).interior) {
          x = candidate;
          moved = true;
          break;
        }
        step *= 0.5;
      }
    } else {
      const double f0 = barrier_value(p, t, x, e);
      const double slope = grad.dot(direction);  // negative
      double step = 1.0;
      while (step > 1e-15) {
        for (std::size_t i = 0; i < n; ++i) candidate[i] = x[i] + step * direction(i);
        const Evaluation ce = evaluate(p, candidate);
        if (ce.interior &&
            barrier_value(p, t, candidate, ce) <= f0 + 0.25 * step * slope) {
          x = candidate;
          moved = true;
          break;
        }
        step *= 0.5;
      }
    }
    if (!moved) return;  // stalled at numerical precision
  }
}

}  // namespace

double final_barrier_parameter(std::size_t num_constraints, const Options& options) {
  double t = options.t0;
  while (static_cast<double>(num_constraints) / t > options.gap_tolerance) {
    t *= options.mu;
  }
  return t;
}

std::optional<std::vector<double>> phase1(const Program& program,
                                          const Options& options) {
  if (!program.nonlinear.empty()) {
    throw Error(ErrorKind::Model, "phase1 handles affine rows only");
  }
  const std::size_t n = program.num_vars;
  Program p1;
  p1.num_vars = n + 1;
  p1.objective.linear.assign(n + 1, 0.0);
  p1.objective.linear[n] = 1.0;  // minimize s
  p1.linear.reserve(program.linear.size());
  for (const LinearConstraint& row : program.linear) {
    LinearConstraint shifted = row;
    shifted.terms.emplace_back(n, -1.0);
    p1.linear.push_back(std::move(shifted));
  }

  std::vector<double> x(n + 1, 0.0);
  double worst = 0.0;
  for (const LinearConstraint& row : program.linear) {
    worst = std::max(worst, row.value(x) - row.rhs);
  }
  x[n] = worst + 1.0;

  double t = options.t0;
  const double m = static_cast<double>(p1.linear.size());
  while (true) {
    center(p1, t, x, options);
    if (x[n] < -options.phase1_target) {
      x.pop_back();
      return x;
    }
    if (m / t <= options.gap_tolerance) break;
    t *= options.mu;
  }
  return std::nullopt;
}

Solution solve(const Program& program, const Options& options,
               const std::vector<double>* start) {
  check_power_terms(program.objective, program.num_vars, "objective");
  for (const SeparableFunc& g : program.nonlinear) {
    check_power_terms(g, program.num_vars, "nonlinear constraint");
  }
  const std::size_t m_total = program.linear.size() + program.nonlinear.size();
  if (m_total == 0) {
    throw Error(ErrorKind::Model, "barrier solve requires at least one constraint");
  }

  Solution solution;
  std::vector<double> x;
  if (start != nullptr) {
    x = *start;
    if (x.size() != program.num_vars || !evaluate(program, x).interior) {
      throw Error(ErrorKind::Numerical, "supplied start is not strictly feasible");
    }
  } else {
    auto interior = phase1(program, options);
    if (!interior.has_value()) {
      // Name the most violated row at the origin for the report.
      std::vector<double> origin(program.num_vars, 0.0);
      double worst = -kInf;
      for (const LinearConstraint& row : program.linear) {
        const double v = row.value(origin) - row.rhs;
        if (v > worst) {
          worst = v;
          solution.infeasible_label = row.label;
        }
      }
      return solution;  // feasible == false
    }
    x = std::move(*interior);
    if (!program.nonlinear.empty() && !evaluate(program, x).interior) {
      throw Error(ErrorKind::Numerical,
                  "phase1 point violates a nonlinear constraint; pass a start");
    }
  }

  double t = options.t0;
  while (true) {
    center(program, t, x, options);
    if (static_cast<double>(m_total) / t <= options.gap_tolerance) break;
    t *= options.mu;
  }

  const Evaluation e = evaluate(program, x);
  solution.feasible = true;
  solution.x = x;
  solution.objective = program.objective.value(x);
  solution.gap_estimate = static_cast<double>(m_total) / t;
  solution.barrier_parameter = t;
  solution.linear_duals.resize(program.linear.size());
  for (std::size_t i = 0; i < program.linear.size(); ++i) {
    solution.linear_duals[i] = 1.0 / (t * e.linear_slack[i]);
  }
  solution.nonlinear_duals.resize(program.nonlinear.size());
  for (std::size_t i = 0; i < program.nonlinear.size(); ++i) {
    solution.nonlinear_duals[i] = 1.0 / (t * e.nonlinear_slack[i]);
  }

  // ||grad f0 + A' lambda + sum nu grad g||_inf: the KKT stationarity residual
  // of the barrier subproblem at the returned point.
  std::vector<double> residual(program.num_vars, 0.0);
  program.objective.accumulate_gradient(x, 1.0, residual);
  for (std::size_t i = 0; i < program.linear.size(); ++i) {
    for (const auto& [var, coeff] : program.linear[i].terms) {
      residual[var] += solution.linear_duals[i] * coeff;
    }
  }
  for (std::size_t i = 0; i < program.nonlinear.size(); ++i) {
    program.nonlinear[i].accumulate_gradient(x, solution.nonlinear_duals[i], residual);
  }
  double inf_norm = 0.0;
  for (double r : residual) inf_norm = std::max(inf_norm, std::abs(r));
  solution.stationarity_residual = inf_norm;
  return solution;
}

}  // namespace skilltrace::barrier
