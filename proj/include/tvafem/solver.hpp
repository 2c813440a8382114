#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "tvafem/model.hpp"

namespace tvafem {

struct SolveOptions {
  /// Target for each of the three optimality residuals.
  double tol = 1e-4;
  int max_iter = 300;
  double min_step = 1e-8;
  /// Huber parameters below this value are raised to it inside Newton steps.
  double gamma_floor = 1e-10;
};

struct SolveTraceRow {
  int iteration = 0;
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double merit = 0.0;
  double energy = 0.0;
  double gap = 0.0;
  double step = 0.0;
  /// "init", "newton" (merit line search) or "descent" (energy line search).
  std::string kind;
};

struct SolveReport {
  int iterations = 0;
  Residuals residuals;
  double energy = 0.0;
  double gap = 0.0;
  double seconds = 0.0;
  bool converged = false;
  bool iteration_cap = false;
  std::string message;
  std::vector<SolveTraceRow> trace;
};

struct SolveResult {
  Eigen::VectorXd u;
  DualPair p;
  SolveReport report;
};

/// Primal-dual semismooth Newton method for the discrete optimality system.
/// `p0` is projected onto the feasible set before the first step.
SolveResult solve(const Problem& problem, const Eigen::VectorXd& u0, const DualPair& p0,
                  const SolveOptions& options = {});
SolveResult solve(const Problem& problem, const SolveOptions& options = {});

/// Columns: iteration, r1, r2, r3, merit, energy, gap, step, kind.
void write_trace_csv(std::ostream& out, const SolveReport& report);

}  // namespace tvafem
