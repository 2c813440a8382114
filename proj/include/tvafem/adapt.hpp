#pragma once

#include <Eigen/Core>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tvafem/model.hpp"
#include "tvafem/solver.hpp"

namespace tvafem {

enum class IndicatorKind { ResidualGrad, ResidualId, PrimalDual };

/// Indicator family requested by a driver; the residual variant follows the
/// setting of S.
enum class IndicatorChoice { Residual, PrimalDual };

IndicatorChoice parse_indicator_choice(const std::string& name);
std::string to_string(IndicatorChoice c);
std::string to_string(IndicatorKind k);

/// Per-cell eta_K (not squared).
struct IndicatorField {
  Eigen::VectorXd eta;
  IndicatorKind kind = IndicatorKind::ResidualGrad;

  [[nodiscard]] double sum() const { return eta.sum(); }
  [[nodiscard]] double sum_squared() const { return eta.squaredNorm(); }
};

/// Squared cell and facet contributions of the residual indicator.
struct ResidualTerms {
  Eigen::VectorXd cell;
  Eigen::VectorXd facet;
};

ResidualTerms residual_terms(const Problem& problem, const Eigen::VectorXd& u, const DualPair& p);
IndicatorField residual_indicator(const Problem& problem, const Eigen::VectorXd& u, const DualPair& p);

/// Transfers an operator to a refined mesh. A new vertex of a masked identity
/// is kept only when both endpoints of its parent edge are kept.
OperatorT prolongate(const OperatorT& t, const MeshPtr& fine);
/// Transfers a data-space vector (vertex or corner layout) to a refined mesh.
Eigen::VectorXd prolongate_data(const Eigen::VectorXd& d, DataSpace space, const MeshPtr& coarse,
                                const MeshPtr& fine);
DualPair prolongate(const DualPair& p, DataSpace space, const MeshPtr& coarse, const MeshPtr& fine);

/// The problem and the pair transferred to one uniform refinement sweep.
struct RefinedPair {
  MeshPtr mesh;
  Problem problem;
  Eigen::VectorXd u;
  DualPair p;
};

RefinedPair refine_pair_uniform(const Problem& problem, const Eigen::VectorXd& u, const DualPair& p);

/// Local duality gap on one uniform sweep, summed onto the coarse cells.
/// The sum of eta^2 equals the gap of the refined pair.
IndicatorField primal_dual_indicator(const Problem& problem, const Eigen::VectorXd& u, const DualPair& p);

IndicatorField compute_indicator(IndicatorChoice choice, const Problem& problem, const Eigen::VectorXd& u,
                                 const DualPair& p);

/// Minimal set of largest indicators whose sum reaches theta times the total,
/// in descending order of eta; ties go to the smaller cell index.
std::vector<int> dorfler_mark(const IndicatorField& eta, double theta);

/// Data of the discrete problem on a given mesh.
struct Discretization {
  OperatorT t;
  Eigen::VectorXd g;
};

using Discretizer = std::function<Discretization(const MeshPtr& mesh)>;
using ForcedMarker = std::function<std::vector<int>(const Mesh& mesh)>;

struct AfemTraceRow {
  int iteration = 0;
  int cells = 0;
  double eta_sum = 0.0;
  double energy = 0.0;
  int solver_iterations = 0;
  double seconds = 0.0;
  bool converged = false;
};

struct AfemOptions {
  IndicatorChoice indicator = IndicatorChoice::Residual;
  double theta = 0.5;
  int n_refine = 0;
  SolveOptions solve;
  bool warm_start = true;
  ForcedMarker forced;
  /// Called after each solve with the mesh, the problem and the iterate.
  std::function<void(int, const Problem&, const SolveResult&)> on_iterate;
};

struct AfemResult {
  MeshPtr mesh;
  Eigen::VectorXd u;
  DualPair p;
  std::vector<AfemTraceRow> trace;
  std::vector<SolveReport> reports;
  bool all_converged = true;
};

/// Solve, estimate, mark, refine, repeated n_refine times plus a final solve.
AfemResult afem_loop(MeshPtr initial, const ModelParams& params, const Discretizer& discretize,
                     const AfemOptions& options);

/// Columns: iteration, cells, eta_sum, energy, solver_iterations, seconds.
void write_afem_trace_csv(std::ostream& out, const std::vector<AfemTraceRow>& trace);

}  // namespace tvafem
