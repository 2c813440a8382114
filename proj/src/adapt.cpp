#include "tvafem/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace tvafem {

IndicatorChoice parse_indicator_choice(const std::string& name) {
  if (name == "residual") return IndicatorChoice::Residual;
  if (name == "primal-dual" || name == "primal_dual" || name == "pd") return IndicatorChoice::PrimalDual;
  throw std::invalid_argument("unknown indicator: " + name);
}

std::string to_string(IndicatorChoice c) { return c == IndicatorChoice::Residual ? "residual" : "primal-dual"; }

std::string to_string(IndicatorKind k) {
  switch (k) {
    case IndicatorKind::ResidualGrad: return "residual_grad";
    case IndicatorKind::ResidualId: return "residual_id";
    case IndicatorKind::PrimalDual: return "primal_dual";
  }
  return "?";
}

namespace {

double p1_cell_norm_sq(double a0, double a1, double a2, double area) {
  const double s = a0 + a1 + a2;
  return area / 12.0 * (a0 * a0 + a1 * a1 + a2 * a2 + s * s);
}

}  // namespace

ResidualTerms residual_terms(const Problem& pb, const Eigen::VectorXd& u, const DualPair& p) {
  const Mesh& mesh = *pb.mesh();
  const auto& prm = pb.params();
  const OperatorT& t = pb.op();
  const int m = pb.components();
  const int b = 2 * m;
  const bool grad = prm.setting_s == SettingS::Gradient;

  // Strong residual alpha2 T^*(Tu - g) + T^* p1 (+ beta u for S = I), taken
  // pointwise at cell corners.
  const Eigen::VectorXd s = prm.alpha2 * pb.data_residual(u) + p.p1;
  Eigen::VectorXd xi_vertex;
  if (t.space() == DataSpace::Vertex) xi_vertex = t.matrix().transpose() * s;

  ResidualTerms out;
  out.cell = Eigen::VectorXd::Zero(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Cell& cell = mesh.cell(c);
    double sum = 0.0;
    for (int k = 0; k < m; ++k) {
      std::array<double, 3> a{};
      for (int i = 0; i < 3; ++i) {
        const int v = cell.v[i];
        a[i] = t.space() == DataSpace::Vertex ? xi_vertex[v * m + k] : t.weight(k).values[3 * c + i] * s[3 * c + i];
        if (!grad) a[i] += prm.beta * u[v * m + k];
      }
      sum += p1_cell_norm_sq(a[0], a[1], a[2], mesh.area(c));
    }
    const double h = mesh.diameter(c);
    out.cell[c] = grad ? h * h * sum : sum;
  }

  const Eigen::VectorXd q = pb.cell_gradients(u);
  auto flux = [&](int c) -> Eigen::VectorXd {
    Eigen::VectorXd z = p.p2.values.segment(c * b, b);
    if (grad) z += prm.beta * q.segment(c * b, b);
    return z;
  };
  out.facet = Eigen::VectorXd::Zero(mesh.num_facets());
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const Facet& facet = mesh.facets()[f];
    Eigen::VectorXd z = flux(facet.cells[0]);
    if (!facet.is_boundary()) z -= flux(facet.cells[1]);
    double jump_sq = 0.0;
    for (int k = 0; k < m; ++k) {
      const double j = facet.normal.x * z[2 * k] + facet.normal.y * z[2 * k + 1];
      jump_sq += j * j;
    }
    // h_F |F| |[n^T z]|^2 for S = grad, h_F^{-1} |F| |[n^T p2]|^2 for S = I.
    out.facet[f] = grad ? facet.length * facet.length * jump_sq : jump_sq;
  }
  return out;
}

IndicatorField residual_indicator(const Problem& pb, const Eigen::VectorXd& u, const DualPair& p) {
  const Mesh& mesh = *pb.mesh();
  const ResidualTerms terms = residual_terms(pb, u, p);
  IndicatorField field;
  field.kind = pb.params().setting_s == SettingS::Gradient ? IndicatorKind::ResidualGrad : IndicatorKind::ResidualId;
  field.eta.resize(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double e = terms.cell[c];
    for (int i = 0; i < 3; ++i) e += terms.facet[mesh.cell_facet(c, i)];
    field.eta[c] = std::sqrt(std::max(e, 0.0));
  }
  return field;
}

OperatorT prolongate(const OperatorT& t, const MeshPtr& fine) {
  if (fine->parent_id() != t.mesh()->id()) throw std::invalid_argument("prolongate: mesh mismatch");
  switch (t.kind()) {
    case OperatorT::Kind::Identity: return OperatorT::identity(fine);
    case OperatorT::Kind::MaskedIdentity: {
      std::vector<bool> keep(t.vertex_mask());
      keep.resize(fine->num_vertices());
      const int nold = fine->num_parent_vertices();
      const auto& parents = fine->new_vertex_parents();
      for (std::size_t k = 0; k < parents.size(); ++k) {
        keep[nold + k] = t.vertex_mask()[parents[k][0]] && t.vertex_mask()[parents[k][1]];
      }
      return OperatorT::masked_identity(fine, std::move(keep));
    }
    case OperatorT::Kind::PointwiseVector:
      return OperatorT::pointwise_vector(prolongate(t.weight(0), fine), prolongate(t.weight(1), fine));
  }
  throw std::invalid_argument("prolongate: unknown operator");
}

Eigen::VectorXd prolongate_data(const Eigen::VectorXd& d, DataSpace space, const MeshPtr& coarse,
                                const MeshPtr& fine) {
  if (space == DataSpace::Vertex) return prolongate(FeScalar(coarse, d), fine).values;
  DgScalar dg(coarse);
  dg.values = d;
  return prolongate(dg, fine).values;
}

DualPair prolongate(const DualPair& p, DataSpace space, const MeshPtr& coarse, const MeshPtr& fine) {
  return {prolongate_data(p.p1, space, coarse, fine), prolongate(p.p2, fine)};
}

RefinedPair refine_pair_uniform(const Problem& pb, const Eigen::VectorXd& u, const DualPair& p) {
  const MeshPtr& coarse = pb.mesh();
  auto fine = std::make_shared<const Mesh>(refine_uniform(*coarse));
  const DataSpace space = pb.op().space();
  Problem fine_pb(pb.params(), prolongate(pb.op(), fine), prolongate_data(pb.data(), space, coarse, fine));
  Eigen::VectorXd uf = prolongate(FeVector(coarse, pb.components(), u), fine).values;
  DualPair pf = prolongate(p, space, coarse, fine);
  return {fine, std::move(fine_pb), std::move(uf), std::move(pf)};
}

IndicatorField primal_dual_indicator(const Problem& pb, const Eigen::VectorXd& u, const DualPair& p) {
  const RefinedPair fine = refine_pair_uniform(pb, u, p);
  const GapDensity density = fine.problem.gap_density(fine.u, fine.p);
  if (density.status != DualStatus::Ok) {
    throw std::runtime_error(density.status == DualStatus::Infeasible
                                 ? "primal-dual indicator: dual iterate is infeasible"
                                 : "primal-dual indicator: B is not coercive");
  }
  IndicatorField field;
  field.kind = IndicatorKind::PrimalDual;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(pb.mesh()->num_cells());
  const auto& parents = fine.mesh->parent_cells();
  for (int c = 0; c < fine.mesh->num_cells(); ++c) sum[parents[c]] += density.cell[c];
  field.eta = sum.cwiseMax(0.0).cwiseSqrt();
  return field;
}

IndicatorField compute_indicator(IndicatorChoice choice, const Problem& pb, const Eigen::VectorXd& u,
                                 const DualPair& p) {
  return choice == IndicatorChoice::Residual ? residual_indicator(pb, u, p) : primal_dual_indicator(pb, u, p);
}

std::vector<int> dorfler_mark(const IndicatorField& field, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("dorfler_mark: theta must lie in [0, 1]");
  const Eigen::VectorXd& eta = field.eta;
  std::vector<int> order(eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eta[a] > eta[b]; });
  // Summed in the same order as the prefix so theta = 1 stops exactly at the
  // last positive entry.
  double total = 0.0;
  for (int c : order) total += eta[c];
  const double target = theta * total;
  std::vector<int> marked;
  double acc = 0.0;
  for (int c : order) {
    if (acc >= target) break;
    marked.push_back(c);
    acc += eta[c];
  }
  return marked;
}

AfemResult afem_loop(MeshPtr mesh, const ModelParams& params, const Discretizer& discretize,
                     const AfemOptions& options) {
  if (options.n_refine < 0) throw std::invalid_argument("afem_loop: n_refine must be nonnegative");
  AfemResult out;
  Eigen::VectorXd u_prev;
  DualPair p_prev;
  MeshPtr prev_mesh;
  DataSpace prev_space = DataSpace::Vertex;
  for (int it = 0; it <= options.n_refine; ++it) {
    const auto start = std::chrono::steady_clock::now();
    Discretization disc = discretize(mesh);
    Problem pb(params, std::move(disc.t), std::move(disc.g));
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(pb.num_dofs());
    DualPair p0 = pb.zero_dual();
    if (options.warm_start && prev_mesh) {
      u0 = prolongate(FeVector(prev_mesh, pb.components(), u_prev), mesh).values;
      if (prev_space == pb.op().space()) p0 = prolongate(p_prev, prev_space, prev_mesh, mesh);
    }
    SolveResult res = solve(pb, u0, p0, options.solve);
    out.all_converged = out.all_converged && res.report.converged;
    if (options.on_iterate) options.on_iterate(it, pb, res);

    const IndicatorField eta = compute_indicator(options.indicator, pb, res.u, res.p);
    AfemTraceRow row;
    row.iteration = it;
    row.cells = mesh->num_cells();
    row.eta_sum = eta.sum();
    row.energy = res.report.energy;
    row.solver_iterations = res.report.iterations;
    row.converged = res.report.converged;

    out.reports.push_back(res.report);
    u_prev = std::move(res.u);
    p_prev = std::move(res.p);
    prev_space = pb.op().space();
    if (it == options.n_refine) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      out.trace.push_back(row);
      break;
    }
    std::vector<int> marked = dorfler_mark(eta, options.theta);
    if (options.forced) {
      std::vector<int> extra = options.forced(*mesh);
      marked.insert(marked.end(), extra.begin(), extra.end());
    }
    std::sort(marked.begin(), marked.end());
    marked.erase(std::unique(marked.begin(), marked.end()), marked.end());
    prev_mesh = mesh;
    mesh = std::make_shared<const Mesh>(bisect(*mesh, marked));
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.trace.push_back(row);
  }
  out.mesh = mesh;
  out.u = std::move(u_prev);
  out.p = std::move(p_prev);
  return out;
}

void write_afem_trace_csv(std::ostream& out, const std::vector<AfemTraceRow>& trace) {
  out << "iteration,cells,eta_sum,energy,solver_iterations,seconds\n";
  out.precision(12);
  for (const auto& r : trace) {
    out << r.iteration << ',' << r.cells << ',' << r.eta_sum << ',' << r.energy << ',' << r.solver_iterations << ','
        << r.seconds << '\n';
  }
}

}  // namespace tvafem
