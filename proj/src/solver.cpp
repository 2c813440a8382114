#include "tvafem/solver.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace tvafem {
namespace {

using SpMat = Eigen::SparseMatrix<double>;

struct State {
  Eigen::VectorXd r;   // T u - g
  Eigen::VectorXd q;   // G u
  Residuals res;
  double merit = 0.0;
};

/// Weighted squared residual of all three equations.
double merit_of(const Problem& pb, const Eigen::VectorXd& u, const DualPair& p, const Eigen::VectorXd& r,
                const Eigen::VectorXd& q) {
  const auto& prm = pb.params();
  const Eigen::VectorXd f1 = pb.adjoint(p) - pb.load() + pb.b().matrix() * u;
  double m = f1.cwiseAbs2().cwiseQuotient(pb.dof_weights()).sum();
  const Eigen::VectorXd& ld = pb.data_weights();
  for (int n = 0; n < r.size(); ++n) {
    const double f2 = p.p1[n] * std::max(prm.gamma1, std::abs(r[n])) - prm.alpha1 * r[n];
    m += ld[n] * f2 * f2;
  }
  const int b = 2 * pb.components();
  const Mesh& mesh = *pb.mesh();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto qc = q.segment(c * b, b);
    m += mesh.area(c) * (p.p2.values.segment(c * b, b) * std::max(prm.gamma2, qc.norm()) - prm.lambda * qc).squaredNorm();
  }
  return m;
}

State evaluate(const Problem& pb, const Eigen::VectorXd& u, const DualPair& p) {
  State s;
  s.r = pb.data_residual(u);
  s.q = pb.cell_gradients(u);
  s.res = pb.residuals(u, p);
  s.merit = merit_of(pb, u, p, s.r, s.q);
  return s;
}

bool converged(const Residuals& res, double tol) {
  return res.r1 <= tol && res.r2 <= tol && res.r3 <= tol && res.p1_feasible && res.p2_feasible;
}

struct NewtonDirection {
  Eigen::VectorXd du;
  DualPair dp;
  bool ok = false;
};

bool factor_spd(Eigen::SimplicialLDLT<SpMat>& ldlt, const SpMat& h) {
  double max_diag = 0.0;
  for (int k = 0; k < h.rows(); ++k) max_diag = std::max(max_diag, std::abs(h.coeff(k, k)));
  if (max_diag == 0.0) max_diag = 1.0;
  ldlt.compute(h);
  if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 1e-14 * max_diag) return true;
  // Singular generalized Hessian (e.g. flat data in a pure seminorm setting):
  // retry with a growing diagonal shift.
  SpMat id(h.rows(), h.cols());
  id.setIdentity();
  for (double shift = 1e-12; shift <= 1e-2; shift *= 100.0) {
    ldlt.compute(h + shift * max_diag * id);
    if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) return true;
  }
  return false;
}

NewtonDirection newton_direction(const Problem& pb, const Eigen::VectorXd& u, const DualPair& p,
                                 const State& st, double gamma_floor) {
  const auto& prm = pb.params();
  const Mesh& mesh = *pb.mesh();
  const int nd = pb.data_size();
  const int b = 2 * pb.components();
  const double g1 = std::max(prm.gamma1, gamma_floor);
  const double g2 = std::max(prm.gamma2, gamma_floor);

  Eigen::VectorXd m1(nd), d1(nd), c1(nd);
  for (int n = 0; n < nd; ++n) {
    const double a = std::abs(st.r[n]);
    m1[n] = std::max(g1, a);
    const double s = st.r[n] > 0 ? 1.0 : (st.r[n] < 0 ? -1.0 : 0.0);
    c1[n] = a > g1 ? p.p1[n] * s : 0.0;
    d1[n] = std::max(0.0, prm.alpha1 - c1[n]) / m1[n];
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_cells()) * b * b);
  Eigen::VectorXd m2(mesh.num_cells());
  std::vector<char> active(mesh.num_cells(), 0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto qc = st.q.segment(c * b, b);
    const double nq = qc.norm();
    m2[c] = std::max(g2, nq);
    active[c] = nq > g2;
    Eigen::MatrixXd blk = prm.lambda * Eigen::MatrixXd::Identity(b, b);
    if (active[c]) {
      const Eigen::VectorXd nvec = qc / nq;
      const Eigen::VectorXd pc = p.p2.values.segment(c * b, b);
      blk -= 0.5 * (pc * nvec.transpose() + nvec * pc.transpose());
    }
    blk *= mesh.area(c) / m2[c];
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < b; ++j) trip.emplace_back(c * b + i, c * b + j, blk(i, j));
  }
  SpMat d2(mesh.num_cells() * b, mesh.num_cells() * b);
  d2.setFromTriplets(trip.begin(), trip.end());

  const SpMat& tm = pb.op().matrix();
  const SpMat& gm = pb.gradient_matrix();
  SpMat h = pb.b().matrix();
  if (prm.alpha1 > 0.0) h += SpMat(tm.transpose() * pb.data_weights().cwiseProduct(d1).asDiagonal() * tm);
  if (prm.lambda > 0.0) h += SpMat(gm.transpose() * d2 * gm);

  NewtonDirection dir;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  if (!factor_spd(ldlt, h)) return dir;
  const Eigen::VectorXd rhs = -pb.energy_gradient(u, gamma_floor);
  dir.du = ldlt.solve(rhs);
  if (!dir.du.allFinite()) return dir;

  const Eigen::VectorXd dt = tm * dir.du;
  const Eigen::VectorXd dq = gm * dir.du;
  dir.dp = pb.zero_dual();
  for (int n = 0; n < nd; ++n) {
    const double f2 = p.p1[n] * m1[n] - prm.alpha1 * st.r[n];
    dir.dp.p1[n] = ((prm.alpha1 - c1[n]) * dt[n] - f2) / m1[n];
  }
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto qc = st.q.segment(c * b, b);
    const auto pc = p.p2.values.segment(c * b, b);
    const auto dqc = dq.segment(c * b, b);
    Eigen::VectorXd step = prm.lambda * dqc - (pc * m2[c] - prm.lambda * qc);
    if (active[c]) step -= pc * (qc.dot(dqc) / qc.norm());
    dir.dp.p2.values.segment(c * b, b) = step / m2[c];
  }
  dir.ok = true;
  return dir;
}

SolveTraceRow make_row(const Problem& pb, int it, const Eigen::VectorXd& u, const DualPair& p,
                       const State& st, double step, const char* kind) {
  SolveTraceRow row;
  row.iteration = it;
  row.r1 = st.res.r1;
  row.r2 = st.res.r2;
  row.r3 = st.res.r3;
  row.merit = st.merit;
  row.energy = pb.energy_primal(u);
  row.gap = pb.gap(u, p);
  row.step = step;
  row.kind = kind;
  return row;
}

}  // namespace

SolveResult solve(const Problem& pb, const SolveOptions& options) {
  return solve(pb, Eigen::VectorXd::Zero(pb.num_dofs()), pb.zero_dual(), options);
}

SolveResult solve(const Problem& pb, const Eigen::VectorXd& u0, const DualPair& p0,
                  const SolveOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("solve: tolerance must be positive");
  if (u0.size() != pb.num_dofs() || p0.p1.size() != pb.data_size() ||
      p0.p2.values.size() != pb.gradient_matrix().rows()) {
    throw std::invalid_argument("solve: initial guess has inconsistent dimensions");
  }
  const auto start = std::chrono::steady_clock::now();
  SolveResult out;
  Eigen::VectorXd u = u0;
  DualPair p = p0;
  pb.project(p);
  SolveReport& rep = out.report;

  State st = evaluate(pb, u, p);
  rep.trace.push_back(make_row(pb, 0, u, p, st, 0.0, "init"));
  int it = 0;
  // After this many fallbacks the primal-dual steps are abandoned: they are
  // not energy monotone and can revisit the same stalled iterates.
  constexpr int kMaxFallbacks = 2;
  int fallbacks = 0;
  while (true) {
    if (converged(st.res, options.tol)) {
      rep.converged = true;
      break;
    }
    // The closed-form dual of the current primal iterate satisfies the two
    // pointwise equations exactly; accept it when the first equation holds too.
    DualPair pu = pb.dual_from_primal(u);
    const Residuals alt = pb.residuals(u, pu);
    if (converged(alt, options.tol)) {
      p = std::move(pu);
      st = evaluate(pb, u, p);
      rep.converged = true;
      break;
    }
    if (it >= options.max_iter) {
      rep.iteration_cap = true;
      rep.message = "iteration cap reached";
      break;
    }
    ++it;

    NewtonDirection dir;
    bool accepted = false;
    if (fallbacks < kMaxFallbacks) {
      dir = newton_direction(pb, u, p, st, options.gamma_floor);
      if (!dir.ok) {
        rep.message = "linear subsolve breakdown";
        break;
      }
    }
    for (double t = 1.0; dir.ok && t >= options.min_step; t *= 0.5) {
      Eigen::VectorXd ut = u + t * dir.du;
      DualPair pt{p.p1 + t * dir.dp.p1, p.p2};
      pt.p2.values += t * dir.dp.p2.values;
      pb.project(pt);
      const State s = evaluate(pb, ut, pt);
      if (s.merit <= (1.0 - 1e-4 * t) * st.merit) {
        u = std::move(ut);
        p = std::move(pt);
        st = s;
        rep.trace.push_back(make_row(pb, it, u, p, st, t, "newton"));
        accepted = true;
        break;
      }
    }
    if (accepted) continue;

    // Energy descent from the closed-form dual; the Newton matrix is positive
    // definite, so -H^{-1} grad E is a descent direction.
    ++fallbacks;
    p = pb.dual_from_primal(u);
    st = evaluate(pb, u, p);
    dir = newton_direction(pb, u, p, st, options.gamma_floor);
    if (!dir.ok) {
      rep.message = "linear subsolve breakdown";
      break;
    }
    const double e0 = pb.energy_primal(u);
    const double slope = pb.energy_gradient(u).dot(dir.du);
    for (double t = 1.0; t >= options.min_step; t *= 0.5) {
      const Eigen::VectorXd ut = u + t * dir.du;
      const double et = pb.energy_primal(ut);
      if (et <= e0 + 1e-4 * t * std::min(slope, 0.0) && et <= e0) {
        u = ut;
        p = pb.dual_from_primal(u);
        st = evaluate(pb, u, p);
        rep.trace.push_back(make_row(pb, it, u, p, st, t, "descent"));
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      rep.message = "line search stalled";
      break;
    }
  }

  if (!rep.converged && pb.energy_primal(u) > pb.energy_primal(u0)) {
    u = u0;
    p = p0;
    pb.project(p);
    st = evaluate(pb, u, p);
  }
  rep.iterations = it;
  rep.residuals = st.res;
  rep.energy = pb.energy_primal(u);
  rep.gap = pb.gap(u, p);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (rep.converged) rep.message = "converged";
  out.u = std::move(u);
  out.p = std::move(p);
  return out;
}

void write_trace_csv(std::ostream& out, const SolveReport& report) {
  out << "iteration,r1,r2,r3,merit,energy,gap,step,kind\n";
  out.precision(12);
  for (const auto& r : report.trace) {
    out << r.iteration << ',' << r.r1 << ',' << r.r2 << ',' << r.r3 << ',' << r.merit << ',' << r.energy << ','
        << r.gap << ',' << r.step << ',' << r.kind << '\n';
  }
}

}  // namespace tvafem
