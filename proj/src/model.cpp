#include "tvafem/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <stdexcept>

namespace tvafem {
namespace {

constexpr double kFeasibilityTol = 1e-10;

using Triplets = std::vector<Eigen::Triplet<double>>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " is not a number: " + value);
  }
  if (pos != value.size()) throw std::invalid_argument("config: " + key + " is not a number: " + value);
  return v;
}

double feasibility_bound(double bound) { return bound + kFeasibilityTol * std::max(1.0, bound); }

}  // namespace

SettingS parse_setting_s(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "id" || s == "identity" || s == "i") return SettingS::Identity;
  if (s == "grad" || s == "gradient" || s == "nabla") return SettingS::Gradient;
  throw std::invalid_argument("unknown setting_S: " + name);
}

std::string to_string(SettingS s) { return s == SettingS::Identity ? "id" : "grad"; }

void ModelParams::validate() const {
  for (double v : {alpha1, alpha2, beta, lambda, gamma1, gamma2}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("model parameters must be finite and nonnegative");
    }
  }
}

std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  return read_key_values(in);
}

ModelParams params_from_config(const std::map<std::string, std::string>& kv, ModelParams base) {
  for (const auto& [key, value] : kv) {
    if (key == "alpha1") base.alpha1 = parse_number(key, value);
    else if (key == "alpha2") base.alpha2 = parse_number(key, value);
    else if (key == "beta") base.beta = parse_number(key, value);
    else if (key == "lambda") base.lambda = parse_number(key, value);
    else if (key == "gamma1") base.gamma1 = parse_number(key, value);
    else if (key == "gamma2") base.gamma2 = parse_number(key, value);
    else if (key == "setting_S") base.setting_s = parse_setting_s(value);
  }
  base.validate();
  return base;
}

double huber(double x, double gamma) {
  const double a = std::abs(x);
  if (a <= gamma) return gamma > 0.0 ? x * x / (2.0 * gamma) : 0.0;
  return a - 0.5 * gamma;
}

double huber_prime(double x, double gamma) {
  const double a = std::abs(x);
  if (a <= gamma) return gamma > 0.0 ? x / gamma : 0.0;
  return x > 0 ? 1.0 : -1.0;
}

// ---------------------------------------------------------------------------
// OperatorT

OperatorT OperatorT::identity(MeshPtr mesh) {
  if (!mesh) throw std::invalid_argument("OperatorT: null mesh");
  OperatorT t;
  t.kind_ = Kind::Identity;
  t.mesh_ = std::move(mesh);
  const int nv = t.mesh_->num_vertices();
  t.matrix_.resize(nv, nv);
  t.matrix_.setIdentity();
  t.keep_.assign(nv, true);
  return t;
}

OperatorT OperatorT::masked_identity(MeshPtr mesh, std::vector<bool> keep) {
  if (!mesh) throw std::invalid_argument("OperatorT: null mesh");
  const int nv = mesh->num_vertices();
  if (static_cast<int>(keep.size()) != nv) throw std::invalid_argument("OperatorT: mask size mismatch");
  OperatorT t;
  t.kind_ = Kind::MaskedIdentity;
  t.mesh_ = std::move(mesh);
  Triplets trip;
  for (int v = 0; v < nv; ++v) {
    if (keep[v]) trip.emplace_back(v, v, 1.0);
  }
  t.matrix_.resize(nv, nv);
  t.matrix_.setFromTriplets(trip.begin(), trip.end());
  t.keep_ = std::move(keep);
  return t;
}

OperatorT OperatorT::masked_identity(MeshPtr mesh, const std::vector<bool>& keep_pixel, int n1, int n2) {
  if (!mesh) throw std::invalid_argument("OperatorT: null mesh");
  if (static_cast<long>(keep_pixel.size()) != static_cast<long>(n1) * n2) {
    throw std::invalid_argument("OperatorT: pixel mask size mismatch");
  }
  std::vector<bool> keep(mesh->num_vertices());
  for (int v = 0; v < mesh->num_vertices(); ++v) {
    const Point p = mesh->vertex(v);
    const int i = std::clamp(static_cast<int>(std::lround(p.x)) - 1, 0, n1 - 1);
    const int j = std::clamp(static_cast<int>(std::lround(p.y)) - 1, 0, n2 - 1);
    keep[v] = keep_pixel[static_cast<std::size_t>(j) * n1 + i];
  }
  return masked_identity(std::move(mesh), std::move(keep));
}

OperatorT OperatorT::pointwise_vector(DgScalar w1, DgScalar w2) {
  if (!w1.mesh || w1.mesh != w2.mesh) throw std::invalid_argument("OperatorT: weights on different meshes");
  OperatorT t;
  t.kind_ = Kind::PointwiseVector;
  t.mesh_ = w1.mesh;
  t.m_ = 2;
  t.space_ = DataSpace::Corner;
  const Mesh& mesh = *t.mesh_;
  Triplets trip;
  trip.reserve(6 * static_cast<std::size_t>(mesh.num_cells()));
  for (int c = 0; c < mesh.num_cells(); ++c) {
    for (int i = 0; i < 3; ++i) {
      const int row = 3 * c + i;
      const int v = mesh.cell(c).v[i];
      trip.emplace_back(row, 2 * v, w1.values[row]);
      trip.emplace_back(row, 2 * v + 1, w2.values[row]);
    }
  }
  t.matrix_.resize(3 * mesh.num_cells(), 2 * mesh.num_vertices());
  t.matrix_.setFromTriplets(trip.begin(), trip.end());
  t.w_ = {std::move(w1), std::move(w2)};
  return t;
}

Eigen::VectorXd OperatorT::restrict_data(const Eigen::VectorXd& g) const {
  if (g.size() != data_size()) throw std::invalid_argument("OperatorT: data size mismatch");
  if (kind_ != Kind::MaskedIdentity) return g;
  Eigen::VectorXd out = g;
  for (int v = 0; v < out.size(); ++v) {
    if (!keep_[v]) out[v] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

Eigen::SparseMatrix<double> p1_mass_matrix(const Mesh& mesh) {
  Triplets trip;
  trip.reserve(9 * static_cast<std::size_t>(mesh.num_cells()));
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double a = mesh.area(c) / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(mesh.cell(c).v[i], mesh.cell(c).v[j], i == j ? 2 * a : a);
  }
  Eigen::SparseMatrix<double> m(mesh.num_vertices(), mesh.num_vertices());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::SparseMatrix<double> dg_mass_matrix(const Mesh& mesh) {
  Triplets trip;
  trip.reserve(9 * static_cast<std::size_t>(mesh.num_cells()));
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double a = mesh.area(c) / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(3 * c + i, 3 * c + j, i == j ? 2 * a : a);
  }
  Eigen::SparseMatrix<double> m(3 * mesh.num_cells(), 3 * mesh.num_cells());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::SparseMatrix<double> gradient_matrix(const Mesh& mesh, int m) {
  Triplets trip;
  trip.reserve(6 * static_cast<std::size_t>(mesh.num_cells()) * m);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto grads = mesh.basis_gradients(c);
    for (int k = 0; k < m; ++k) {
      const int row = c * 2 * m + 2 * k;
      for (int i = 0; i < 3; ++i) {
        const int col = mesh.cell(c).v[i] * m + k;
        trip.emplace_back(row, col, grads[i].x);
        trip.emplace_back(row + 1, col, grads[i].y);
      }
    }
  }
  Eigen::SparseMatrix<double> g(2 * m * mesh.num_cells(), m * mesh.num_vertices());
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

namespace {

Eigen::SparseMatrix<double> kron_identity(const Eigen::SparseMatrix<double>& a, int m) {
  if (m == 1) return a;
  Triplets trip;
  trip.reserve(a.nonZeros() * m);
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
      for (int j = 0; j < m; ++j) {
        trip.emplace_back(static_cast<int>(it.row()) * m + j, static_cast<int>(it.col()) * m + j, it.value());
      }
    }
  }
  Eigen::SparseMatrix<double> out(a.rows() * m, a.cols() * m);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

Eigen::VectorXd gradient_weights(const Mesh& mesh, int m) {
  Eigen::VectorXd w(2 * m * mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) w.segment(2 * m * c, 2 * m).setConstant(mesh.area(c));
  return w;
}

Eigen::SparseMatrix<double> data_mass(const OperatorT& t) {
  return t.space() == DataSpace::Vertex ? p1_mass_matrix(*t.mesh()) : dg_mass_matrix(*t.mesh());
}

Eigen::SparseMatrix<double> s_matrix(const ModelParams& params, const OperatorT& t) {
  const Mesh& mesh = *t.mesh();
  const int m = t.components();
  if (params.setting_s == SettingS::Identity) return kron_identity(p1_mass_matrix(mesh), m);
  const Eigen::SparseMatrix<double> g = gradient_matrix(mesh, m);
  return Eigen::SparseMatrix<double>(g.transpose() * gradient_weights(mesh, m).asDiagonal() * g);
}

Eigen::SparseMatrix<double> b_matrix(const ModelParams& params, const OperatorT& t,
                                     const Eigen::SparseMatrix<double>& md,
                                     const Eigen::SparseMatrix<double>& s) {
  const Eigen::SparseMatrix<double>& tm = t.matrix();
  Eigen::SparseMatrix<double> b = params.alpha2 * Eigen::SparseMatrix<double>(tm.transpose() * md * tm);
  b += params.beta * s;
  return b;
}

}  // namespace

GridOperatorB::GridOperatorB(Eigen::SparseMatrix<double> b) : b_(std::move(b)) {
  b_.makeCompressed();
  for (int k = 0; k < b_.rows(); ++k) audit_.max_diagonal = std::max(audit_.max_diagonal, std::abs(b_.coeff(k, k)));
  ldlt_.compute(b_);
  if (ldlt_.info() != Eigen::Success || b_.rows() == 0) return;
  if (ldlt_.vectorD().minCoeff() <= 0.0) return;
  factored_ = true;
  // Inverse iteration from a fixed start vector; the Rayleigh quotient bounds
  // the smallest eigenvalue from above.
  Eigen::VectorXd x(b_.rows());
  for (int k = 0; k < x.size(); ++k) x[k] = 1.0 + 0.5 * std::sin(1.0 + 3.0 * k);
  x.normalize();
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd y = ldlt_.solve(x);
    const double n = y.norm();
    if (!std::isfinite(n) || n == 0.0) {
      factored_ = false;
      return;
    }
    x = y / n;
  }
  audit_.min_eigenvalue = x.dot(b_ * x);
  audit_.coercive = audit_.min_eigenvalue > 1e-12 * audit_.max_diagonal;
  factored_ = audit_.coercive;
}

bool GridOperatorB::solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& x) const {
  if (!factored_) return false;
  x = ldlt_.solve(rhs);
  return x.allFinite();
}

GridOperatorB assemble_B(const ModelParams& params, const OperatorT& t) {
  params.validate();
  return GridOperatorB(b_matrix(params, t, data_mass(t), s_matrix(params, t)));
}

double Residuals::max() const { return std::max({r1, r2, r3}); }

// ---------------------------------------------------------------------------
// Problem

Problem::Problem(ModelParams params, OperatorT t, Eigen::VectorXd g)
    : params_(params), t_(std::move(t)) {
  params_.validate();
  g_ = t_.restrict_data(g);
  const Mesh& mesh = *t_.mesh();
  const int m = t_.components();
  grad_ = tvafem::gradient_matrix(mesh, m);
  grad_w_ = tvafem::gradient_weights(mesh, m);
  mass_d_ = tvafem::data_mass(t_);
  lump_d_ = Eigen::VectorXd::Zero(t_.data_size());
  lump_u_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_vertices()) * m);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double w = mesh.area(c) / 3.0;
    for (int i = 0; i < 3; ++i) {
      const int v = mesh.cell(c).v[i];
      lump_d_[t_.space() == DataSpace::Vertex ? v : 3 * c + i] += w;
      for (int k = 0; k < m; ++k) lump_u_[v * m + k] += w;
    }
  }
  s_ = tvafem::s_matrix(params_, t_);
  b_ = std::make_shared<GridOperatorB>(b_matrix(params_, t_, mass_d_, s_));
  load_ = params_.alpha2 * (t_.matrix().transpose() * (mass_d_ * g_));
}

DualPair Problem::zero_dual() const {
  return {Eigen::VectorXd::Zero(data_size()), FeCellMatrix(mesh(), components())};
}

Eigen::VectorXd Problem::data_residual(const Eigen::VectorXd& u) const { return t_.matrix() * u - g_; }

double Problem::energy_primal(const Eigen::VectorXd& u) const {
  if (u.size() != num_dofs()) throw std::invalid_argument("energy_primal: size mismatch");
  const Eigen::VectorXd r = data_residual(u);
  double e = 0.0;
  if (params_.alpha1 > 0.0) {
    double s = 0.0;
    for (int n = 0; n < r.size(); ++n) s += lump_d_[n] * huber(r[n], params_.gamma1);
    e += params_.alpha1 * s;
  }
  if (params_.alpha2 > 0.0) e += 0.5 * params_.alpha2 * r.dot(mass_d_ * r);
  if (params_.beta > 0.0) e += 0.5 * params_.beta * u.dot(s_ * u);
  if (params_.lambda > 0.0) {
    const Eigen::VectorXd q = grad_ * u;
    const int b = 2 * components();
    double s = 0.0;
    for (int c = 0; c < mesh()->num_cells(); ++c) s += mesh()->area(c) * huber(q.segment(c * b, b).norm(), params_.gamma2);
    e += params_.lambda * s;
  }
  return e;
}

Eigen::VectorXd Problem::energy_gradient(const Eigen::VectorXd& u, double gamma_floor) const {
  const DualPair p = [&] {
    if (gamma_floor <= 0.0) return dual_from_primal(u);
    ModelParams floored = params_;
    floored.gamma1 = std::max(floored.gamma1, gamma_floor);
    floored.gamma2 = std::max(floored.gamma2, gamma_floor);
    const Eigen::VectorXd r = data_residual(u);
    const Eigen::VectorXd q = grad_ * u;
    DualPair out = zero_dual();
    for (int n = 0; n < r.size(); ++n) out.p1[n] = floored.alpha1 * huber_prime(r[n], floored.gamma1);
    const int b = 2 * components();
    for (int c = 0; c < mesh()->num_cells(); ++c) {
      const double nq = q.segment(c * b, b).norm();
      out.p2.values.segment(c * b, b) = floored.lambda / std::max(floored.gamma2, nq) * q.segment(c * b, b);
    }
    return out;
  }();
  return adjoint(p) - load_ + b_->matrix() * u;
}

Eigen::VectorXd Problem::adjoint(const DualPair& p) const {
  Eigen::VectorXd out = t_.matrix().transpose() * lump_d_.cwiseProduct(p.p1);
  out += grad_.transpose() * grad_w_.cwiseProduct(p.p2.values);
  return out;
}

DualPair Problem::dual_from_primal(const Eigen::VectorXd& u) const {
  const Eigen::VectorXd r = data_residual(u);
  const Eigen::VectorXd q = grad_ * u;
  DualPair p = zero_dual();
  for (int n = 0; n < r.size(); ++n) p.p1[n] = params_.alpha1 * huber_prime(r[n], params_.gamma1);
  const int b = 2 * components();
  for (int c = 0; c < mesh()->num_cells(); ++c) {
    const double nq = q.segment(c * b, b).norm();
    const double denom = std::max(params_.gamma2, nq);
    if (denom > 0.0) p.p2.values.segment(c * b, b) = params_.lambda / denom * q.segment(c * b, b);
  }
  return p;
}

void Problem::project(DualPair& p) const {
  for (int n = 0; n < p.p1.size(); ++n) p.p1[n] = std::clamp(p.p1[n], -params_.alpha1, params_.alpha1);
  const int b = 2 * components();
  for (int c = 0; c < mesh()->num_cells(); ++c) {
    auto seg = p.p2.values.segment(c * b, b);
    const double n = seg.norm();
    if (n > params_.lambda) seg *= params_.lambda / n;
  }
}

Residuals Problem::residuals(const Eigen::VectorXd& u, const DualPair& p) const {
  Residuals res;
  const Eigen::VectorXd f1 = adjoint(p) - load_ + b_->matrix() * u;
  res.r1 = std::sqrt(f1.cwiseAbs2().cwiseQuotient(lump_u_).sum());
  const Eigen::VectorXd r = data_residual(u);
  const double a1 = feasibility_bound(params_.alpha1);
  for (int n = 0; n < r.size(); ++n) {
    res.r2 = std::max(res.r2, std::abs(p.p1[n] * std::max(params_.gamma1, std::abs(r[n])) - params_.alpha1 * r[n]));
    if (std::abs(p.p1[n]) > a1) res.p1_feasible = false;
  }
  const Eigen::VectorXd q = grad_ * u;
  const int b = 2 * components();
  const double lb = feasibility_bound(params_.lambda);
  for (int c = 0; c < mesh()->num_cells(); ++c) {
    const auto qc = q.segment(c * b, b);
    const auto pc = p.p2.values.segment(c * b, b);
    res.r3 = std::max(res.r3, (pc * std::max(params_.gamma2, qc.norm()) - params_.lambda * qc).norm());
    if (pc.norm() > lb) res.p2_feasible = false;
  }
  return res;
}

DualEnergy Problem::energy_dual(const DualPair& p) const {
  const double a1 = feasibility_bound(params_.alpha1);
  const double lb = feasibility_bound(params_.lambda);
  if (p.p1.cwiseAbs().maxCoeff() > a1) return {std::numeric_limits<double>::infinity(), DualStatus::Infeasible};
  const int b = 2 * components();
  for (int c = 0; c < mesh()->num_cells(); ++c) {
    if (p.p2.values.segment(c * b, b).norm() > lb) {
      return {std::numeric_limits<double>::infinity(), DualStatus::Infeasible};
    }
  }
  const Eigen::VectorXd v = adjoint(p) - load_;
  Eigen::VectorXd x;
  if (!b_->solve(v, x)) return {std::numeric_limits<double>::quiet_NaN(), DualStatus::NumericFailure};
  double d = 0.5 * v.dot(x) - 0.5 * params_.alpha2 * g_.dot(mass_d_ * g_);
  d += lump_d_.cwiseProduct(g_).dot(p.p1);
  if (params_.alpha1 > 0.0) d += params_.gamma1 / (2.0 * params_.alpha1) * lump_d_.dot(p.p1.cwiseAbs2());
  if (params_.lambda > 0.0) d += params_.gamma2 / (2.0 * params_.lambda) * grad_w_.dot(p.p2.values.cwiseAbs2());
  return {d, DualStatus::Ok};
}

double Problem::gap(const Eigen::VectorXd& u, const DualPair& p) const {
  const DualEnergy d = energy_dual(p);
  if (d.status != DualStatus::Ok) return std::numeric_limits<double>::quiet_NaN();
  return energy_primal(u) + d.value;
}

GapDensity Problem::gap_density(const Eigen::VectorXd& u, const DualPair& p) const {
  const Mesh& mesh = *this->mesh();
  GapDensity out;
  out.cell = Eigen::VectorXd::Zero(mesh.num_cells());
  const DualEnergy d = energy_dual(p);
  if (d.status != DualStatus::Ok) {
    out.status = d.status;
    return out;
  }
  const Eigen::VectorXd v = adjoint(p) - load_;
  Eigen::VectorXd w;
  b_->solve(v, w);
  const Eigen::VectorXd e = u + w;  // u - (-B^{-1}(Lambda^* p - c))
  const Eigen::VectorXd ed = t_.matrix() * e;
  const Eigen::VectorXd r = data_residual(u);
  const Eigen::VectorXd q = grad_ * u;
  const Eigen::VectorXd qe = grad_ * e;
  const int m = components();
  const int bsz = 2 * m;
  const auto& prm = params_;

  // Fenchel-Young density per data node, per unit weight.
  Eigen::VectorXd node(r.size());
  for (int n = 0; n < r.size(); ++n) {
    double t = -p.p1[n] * r[n];
    if (prm.alpha1 > 0.0) t += prm.alpha1 * huber(r[n], prm.gamma1) + prm.gamma1 / (2 * prm.alpha1) * p.p1[n] * p.p1[n];
    node[n] = t;
  }
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Cell& cell = mesh.cell(c);
    const double area = mesh.area(c);
    double s = 0.0;
    std::array<double, 3> ek{};
    for (int i = 0; i < 3; ++i) {
      const int n = t_.space() == DataSpace::Vertex ? cell.v[i] : 3 * c + i;
      s += area / 3.0 * node[n];
      ek[i] = ed[n];
    }
    const double sum_e = ek[0] + ek[1] + ek[2];
    const double m_ee = area / 12.0 * (ek[0] * ek[0] + ek[1] * ek[1] + ek[2] * ek[2] + sum_e * sum_e);
    double b_local = prm.alpha2 * m_ee;
    if (prm.setting_s == SettingS::Identity) {
      for (int k = 0; k < m; ++k) {
        double a2 = 0.0, a1s = 0.0;
        for (int i = 0; i < 3; ++i) {
          const double val = e[cell.v[i] * m + k];
          a2 += val * val;
          a1s += val;
        }
        b_local += prm.beta * area / 12.0 * (a2 + a1s * a1s);
      }
    } else {
      b_local += prm.beta * area * qe.segment(c * bsz, bsz).squaredNorm();
    }
    s += 0.5 * b_local;
    const auto qc = q.segment(c * bsz, bsz);
    const auto pc = p.p2.values.segment(c * bsz, bsz);
    double tv = -pc.dot(qc);
    if (prm.lambda > 0.0) tv += prm.lambda * huber(qc.norm(), prm.gamma2) + prm.gamma2 / (2 * prm.lambda) * pc.squaredNorm();
    s += area * tv;
    out.cell[c] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free-function forms

double energy_primal(const FeVector& u, const Eigen::VectorXd& g, const ModelParams& params,
                     const OperatorT& t) {
  return Problem(params, t, g).energy_primal(u.values);
}

DualEnergy energy_dual(const DualPair& p, const Eigen::VectorXd& g, const ModelParams& params,
                       const OperatorT& t) {
  return Problem(params, t, g).energy_dual(p);
}

Residuals optimality_residual(const FeVector& u, const DualPair& p, const Eigen::VectorXd& g,
                              const ModelParams& params, const OperatorT& t) {
  return Problem(params, t, g).residuals(u.values, p);
}

}  // namespace tvafem
