#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tvafem/fe_space.hpp"

namespace tvafem {

enum class SettingS { Identity, Gradient };

SettingS parse_setting_s(const std::string& name);
std::string to_string(SettingS s);

/// Weights of the L1-L2-TV energy and the Huber parameters.
struct ModelParams {
  double alpha1 = 0.0;
  double alpha2 = 50.0;
  double beta = 1e-5;
  double lambda = 1.0;
  double gamma1 = 1e-4;
  double gamma2 = 1e-4;
  SettingS setting_s = SettingS::Identity;

  /// Throws std::invalid_argument for negative or non-finite entries.
  void validate() const;
};

/// Parses `key = value` lines; '#' starts a comment. Keys are case-sensitive.
std::map<std::string, std::string> read_key_values(std::istream& in);
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

/// Applies the keys alpha1, alpha2, beta, lambda, gamma1, gamma2, setting_S
/// on top of `base`. Other keys are ignored.
ModelParams params_from_config(const std::map<std::string, std::string>& kv, ModelParams base = {});

/// Huber function: x^2 / (2 gamma) for |x| <= gamma, |x| - gamma / 2 beyond.
double huber(double x, double gamma);
/// x / max(gamma, |x|), with huber_prime(0, 0) = 0.
double huber_prime(double x, double gamma);

/// Where the data g, Tu and the dual component p1 live: at mesh vertices
/// (continuous P1) or at cell corners (discontinuous P1).
enum class DataSpace { Vertex, Corner };

/// Fidelity operator T mapping V_h into the data space.
class OperatorT {
 public:
  enum class Kind { Identity, MaskedIdentity, PointwiseVector };

  static OperatorT identity(MeshPtr mesh);
  /// `keep[v]` is false on vertices of the inpainting domain.
  static OperatorT masked_identity(MeshPtr mesh, std::vector<bool> keep);
  /// Vertex mask taken from the nearest pixel of a per-pixel mask.
  static OperatorT masked_identity(MeshPtr mesh, const std::vector<bool>& keep_pixel, int n1, int n2);
  /// T u = w1 u_1 + w2 u_2 evaluated at cell corners.
  static OperatorT pointwise_vector(DgScalar w1, DgScalar w2);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] const MeshPtr& mesh() const { return mesh_; }
  /// Components m of the primal variable.
  [[nodiscard]] int components() const { return m_; }
  [[nodiscard]] DataSpace space() const { return space_; }
  [[nodiscard]] int data_size() const { return static_cast<int>(matrix_.rows()); }
  [[nodiscard]] const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
  [[nodiscard]] const std::vector<bool>& vertex_mask() const { return keep_; }
  [[nodiscard]] const DgScalar& weight(int k) const { return w_[k]; }

  /// Data vector with masked entries zeroed (identity for other kinds).
  [[nodiscard]] Eigen::VectorXd restrict_data(const Eigen::VectorXd& g) const;

 private:
  OperatorT() = default;

  Kind kind_ = Kind::Identity;
  MeshPtr mesh_;
  int m_ = 1;
  DataSpace space_ = DataSpace::Vertex;
  Eigen::SparseMatrix<double> matrix_;
  std::vector<bool> keep_;
  std::array<DgScalar, 2> w_;
};

/// Dual variable: p1 in the data space of T, p2 cellwise constant 2 x m.
struct DualPair {
  Eigen::VectorXd p1;
  FeCellMatrix p2;
};

struct CoercivityAudit {
  bool coercive = false;
  double min_eigenvalue = 0.0;
  double max_diagonal = 0.0;
};

/// Sparse symmetric matrix of a_B with a factorization for B^{-1} products.
class GridOperatorB {
 public:
  explicit GridOperatorB(Eigen::SparseMatrix<double> b);

  [[nodiscard]] const Eigen::SparseMatrix<double>& matrix() const { return b_; }
  [[nodiscard]] const CoercivityAudit& audit() const { return audit_; }
  /// Solves B x = rhs. Returns false when B is not coercive or the solve fails.
  bool solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& x) const;
  [[nodiscard]] double norm_squared(const Eigen::VectorXd& v) const { return v.dot(b_ * v); }

 private:
  Eigen::SparseMatrix<double> b_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool factored_ = false;
  CoercivityAudit audit_;
};

enum class DualStatus { Ok, Infeasible, NumericFailure };

struct DualEnergy {
  double value = 0.0;
  DualStatus status = DualStatus::Ok;
};

struct Residuals {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  bool p1_feasible = true;
  bool p2_feasible = true;

  [[nodiscard]] double max() const;
};

/// Per-cell split of E(u) + D(p) into nonnegative Fenchel-Young terms.
struct GapDensity {
  Eigen::VectorXd cell;
  DualStatus status = DualStatus::Ok;
};

/// Discrete L1-L2-TV problem on one mesh: data, operators and the assembled
/// matrices shared by energies, residuals, solver and indicators.
class Problem {
 public:
  /// `g` lives in the data space of `t`. For a masked identity, entries on the
  /// inpainting domain are ignored.
  Problem(ModelParams params, OperatorT t, Eigen::VectorXd g);

  [[nodiscard]] const ModelParams& params() const { return params_; }
  [[nodiscard]] const OperatorT& op() const { return t_; }
  [[nodiscard]] const MeshPtr& mesh() const { return t_.mesh(); }
  [[nodiscard]] int components() const { return t_.components(); }
  [[nodiscard]] int num_dofs() const { return static_cast<int>(b_->matrix().rows()); }
  [[nodiscard]] int data_size() const { return t_.data_size(); }
  [[nodiscard]] const Eigen::VectorXd& data() const { return g_; }

  /// Gradient matrix mapping dofs to the FeCellMatrix layout.
  [[nodiscard]] const Eigen::SparseMatrix<double>& gradient_matrix() const { return grad_; }
  /// Cell area repeated for each gradient entry.
  [[nodiscard]] const Eigen::VectorXd& gradient_weights() const { return grad_w_; }
  /// Exact mass matrix of the data space.
  [[nodiscard]] const Eigen::SparseMatrix<double>& data_mass() const { return mass_d_; }
  /// Lumped node weights of the data space.
  [[nodiscard]] const Eigen::VectorXd& data_weights() const { return lump_d_; }
  /// Lumped vertex masses repeated per component.
  [[nodiscard]] const Eigen::VectorXd& dof_weights() const { return lump_u_; }
  [[nodiscard]] const Eigen::SparseMatrix<double>& s_matrix() const { return s_; }
  [[nodiscard]] const GridOperatorB& b() const { return *b_; }
  /// alpha2 T^* M g.
  [[nodiscard]] const Eigen::VectorXd& load() const { return load_; }

  [[nodiscard]] DualPair zero_dual() const;
  [[nodiscard]] Eigen::VectorXd data_residual(const Eigen::VectorXd& u) const;
  [[nodiscard]] Eigen::VectorXd cell_gradients(const Eigen::VectorXd& u) const { return grad_ * u; }

  [[nodiscard]] double energy_primal(const Eigen::VectorXd& u) const;
  /// Gradient of the discrete energy with Huber parameters floored at `gamma_floor`.
  [[nodiscard]] Eigen::VectorXd energy_gradient(const Eigen::VectorXd& u, double gamma_floor = 0.0) const;
  [[nodiscard]] DualEnergy energy_dual(const DualPair& p) const;
  /// Lambda^* p = T^* L p1 + G^* A p2.
  [[nodiscard]] Eigen::VectorXd adjoint(const DualPair& p) const;
  /// Closed-form dual (alpha1 r / max(gamma1,|r|), lambda q / max(gamma2,|q|)).
  [[nodiscard]] DualPair dual_from_primal(const Eigen::VectorXd& u) const;
  [[nodiscard]] Residuals residuals(const Eigen::VectorXd& u, const DualPair& p) const;
  /// Radial projection onto |p1| <= alpha1, |p2|_F <= lambda.
  void project(DualPair& p) const;
  /// E(u) + D(p); NaN when D cannot be evaluated.
  [[nodiscard]] double gap(const Eigen::VectorXd& u, const DualPair& p) const;
  [[nodiscard]] GapDensity gap_density(const Eigen::VectorXd& u, const DualPair& p) const;

 private:
  ModelParams params_;
  OperatorT t_;
  Eigen::VectorXd g_;
  Eigen::SparseMatrix<double> grad_;
  Eigen::VectorXd grad_w_;
  Eigen::SparseMatrix<double> mass_d_;
  Eigen::VectorXd lump_d_;
  Eigen::VectorXd lump_u_;
  Eigen::SparseMatrix<double> s_;
  std::shared_ptr<GridOperatorB> b_;
  Eigen::VectorXd load_;
};

/// Exact P1 mass matrix.
Eigen::SparseMatrix<double> p1_mass_matrix(const Mesh& mesh);
/// Block-diagonal mass matrix of the DG1 space.
Eigen::SparseMatrix<double> dg_mass_matrix(const Mesh& mesh);
Eigen::SparseMatrix<double> gradient_matrix(const Mesh& mesh, int m);

/// B = alpha2 T^* M T + beta S^* S.
GridOperatorB assemble_B(const ModelParams& params, const OperatorT& t);

double energy_primal(const FeVector& u, const Eigen::VectorXd& g, const ModelParams& params,
                     const OperatorT& t);
DualEnergy energy_dual(const DualPair& p, const Eigen::VectorXd& g, const ModelParams& params,
                       const OperatorT& t);
Residuals optimality_residual(const FeVector& u, const DualPair& p, const Eigen::VectorXd& g,
                              const ModelParams& params, const OperatorT& t);

}  // namespace tvafem
