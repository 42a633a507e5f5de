#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "saddle/oracle.hpp"

namespace saddle {

/// Generator parameters for the synthetic saddle problem
///   f(x) = (1/n) sum_i [ x^T A_i x + b_i^T x + sum_j x_j^10 ].
struct SyntheticParams {
  std::size_t n = 1000;
  std::size_t d = 100;
  std::uint64_t seed = 0;
  double neg_eig = -0.001;  // smallest eigenvalue of Hess f(0)
  double pos_lo = 1.0;      // remaining eigenvalues of Hess f(0) lie in [pos_lo, pos_hi]
  double pos_hi = 2.0;
  double perturbation = 0.1;   // entries of A_i - mean(A) uniform in [-perturbation, perturbation]
  double offset_scale = 1e-3;  // entries of b_i (i < n) uniform in offset_scale * [-1, 1]
};

/// Everything that defines one generated instance. This is also what gets
/// serialized, so a reloaded instance is bit-identical.
struct SyntheticData {
  SyntheticParams params;
  std::vector<double> a;  // n blocks of d*d, row-major, each symmetric
  std::vector<double> b;  // n blocks of d
  std::vector<double> origin_spectrum;  // sorted eigenvalues of Hess f(0); empty if unverified
  double origin_hess_norm = 0.0;        // spectral norm of Hess f(0)
  double max_component_norm = 0.0;      // max_i ||A_i||_2
  double box_radius = 2.0;              // L and M are valid on ||x||_inf <= box_radius
  double lipschitz_grad = 0.0;
  double lipschitz_hess = 0.0;
};

class SyntheticSaddleProblem final : public FiniteSumProblem {
 public:
  explicit SyntheticSaddleProblem(SyntheticData data);

  const ProblemSpec& spec() const override { return spec_; }
  std::string name() const override { return "synthetic"; }
  double component(std::size_t i, const Vector& x, Vector& grad) const override;
  void component_hvp(std::size_t i, const Vector& x, const Vector& v, Vector& out) const override;

  /// ||Hess f(0)|| + 90 ||x||_inf^8, a bound on ||Hess f(x)|| valid everywhere.
  double curvature_bound(const Vector& x) const override;

  Eigen::Map<const Matrix> a_matrix(std::size_t i) const;
  Eigen::Map<const Vector> b_vector(std::size_t i) const;

  const SyntheticData& data() const { return data_; }
  const SyntheticParams& params() const { return data_.params; }

  /// True when x lies in the box on which the recorded L and M hold.
  bool in_box(const Vector& x) const;

 private:
  SyntheticData data_;
  ProblemSpec spec_;
};

/// Builds an instance whose origin is a non-degenerate saddle with the
/// requested spectrum. For d <= 200 the spectrum is verified by dense
/// eigendecomposition; a failed check retries with a fresh internal seed up
/// to 5 times, then throws ConstructionError.
SyntheticSaddleProblem generate_synthetic(const SyntheticParams& params);

/// Seeded start point uniform in [-radius, radius]^d.
Vector synthetic_start(std::size_t d, std::uint64_t seed, double radius = 1e-4);

/// f_i(x) = 1/2 sum_j w_ij x_j^2 + c_i^T x with mean_i w_ij = spectrum_j and
/// mean_i c_i = 0. Components come in +/- pairs around the mean so the
/// average is exact up to rounding; heterogeneity in [0, 1) keeps every w_ij
/// the same sign as spectrum_j.
class SeparableQuadratic final : public FiniteSumProblem {
 public:
  SeparableQuadratic(Vector spectrum, std::size_t n, double heterogeneity = 0.0,
                     double offset_scale = 0.0, std::uint64_t seed = 0, double hess_lipschitz = 1.0);

  const ProblemSpec& spec() const override { return spec_; }
  std::string name() const override { return "quadratic"; }
  double component(std::size_t i, const Vector& x, Vector& grad) const override;
  void component_hvp(std::size_t i, const Vector& x, const Vector& v, Vector& out) const override;
  double curvature_bound(const Vector& x) const override;

  const Vector& spectrum() const { return spectrum_; }
  /// Mean linear term (1/n) sum_i c_i.
  const Vector& mean_offset() const { return mean_offset_; }

 private:
  Vector spectrum_;
  Matrix weights_;  // d x n
  Matrix offsets_;  // d x n
  Vector mean_offset_;
  ProblemSpec spec_;
};

/// 1/2 (x_1^2 - x_2^2) as a sum of n identical components. The Hessian is
/// constant, so M is a free positive configuration value.
class SaddleToy2D final : public FiniteSumProblem {
 public:
  explicit SaddleToy2D(std::size_t n = 4, double hess_lipschitz = 1.0);

  const ProblemSpec& spec() const override { return spec_; }
  std::string name() const override { return "saddle2d"; }
  double component(std::size_t i, const Vector& x, Vector& grad) const override;
  void component_hvp(std::size_t i, const Vector& x, const Vector& v, Vector& out) const override;

 private:
  ProblemSpec spec_;
};

/// sum_j x_j^4 as n identical components; L = 12 R^2 and M = 24 R on the box
/// ||x||_inf <= R.
class SeparableQuartic final : public FiniteSumProblem {
 public:
  SeparableQuartic(std::size_t d, std::size_t n = 4, double box_radius = 1.0);

  const ProblemSpec& spec() const override { return spec_; }
  std::string name() const override { return "quartic"; }
  double component(std::size_t i, const Vector& x, Vector& grad) const override;
  void component_hvp(std::size_t i, const Vector& x, const Vector& v, Vector& out) const override;
  double curvature_bound(const Vector& x) const override;

 private:
  ProblemSpec spec_;
};

/// 1/2 x^T H x with a fixed symmetric H, as n identical components.
class DenseQuadratic final : public FiniteSumProblem {
 public:
  DenseQuadratic(Matrix hessian, std::size_t n = 1, double hess_lipschitz = 1.0);

  /// H = S / sqrt(2d) with S the symmetric part of a seeded Gaussian matrix,
  /// so the spectrum fills roughly [-1, 1].
  static DenseQuadratic random(std::size_t d, std::uint64_t seed, std::size_t n = 1);

  const ProblemSpec& spec() const override { return spec_; }
  std::string name() const override { return "dense-quadratic"; }
  double component(std::size_t i, const Vector& x, Vector& grad) const override;
  void component_hvp(std::size_t i, const Vector& x, const Vector& v, Vector& out) const override;

  const Matrix& hessian() const { return hessian_; }

 private:
  Matrix hessian_;
  ProblemSpec spec_;
};

/// Dense Hessian assembled from full HVPs against the canonical basis.
struct DenseHessianOracle {
  Matrix h_matrix;

  /// max |H - H^T|.
  double asymmetry() const;
  /// Ascending eigenvalues of the symmetric part.
  Vector eigenvalues() const;
  double min_eigenvalue() const;
};

/// n*d ISO calls. Throws ContractViolation for d > 500.
DenseHessianOracle dense_hessian(OracleContext& ctx, const Vector& x);

struct NamedProblem {
  std::string name;
  std::shared_ptr<const FiniteSumProblem> problem;
};

/// The three analytic fixtures: separable quadratic, 2-D saddle, separable quartic.
std::vector<NamedProblem> toy_problems();

/// Fixtures plus a random dense quadratic and a small synthetic instance.
std::vector<NamedProblem> shipped_problems();

}  // namespace saddle
