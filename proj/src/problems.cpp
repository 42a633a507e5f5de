#include "saddle/problems.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "saddle/errors.hpp"
#include "saddle/rng.hpp"

namespace saddle {

namespace {

constexpr int kMaxSyntheticAttempts = 5;
constexpr std::size_t kMaxVerifiedDim = 200;
constexpr std::size_t kMaxDenseHessianDim = 500;
constexpr double kSpectrumTolerance = 1e-9;

double spectral_norm(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  const Vector& ev = solver.eigenvalues();
  return std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
}

// One attempt; returns nullopt when the spectrum check fails.
std::optional<SyntheticData> try_generate(const SyntheticParams& p, int attempt) {
  const auto d = static_cast<Eigen::Index>(p.d);
  Rng rng = Rng::derive(p.seed, "synthetic", static_cast<std::uint64_t>(attempt));

  Matrix gauss(d, d);
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r < d; ++r) gauss(r, c) = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(gauss).householderQ();

  // Hess f(0) = 2 * mean(A_i), so the mean matrix carries half the target spectrum.
  Vector half_spectrum(d);
  half_spectrum[0] = 0.5 * p.neg_eig;
  for (Eigen::Index j = 1; j < d; ++j) half_spectrum[j] = 0.5 * rng.uniform(p.pos_lo, p.pos_hi);
  Matrix mean_a = q * half_spectrum.asDiagonal() * q.transpose();
  mean_a = (0.5 * (mean_a + mean_a.transpose())).eval();

  SyntheticData data;
  data.params = p;
  data.a.resize(p.n * p.d * p.d);
  data.b.resize(p.n * p.d);

  Matrix perturbation_sum = Matrix::Zero(d, d);
  Matrix perturbation(d, d);
  Vector offset_sum = Vector::Zero(d);
  for (std::size_t i = 0; i < p.n; ++i) {
    Eigen::Map<Matrix> a_i(data.a.data() + i * p.d * p.d, d, d);
    Eigen::Map<Vector> b_i(data.b.data() + i * p.d, d);
    if (i + 1 < p.n) {
      for (Eigen::Index c = 0; c < d; ++c) {
        for (Eigen::Index r = 0; r <= c; ++r) {
          const double e = rng.uniform(-p.perturbation, p.perturbation);
          perturbation(r, c) = e;
          perturbation(c, r) = e;
        }
      }
      perturbation_sum += perturbation;
      for (Eigen::Index j = 0; j < d; ++j) b_i[j] = p.offset_scale * rng.uniform(-1.0, 1.0);
      offset_sum += b_i;
    } else {
      perturbation = -perturbation_sum;
      b_i = -offset_sum;
    }
    a_i = mean_a + perturbation;
  }

  double max_norm = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) {
    Eigen::Map<const Matrix> a_i(data.a.data() + i * p.d * p.d, d, d);
    max_norm = std::max(max_norm, spectral_norm(a_i));
  }
  data.max_component_norm = max_norm;
  data.lipschitz_grad = 2.0 * max_norm + 90.0 * std::pow(data.box_radius, 8);
  data.lipschitz_hess = 720.0 * std::pow(data.box_radius, 7);

  if (p.d <= kMaxVerifiedDim) {
    Matrix hess0 = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < p.n; ++i)
      hess0 += 2.0 * Eigen::Map<const Matrix>(data.a.data() + i * p.d * p.d, d, d);
    hess0 /= static_cast<double>(p.n);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(hess0, Eigen::EigenvaluesOnly);
    const Vector& ev = solver.eigenvalues();
    if (std::abs(ev[0] - p.neg_eig) > kSpectrumTolerance) return std::nullopt;
    if (d > 1 && (ev[1] < p.pos_lo - kSpectrumTolerance || ev[d - 1] > p.pos_hi + kSpectrumTolerance))
      return std::nullopt;
    data.origin_spectrum.assign(ev.data(), ev.data() + ev.size());
    data.origin_hess_norm = std::max(std::abs(ev[0]), std::abs(ev[d - 1]));
  } else {
    data.origin_hess_norm = std::max(std::abs(p.neg_eig), p.pos_hi) * (1.0 + 1e-9);
  }
  return data;
}

}  // namespace

SyntheticSaddleProblem::SyntheticSaddleProblem(SyntheticData data) : data_(std::move(data)) {
  const auto& p = data_.params;
  if (data_.a.size() != p.n * p.d * p.d || data_.b.size() != p.n * p.d)
    throw ContractViolation("SyntheticSaddleProblem: storage does not match n and d");
  spec_.n = p.n;
  spec_.d = p.d;
  spec_.lipschitz_grad = data_.lipschitz_grad;
  spec_.lipschitz_hess = data_.lipschitz_hess;
  spec_.validate();
}

Eigen::Map<const Matrix> SyntheticSaddleProblem::a_matrix(std::size_t i) const {
  const auto d = static_cast<Eigen::Index>(spec_.d);
  return Eigen::Map<const Matrix>(data_.a.data() + i * spec_.d * spec_.d, d, d);
}

Eigen::Map<const Vector> SyntheticSaddleProblem::b_vector(std::size_t i) const {
  return Eigen::Map<const Vector>(data_.b.data() + i * spec_.d,
                                  static_cast<Eigen::Index>(spec_.d));
}

double SyntheticSaddleProblem::component(std::size_t i, const Vector& x, Vector& grad) const {
  grad.noalias() = a_matrix(i) * x;
  const auto xa = x.array();
  const auto x8 = xa.square().square().square();
  const double value = x.dot(grad) + b_vector(i).dot(x) + (x8 * xa.square()).sum();
  grad *= 2.0;
  grad += b_vector(i);
  grad.array() += 10.0 * x8 * xa;
  return value;
}

void SyntheticSaddleProblem::component_hvp(std::size_t i, const Vector& x, const Vector& v,
                                           Vector& out) const {
  out.noalias() = a_matrix(i) * v;
  out *= 2.0;
  out.array() += 90.0 * x.array().square().square().square() * v.array();
}

double SyntheticSaddleProblem::curvature_bound(const Vector& x) const {
  const double r = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  return data_.origin_hess_norm + 90.0 * std::pow(r, 8);
}

bool SyntheticSaddleProblem::in_box(const Vector& x) const {
  return x.size() == 0 || x.cwiseAbs().maxCoeff() <= data_.box_radius;
}

SyntheticSaddleProblem generate_synthetic(const SyntheticParams& params) {
  if (params.n < 2 || params.d < 2) throw ContractViolation("generate_synthetic: need n >= 2, d >= 2");
  if (!(params.neg_eig < 0.0)) throw ContractViolation("generate_synthetic: neg_eig must be negative");
  if (!(params.pos_lo > 0.0) || params.pos_hi < params.pos_lo)
    throw ContractViolation("generate_synthetic: invalid positive eigenvalue range");
  for (int attempt = 0; attempt < kMaxSyntheticAttempts; ++attempt) {
    if (auto data = try_generate(params, attempt)) return SyntheticSaddleProblem(std::move(*data));
  }
  std::ostringstream msg;
  msg << "generate_synthetic: spectrum check failed after " << kMaxSyntheticAttempts
      << " attempts (n=" << params.n << ", d=" << params.d << ", seed=" << params.seed << ")";
  throw ConstructionError(msg.str());
}

Vector synthetic_start(std::size_t d, std::uint64_t seed, double radius) {
  Rng rng = Rng::derive(seed, "start");
  return rng.uniform_vector(static_cast<Eigen::Index>(d), -radius, radius);
}

// ---------------------------------------------------------------------------

SeparableQuadratic::SeparableQuadratic(Vector spectrum, std::size_t n, double heterogeneity,
                                       double offset_scale, std::uint64_t seed,
                                       double hess_lipschitz)
    : spectrum_(std::move(spectrum)) {
  if (n < 1 || spectrum_.size() < 1) throw ContractViolation("SeparableQuadratic: empty problem");
  if (heterogeneity < 0.0 || heterogeneity >= 1.0)
    throw ContractViolation("SeparableQuadratic: heterogeneity must lie in [0, 1)");
  const Eigen::Index d = spectrum_.size();
  const auto count = static_cast<Eigen::Index>(n);
  weights_.resize(d, count);
  offsets_.resize(d, count);
  Rng rng = Rng::derive(seed, "quadratic");
  for (Eigen::Index i = 0; i + 1 < count; i += 2) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double delta = heterogeneity * spectrum_[j] * rng.uniform(-1.0, 1.0);
      const double c = offset_scale * rng.uniform(-1.0, 1.0);
      weights_(j, i) = spectrum_[j] + delta;
      weights_(j, i + 1) = spectrum_[j] - delta;
      offsets_(j, i) = c;
      offsets_(j, i + 1) = -c;
    }
  }
  if (count % 2 == 1) {
    weights_.col(count - 1) = spectrum_;
    offsets_.col(count - 1).setZero();
  }
  mean_offset_ = offsets_.rowwise().sum() / static_cast<double>(n);

  spec_.n = n;
  spec_.d = static_cast<std::size_t>(d);
  spec_.lipschitz_grad = std::max(weights_.cwiseAbs().maxCoeff(), 1e-12);
  spec_.lipschitz_hess = hess_lipschitz;
  if ((spectrum_.array() > 0.0).all())
    spec_.lower_bound_hint = -0.5 * (mean_offset_.array().square() / spectrum_.array()).sum();
  spec_.validate();
}

double SeparableQuadratic::component(std::size_t i, const Vector& x, Vector& grad) const {
  const auto idx = static_cast<Eigen::Index>(i);
  grad = weights_.col(idx).cwiseProduct(x) + offsets_.col(idx);
  return 0.5 * x.dot(weights_.col(idx).cwiseProduct(x)) + offsets_.col(idx).dot(x);
}

void SeparableQuadratic::component_hvp(std::size_t i, const Vector& /*x*/, const Vector& v,
                                       Vector& out) const {
  out = weights_.col(static_cast<Eigen::Index>(i)).cwiseProduct(v);
}

double SeparableQuadratic::curvature_bound(const Vector& /*x*/) const {
  return std::max(spectrum_.cwiseAbs().maxCoeff(), 1e-12);
}

// ---------------------------------------------------------------------------

SaddleToy2D::SaddleToy2D(std::size_t n, double hess_lipschitz) {
  spec_.n = n;
  spec_.d = 2;
  spec_.lipschitz_grad = 1.0;
  spec_.lipschitz_hess = hess_lipschitz;
  spec_.validate();
}

double SaddleToy2D::component(std::size_t, const Vector& x, Vector& grad) const {
  grad.resize(2);
  grad << x[0], -x[1];
  return 0.5 * (x[0] * x[0] - x[1] * x[1]);
}

void SaddleToy2D::component_hvp(std::size_t, const Vector&, const Vector& v, Vector& out) const {
  out.resize(2);
  out << v[0], -v[1];
}

// ---------------------------------------------------------------------------

SeparableQuartic::SeparableQuartic(std::size_t d, std::size_t n, double box_radius) {
  spec_.n = n;
  spec_.d = d;
  spec_.lipschitz_grad = 12.0 * box_radius * box_radius;
  spec_.lipschitz_hess = 24.0 * box_radius;
  spec_.lower_bound_hint = 0.0;
  spec_.validate();
}

double SeparableQuartic::component(std::size_t, const Vector& x, Vector& grad) const {
  grad = 4.0 * x.array().cube().matrix();
  return x.array().square().square().sum();
}

void SeparableQuartic::component_hvp(std::size_t, const Vector& x, const Vector& v,
                                     Vector& out) const {
  out = (12.0 * x.array().square() * v.array()).matrix();
}

double SeparableQuartic::curvature_bound(const Vector& x) const {
  const double r = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  return std::max(12.0 * r * r, 1e-12);
}

// ---------------------------------------------------------------------------

DenseQuadratic::DenseQuadratic(Matrix hessian, std::size_t n, double hess_lipschitz)
    : hessian_(std::move(hessian)) {
  if (hessian_.rows() != hessian_.cols() || hessian_.rows() < 1)
    throw ContractViolation("DenseQuadratic: Hessian must be square and non-empty");
  if ((hessian_ - hessian_.transpose()).cwiseAbs().maxCoeff() > 0.0)
    throw ContractViolation("DenseQuadratic: Hessian must be symmetric");
  spec_.n = n;
  spec_.d = static_cast<std::size_t>(hessian_.rows());
  spec_.lipschitz_grad = std::max(spectral_norm(hessian_), 1e-12);
  spec_.lipschitz_hess = hess_lipschitz;
  spec_.validate();
}

DenseQuadratic DenseQuadratic::random(std::size_t d, std::uint64_t seed, std::size_t n) {
  const auto dim = static_cast<Eigen::Index>(d);
  Rng rng = Rng::derive(seed, "dense-quadratic");
  Matrix g(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) g(r, c) = rng.normal();
  Matrix h = 0.5 * (g + g.transpose()) / std::sqrt(2.0 * static_cast<double>(d));
  return DenseQuadratic(std::move(h), n);
}

double DenseQuadratic::component(std::size_t, const Vector& x, Vector& grad) const {
  grad.noalias() = hessian_ * x;
  return 0.5 * x.dot(grad);
}

void DenseQuadratic::component_hvp(std::size_t, const Vector&, const Vector& v, Vector& out) const {
  out.noalias() = hessian_ * v;
}

// ---------------------------------------------------------------------------

double DenseHessianOracle::asymmetry() const {
  return (h_matrix - h_matrix.transpose()).cwiseAbs().maxCoeff();
}

Vector DenseHessianOracle::eigenvalues() const {
  const Matrix sym = 0.5 * (h_matrix + h_matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double DenseHessianOracle::min_eigenvalue() const { return eigenvalues()[0]; }

DenseHessianOracle dense_hessian(OracleContext& ctx, const Vector& x) {
  const std::size_t d = ctx.dim();
  if (d > kMaxDenseHessianDim)
    throw ContractViolation("dense_hessian: dimension " + std::to_string(d) + " exceeds 500");
  const auto dim = static_cast<Eigen::Index>(d);
  DenseHessianOracle out;
  out.h_matrix.resize(dim, dim);
  Vector basis = Vector::Zero(dim);
  Vector column;
  for (Eigen::Index j = 0; j < dim; ++j) {
    basis[j] = 1.0;
    ctx.full_hvp(x, basis, column);
    out.h_matrix.col(j) = column;
    basis[j] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<NamedProblem> toy_problems() {
  std::vector<NamedProblem> out;
  Vector spectrum(4);
  spectrum << 1.0, 2.0, 3.0, 4.0;
  out.push_back({"quadratic", std::make_shared<SeparableQuadratic>(spectrum, 8, 0.5, 0.1, 1)});
  out.push_back({"saddle2d", std::make_shared<SaddleToy2D>(4, 1.0)});
  out.push_back({"quartic", std::make_shared<SeparableQuartic>(3, 4, 1.0)});
  return out;
}

std::vector<NamedProblem> shipped_problems() {
  auto out = toy_problems();
  out.push_back({"dense-quadratic", std::make_shared<DenseQuadratic>(DenseQuadratic::random(10, 3, 2))});
  SyntheticParams p;
  p.n = 20;
  p.d = 8;
  p.seed = 11;
  out.push_back({"synthetic", std::make_shared<SyntheticSaddleProblem>(generate_synthetic(p))});
  return out;
}

}  // namespace saddle
