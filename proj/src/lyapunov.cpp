#include "pendwit/lyapunov.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace pendwit {

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() < 1 || A.rows() > 4)
    fail(Errc::BadParameter, "eigenvalues: square matrix of dimension <= 4 expected");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(A, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success)
    throw Error(Errc::NoConvergence, "QR iteration did not converge");
  const auto values = solver.eigenvalues();
  const auto vectors = solver.eigenvectors();
  const double scale = std::max(A.cwiseAbs().maxCoeff(), 1.0);
  std::vector<std::complex<double>> out;
  out.reserve(values.size());
  for (int i = 0; i < values.size(); ++i) {
    const Eigen::VectorXcd v = vectors.col(i);
    const double residual = (A.cast<std::complex<double>>() * v - values[i] * v).norm() / v.norm();
    if (residual > 1e-8 * scale)
      throw Error(Errc::NoConvergence,
                  "eigenpair residual " + std::to_string(residual) + " exceeds tolerance");
    out.push_back(values[i]);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });
  return out;
}

bool is_hurwitz(const Eigen::MatrixXd& A) {
  for (const auto& ev : eigenvalues(A))
    if (ev.real() >= 0) return false;
  return true;
}

QuadraticForm::QuadraticForm(Eigen::MatrixXd P) : P_(std::move(P)) {
  if (P_.rows() != P_.cols()) fail(Errc::BadParameter, "quadratic form must be square");
  if ((P_ - P_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    fail(Errc::BadParameter, "quadratic form must be symmetric to 1e-12");
  P_ = 0.5 * (P_ + P_.transpose().eval());
  for (int k = 1; k <= P_.rows(); ++k)
    if (P_.topLeftCorner(k, k).determinant() <= 0)
      fail(Errc::BadParameter, "quadratic form must be positive definite (leading minor " +
                                   std::to_string(k) + " is not positive)");
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || Q.rows() != n || Q.cols() != n)
    fail(Errc::BadParameter, "solve_lyapunov: dimension mismatch");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    fail(Errc::BadParameter, "solve_lyapunov: Q must be symmetric");
  if (!is_hurwitz(A))
    throw Error(Errc::NotHurwitz, "linearization has an eigenvalue with non-negative real part");

  // vec(A^T P) + vec(P A) = (I (x) A^T + A^T (x) I) vec(P)
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  const Eigen::MatrixXd At = A.transpose();
  for (int i = 0; i < n; ++i) {
    K.block(i * n, i * n, n, n) += At;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) K(i * n + j, k * n + j) += At(i, k);
  }
  Eigen::VectorXd rhs(n * n);
  for (int i = 0; i < n; ++i) rhs.segment(i * n, n) = -Q.col(i);
  const Eigen::VectorXd vecP = K.colPivHouseholderQr().solve(rhs);
  Eigen::MatrixXd P(n, n);
  for (int i = 0; i < n; ++i) P.col(i) = vecP.segment(i * n, n);
  P = 0.5 * (P + P.transpose().eval());

  const double residual = (A.transpose() * P + P * A + Q).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * Q.cwiseAbs().maxCoeff())
    throw Error(Errc::IllConditioned,
                "Lyapunov residual " + std::to_string(residual) + " exceeds tolerance");
  return P;
}

namespace {

// index of the coordinate the admissible region constrains, and its bounds
struct RegionExtent {
  int index;
  double lo, hi;
};

RegionExtent region_extent(SystemKind kind) {
  if (kind == SystemKind::Sphere) return {0, 0.0, M_PI / 2 - 10.0 * kSphereSingularCos};
  return {0, 0.0, M_PI};
}

}  // namespace

double max_level_inside_region(SystemKind kind, const Eigen::VectorXd& mu,
                               const QuadraticForm& form, double margin) {
  const RegionExtent ext = region_extent(kind);
  const double lo = ext.lo + margin, hi = ext.hi - margin;
  const double c = mu[ext.index];
  if (!(c > lo && c < hi))
    throw Error(Errc::PreconditionViolated,
                "equilibrium is not inside the admissible region with the required margin");
  // extent of {x^T P x <= eps} along coordinate i is sqrt(eps * (P^-1)_ii)
  const double pii = form.matrix().inverse()(ext.index, ext.index);
  const double reach = std::min(c - lo, hi - c);
  return reach * reach / pii;
}

std::vector<double> default_time_samples(const Controls& controls, double t0) {
  const int n = 32;
  const double span = controls.u.declared_period ? *controls.u.declared_period : 10.0;
  std::vector<double> times(n);
  for (int i = 0; i < n; ++i) times[i] = t0 + span * static_cast<double>(i) / n;
  return times;
}

VerificationReport verify_region(const SystemModel& model, const Controls& controls,
                                 LyapunovRegion& region, int n_samples,
                                 std::span<const double> t_samples, std::uint64_t seed) {
  if (n_samples < 1000) fail(Errc::BadParameter, "verify_region needs n_samples >= 1000");
  if (t_samples.empty()) fail(Errc::BadParameter, "verify_region needs time samples");
  const int n = region.form.dim();
  const Eigen::MatrixXd& P = region.form.matrix();
  // x = mu + sqrt(level) * L^-T u with P = L L^T puts x exactly on {V = level}
  const Eigen::MatrixXd Linvt =
      Eigen::MatrixXd(P.llt().matrixL()).transpose().inverse();

  VerificationReport report;
  report.initial_eps = region.eps;
  report.n_state_samples = n_samples;
  report.n_time_samples = static_cast<int>(t_samples.size());
  report.seed = seed;

  double eps = region.eps;
  for (int attempt = 0;; ++attempt) {
    if (eps < kEpsMin)
      throw Error(Errc::VerificationFailed,
                  "Vdot fails to be negative on every shell down to eps_min");
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.5, 1.0);
    bool ok = true;
    double min_neg_vdot = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_samples && ok; ++i) {
      Eigen::VectorXd dir(n);
      do {
        for (int k = 0; k < n; ++k) dir[k] = gauss(rng);
      } while (dir.norm() < 1e-12);
      dir.normalize();
      const double level = eps * unif(rng);
      const Eigen::VectorXd x = region.mu + std::sqrt(level) * (Linvt * dir);
      const Eigen::VectorXd grad = 2.0 * (P * (x - region.mu));
      for (double t : t_samples) {
        const double vdot = grad.dot(eval_rhs(model, x, t, controls));
        if (vdot >= 0) {
          ok = false;
          break;
        }
        min_neg_vdot = std::min(min_neg_vdot, -vdot);
      }
    }
    if (ok) {
      region.eps = eps;
      report.passed = true;
      report.final_eps = eps;
      report.min_neg_vdot = min_neg_vdot;
      const RegionExtent ext = region_extent(model.kind);
      const double pii = P.inverse()(ext.index, ext.index);
      const double half_width = std::sqrt(eps * pii);
      report.margin_to_boundary = std::min(region.mu[ext.index] - ext.lo - half_width,
                                           ext.hi - region.mu[ext.index] - half_width);
      region.report = report;
      return report;
    }
    eps *= 0.5;
    report.shrink_count++;
  }
}

LyapunovRegion build_region(const SystemModel& model, const Controls& controls,
                            const Eigen::VectorXd& mu, double t0, int n_samples,
                            std::uint64_t seed) {
  const Eigen::MatrixXd A = linearize(model, controls, mu, t0);
  const Eigen::MatrixXd P =
      solve_lyapunov(A, Eigen::MatrixXd::Identity(A.rows(), A.cols()));
  LyapunovRegion region{mu, QuadraticForm(P), 0.0, std::nullopt};
  region.eps = max_level_inside_region(model.kind, mu, region.form);
  const std::vector<double> times = default_time_samples(controls, t0);
  verify_region(model, controls, region, n_samples, times, seed);
  return region;
}

}  // namespace pendwit
