#pragma once

// Quadratic Lyapunov regions around an asymptotically stable closed-loop
// equilibrium: P solves A^T P + P A = -Q, the level set {V <= eps} is kept
// strictly inside the admissible region, and the decrease of V along the
// flow is verified by shell sampling.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pendwit/models.hpp"

namespace pendwit {

inline constexpr double kMarginMin = 1e-3;  // level-set distance to the region boundary (in q)
inline constexpr double kEpsMin = 1e-8;     // smallest level verify_region will try
inline constexpr std::uint64_t kDefaultShellSeed = 0x51ab1e5eedULL;

// Spectrum of a small dense matrix (Hessenberg reduction + shifted QR via
// Eigen), sorted by real part then imaginary part. Raises NoConvergence when
// the iteration fails or an eigenpair residual exceeds 1e-8.
std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& A);
bool is_hurwitz(const Eigen::MatrixXd& A);

// Symmetric positive definite matrix; the constructor enforces symmetry to
// 1e-12 and positivity of all leading principal minors.
class QuadraticForm {
 public:
  explicit QuadraticForm(Eigen::MatrixXd P);
  const Eigen::MatrixXd& matrix() const { return P_; }
  int dim() const { return static_cast<int>(P_.rows()); }

 private:
  Eigen::MatrixXd P_;
};

// Solves A^T P + P A = -Q as a dense linear system on vec(P); raises
// NotHurwitz when A has a non-negative eigenvalue real part and
// IllConditioned when the residual exceeds 1e-10 * ||Q||_max.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

struct VerificationReport {
  bool passed = false;
  double initial_eps = 0;
  double final_eps = 0;
  int shrink_count = 0;
  double min_neg_vdot = 0;  // min over final-shell samples of -Vdot
  int n_state_samples = 0;
  int n_time_samples = 0;
  std::uint64_t seed = 0;
  double margin_to_boundary = 0;  // distance of {V <= eps} to the region boundary in q
};

struct LyapunovRegion {
  Eigen::VectorXd mu;
  QuadraticForm form;
  double eps = 0;
  std::optional<VerificationReport> report;

  double value(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd d = x - mu;
    return d.dot(form.matrix() * d);
  }
  bool verified() const { return report && report->passed; }
};

// Times used for the "for all t" sampling surrogate: 32 points uniform over
// the declared period of u when present, else over [t0, t0 + 10].
std::vector<double> default_time_samples(const Controls& controls, double t0);

// Shrinks region.eps by halving until Vdot < 0 at every sampled shell state
// and time, attaches and returns the report. Raises VerificationFailed below
// kEpsMin.
VerificationReport verify_region(const SystemModel& model, const Controls& controls,
                                 LyapunovRegion& region, int n_samples,
                                 std::span<const double> t_samples,
                                 std::uint64_t seed = kDefaultShellSeed);

// linearize -> Hurwitz check -> solve_lyapunov(A, I) -> largest level inside
// the admissible region at margin kMarginMin -> verify_region.
LyapunovRegion build_region(const SystemModel& model, const Controls& controls,
                            const Eigen::VectorXd& mu, double t0, int n_samples = 2000,
                            std::uint64_t seed = kDefaultShellSeed);

// Largest eps with {V <= eps} inside the admissible strip at the given margin
// (planar/cart: 0 < q < pi; sphere: 0 < phi < pi/2 - 10*kSphereSingularCos).
double max_level_inside_region(SystemKind kind, const Eigen::VectorXd& mu,
                               const QuadraticForm& form, double margin = kMarginMin);

}  // namespace pendwit
