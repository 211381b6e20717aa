#ifndef MIG_OLS_HPP
#define MIG_OLS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mig/dataset.hpp"
#include "mig/distributions.hpp"
#include "mig/errors.hpp"

namespace mig {

/// Least-squares fit of y on an intercept plus k slopes.
///
/// `coefficients(0)` is the intercept; `xtx_inv` is ((1, X)'(1, X))^{-1} of
/// size (k+1) x (k+1), so sigma2 * xtx_inv is the coefficient covariance.
struct OlsFit {
  Eigen::VectorXd coefficients;
  double sigma2 = 0.0;
  Eigen::MatrixXd xtx_inv;
  double r2 = 0.0;
  Eigen::VectorXd residuals;
  Index n = 0;
  Index k = 0;

  double residual_df() const { return static_cast<double>(n - k - 1); }
};

/// Fits y = b0 + X b by Householder QR. Throws SingularDesign when a column of
/// X is (numerically) in the span of the intercept and the preceding columns.
inline OlsFit fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Index n = x.rows();
  const Index k = x.cols();
  if (y.size() != n) throw Error(ErrorKind::input, "fit_ols: response length differs from design rows");
  if (n <= k + 1)
    throw Error(ErrorKind::infeasible, "fit_ols: need n > k + 1 (n = " + std::to_string(n) +
                                           ", k = " + std::to_string(k) + ")");
  Eigen::MatrixXd design(n, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = x;

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (Index j = 0; j <= k; ++j) {
    const double scale = design.col(j).norm();
    if (!(std::fabs(packed(j, j)) > 1e-10 * std::max(scale, 1e-300))) throw SingularDesign(j - 1);
  }
  auto r = packed.topLeftCorner(k + 1, k + 1).triangularView<Eigen::Upper>();

  OlsFit fit;
  fit.n = n;
  fit.k = k;
  Eigen::VectorXd qty = qr.householderQ().transpose() * y;
  fit.coefficients = r.solve(qty.head(k + 1));
  fit.residuals = y - design * fit.coefficients;
  const double rss = fit.residuals.squaredNorm();
  const double tss = (y.array() - y.mean()).square().sum();
  fit.sigma2 = rss / static_cast<double>(n - k - 1);
  fit.r2 = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 0.0;

  Eigen::MatrixXd r_inv = r.solve(Eigen::MatrixXd::Identity(k + 1, k + 1));
  fit.xtx_inv = r_inv * r_inv.transpose();
  return fit;
}

struct TTest {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  /// sigma2 == 0: the standard error vanishes and p is 0 for any nonzero estimate.
  bool exact = false;
};

/// Single-fit t test of coefficient j (0 = intercept) with df n - k - 1.
inline TTest t_statistic(const OlsFit& fit, Index j) {
  TTest out;
  out.df = fit.residual_df();
  const double b = fit.coefficients(j);
  const double var = fit.sigma2 * fit.xtx_inv(j, j);
  if (!(var > 0.0)) {
    out.exact = true;
    out.t = b == 0.0 ? 0.0 : std::copysign(INFINITY, b);
    out.p = b == 0.0 ? 1.0 : 0.0;
    return out;
  }
  out.t = b / std::sqrt(var);
  out.p = dist::t_two_sided_p(out.t, out.df);
  return out;
}

}  // namespace mig

#endif  // MIG_OLS_HPP
