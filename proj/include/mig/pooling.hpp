#ifndef MIG_POOLING_HPP
#define MIG_POOLING_HPP

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "mig/dataset.hpp"
#include "mig/distributions.hpp"
#include "mig/errors.hpp"
#include "mig/mice.hpp"
#include "mig/ols.hpp"
#include "mig/rng.hpp"

namespace mig {

/// Rubin's-rule combination of M estimates.
///
/// For OLS pools, index 0 is the intercept and `k` counts slopes; `phi` is
/// (1 + 1/M) tr(B T^{-1}) / k over the slope block only.
struct PooledFit {
  Eigen::VectorXd beta_bar;
  Eigen::MatrixXd within;   // U
  Eigen::MatrixXd between;  // B
  Eigen::MatrixXd total;    // T = U + (1 + 1/M) B
  Eigen::VectorXd fmi;      // (1 + 1/M) B_jj / T_jj
  Eigen::VectorXd df;       // Barnard-Rubin, per coefficient
  double phi = 0.0;
  int m = 0;
  Index k = 0;
  Index n = 0;
  double nu_com = INFINITY;

  Eigen::VectorXd standard_errors() const { return total.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// Barnard-Rubin small-sample degrees of freedom for one scalar estimand.
///   r = (1 + 1/M) B / U,  nu_old = (M - 1)(1 + 1/r)^2,
///   gamma = (1 + 1/M) B / T,  nu_obs = (nu_com + 1)/(nu_com + 3) nu_com (1 - gamma),
///   nu = (1/nu_old + 1/nu_obs)^{-1}.
/// With no between-imputation variance the imputations coincide and nu_com is returned.
inline double barnard_rubin_df(double between, double within, int m, double nu_com) {
  if (!(between > 0.0)) return nu_com;
  const double inflate = 1.0 + 1.0 / static_cast<double>(m);
  const double total = within + inflate * between;
  const double nu_old = between > 0.0 && within > 0.0
                            ? static_cast<double>(m - 1) * std::pow(1.0 + within / (inflate * between), 2)
                            : (between > 0.0 ? static_cast<double>(m - 1) : INFINITY);
  if (!std::isfinite(nu_com)) return nu_old;
  const double gamma = total > 0.0 ? inflate * between / total : 0.0;
  const double nu_obs = (nu_com + 1.0) / (nu_com + 3.0) * nu_com * (1.0 - gamma);
  if (!std::isfinite(nu_old)) return nu_obs;
  if (nu_obs <= 0.0) return nu_old;
  return 1.0 / (1.0 / nu_old + 1.0 / nu_obs);
}

/// Pools arbitrary estimates with covariances. `slope_begin` marks where the
/// coefficients entering the average fmi start.
inline PooledFit pool_estimates(std::span<const Eigen::VectorXd> estimates, std::span<const Eigen::MatrixXd> covariances,
                                Index slope_begin, double nu_com) {
  const int m = static_cast<int>(estimates.size());
  if (m < 2) throw Error(ErrorKind::input, "pooling needs at least two imputations (between variance undefined)");
  if (covariances.size() != estimates.size()) throw Error(ErrorKind::input, "pooling: estimate/covariance count");
  const Index d = estimates[0].size();
  PooledFit pf;
  pf.m = m;
  pf.nu_com = nu_com;
  pf.k = d - slope_begin;
  // Running means reproduce identical inputs exactly, so identical fits give B = 0.
  pf.beta_bar = estimates[0];
  pf.within = covariances[0];
  for (int i = 1; i < m; ++i) {
    if (estimates[static_cast<std::size_t>(i)].size() != d) throw Error(ErrorKind::input, "pooling: size mismatch");
    const double w = 1.0 / static_cast<double>(i + 1);
    pf.beta_bar += w * (estimates[static_cast<std::size_t>(i)] - pf.beta_bar);
    pf.within += w * (covariances[static_cast<std::size_t>(i)] - pf.within);
  }
  const double md = static_cast<double>(m);
  pf.between = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd dev = estimates[static_cast<std::size_t>(i)] - pf.beta_bar;
    pf.between.noalias() += dev * dev.transpose();
  }
  pf.between /= (md - 1.0);
  const double inflate = 1.0 + 1.0 / md;
  pf.total = pf.within + inflate * pf.between;

  pf.fmi.resize(d);
  pf.df.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double t = pf.total(j, j);
    pf.fmi(j) = t > 0.0 ? inflate * pf.between(j, j) / t : 0.0;
    pf.df(j) = barnard_rubin_df(pf.between(j, j), pf.within(j, j), m, nu_com);
  }

  if (pf.k > 0) {
    const Eigen::MatrixXd bs = pf.between.bottomRightCorner(pf.k, pf.k);
    const Eigen::MatrixXd ts = pf.total.bottomRightCorner(pf.k, pf.k);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ts);
    double trace = 0.0;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ts.diagonal().minCoeff() > 0.0) {
      trace = ldlt.solve(bs).trace();
    } else {
      for (Index j = 0; j < pf.k; ++j) trace += ts(j, j) > 0.0 ? bs(j, j) / ts(j, j) : 0.0;
    }
    pf.phi = std::clamp(inflate * trace / static_cast<double>(pf.k), 0.0, 1.0);
  }
  return pf;
}

/// Rubin's rules over M OLS fits of the same design (intercept + k slopes).
inline PooledFit pool_ols(std::span<const OlsFit> fits) {
  if (fits.size() < 2) throw Error(ErrorKind::input, "pooling needs at least two imputations (between variance undefined)");
  std::vector<Eigen::VectorXd> est;
  std::vector<Eigen::MatrixXd> cov;
  for (const OlsFit& f : fits) {
    if (f.k != fits[0].k || f.n != fits[0].n) throw Error(ErrorKind::input, "pooling: fits differ in design");
    est.push_back(f.coefficients);
    cov.push_back(f.sigma2 * f.xtx_inv);
  }
  const double nu_com = static_cast<double>(fits[0].n - fits[0].k - 1);
  PooledFit pf = pool_estimates(est, cov, 1, nu_com);
  pf.n = fits[0].n;
  return pf;
}

struct PooledTTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool significant = false;
  /// T_jj == 0 with a nonzero estimate.
  bool degenerate = false;
};

/// t test of coefficient j of a pooled fit with Barnard-Rubin df.
inline PooledTTest pooled_t_test(const PooledFit& pf, Index j, double alpha) {
  PooledTTest out;
  out.df = pf.df(j);
  const double b = pf.beta_bar(j);
  const double var = pf.total(j, j);
  if (!(var > 0.0)) {
    out.degenerate = b != 0.0;
    out.t = b == 0.0 ? 0.0 : std::copysign(INFINITY, b);
    out.p = b == 0.0 ? 1.0 : 0.0;
    out.significant = out.p < alpha;
    return out;
  }
  out.t = b / std::sqrt(var);
  out.p = dist::t_two_sided_p(out.t, out.df);
  out.significant = out.p < alpha;
  return out;
}

/// Pools R^2 across imputations through Fisher's z of R = +sqrt(R^2).
inline double pooled_r2(std::span<const OlsFit> fits) {
  double z = 0.0;
  for (const OlsFit& f : fits) z += std::atanh(std::sqrt(std::clamp(f.r2, 0.0, 1.0)));
  const double r = std::tanh(z / static_cast<double>(fits.size()));
  return r * r;
}

/// F for the change in R^2 from adding one column: ((R_A^2 - R_0^2)/1) / ((1 - R_A^2)/nu2).
/// Negative changes are clamped to F = 0.
inline double f_change_r2(double r2_null, double r2_alt, double nu2) {
  const double delta = r2_alt - r2_null;
  if (!(delta > 0.0)) return 0.0;
  if (r2_alt >= 1.0) return INFINITY;
  return delta / ((1.0 - r2_alt) / nu2);
}

struct PooledFtest {
  double f = 0.0;
  double nu1 = 1.0;
  double nu2 = 0.0;
  double p = 1.0;
  double r2_null = 0.0;
  double r2_alt = 0.0;
  bool saturated = false;
};

/// Pooled F test that the last column of the alternative design adds nothing.
///
/// fits_alt[m] must be fitted on the design of fits_null[m] plus one column
/// appended last, on the same imputed data. nu2 is the Barnard-Rubin df of
/// that added coefficient with nu_com = n - (k_alt + 1); with M = 1 it is nu_com.
inline PooledFtest pooled_f_test_change_r2(std::span<const OlsFit> fits_null, std::span<const OlsFit> fits_alt, Index n) {
  if (fits_null.empty() || fits_null.size() != fits_alt.size())
    throw Error(ErrorKind::input, "pooled F test: mismatched fit counts");
  const Index k_alt = fits_alt[0].k;
  if (fits_null[0].k + 1 != k_alt) throw Error(ErrorKind::input, "pooled F test: alternative must add one column");
  PooledFtest out;
  out.r2_null = pooled_r2(fits_null);
  out.r2_alt = pooled_r2(fits_alt);
  const double nu_com = static_cast<double>(n - (k_alt + 1));
  if (fits_alt.size() == 1) {
    out.nu2 = nu_com;
  } else {
    PooledFit pf = pool_ols(fits_alt);
    out.nu2 = pf.df(k_alt);
  }
  if (out.r2_alt >= 1.0) {
    out.saturated = true;
    out.f = INFINITY;
    out.p = 0.0;
    return out;
  }
  out.f = f_change_r2(out.r2_null, out.r2_alt, out.nu2);
  out.p = dist::f_upper_tail(out.f, 1.0, out.nu2);
  return out;
}

/// Fits y on the given imputed columns for every imputation.
inline std::vector<OlsFit> fit_imputations(const ImputedSet& imp, const Eigen::VectorXd& y, const IndexSet& cols) {
  std::vector<OlsFit> fits;
  fits.reserve(static_cast<std::size_t>(imp.m));
  for (int m = 0; m < imp.m; ++m) fits.push_back(fit_ols(imp.submatrix(m, cols), y));
  return fits;
}

struct RefitFmi {
  PooledFit fit;        // refit of the selected model
  double phi = 0.0;     // phi(k, h)
  double phi_full = 0.0;
  double ratio = 0.0;   // phi / phi_full; 0 when phi_full == 0
  bool full_model_zero = false;
};

/// Average fraction of missing information of a refit on the selected columns,
/// and its ratio to the same quantity for the model with all p columns.
inline RefitFmi refit_fmi(const Dataset& ds, IndexSet selected, const MiceOptions& opt, Stream stream) {
  if (selected.empty()) throw Error(ErrorKind::input, "refit_fmi: empty selection");
  std::sort(selected.begin(), selected.end());
  auto refit = [&](const IndexSet& cols, Stream s) {
    ImputedSet imp = mice_impute(ds, cols, opt, s);
    auto fits = fit_imputations(imp, ds.y(), cols);
    return pool_ols(fits);
  };
  RefitFmi out;
  out.fit = refit(selected, stream.child("refit-selected"));
  out.phi = out.fit.phi;
  const IndexSet all = ds.all_columns();
  out.phi_full = selected == all ? out.phi : refit(all, stream.child("refit-full")).phi;
  out.full_model_zero = !(out.phi_full > 0.0);
  out.ratio = out.full_model_zero ? 0.0 : out.phi / out.phi_full;
  return out;
}

}  // namespace mig

#endif  // MIG_POOLING_HPP
