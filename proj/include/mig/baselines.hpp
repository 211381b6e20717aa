#ifndef MIG_BASELINES_HPP
#define MIG_BASELINES_HPP

#include <Eigen/Dense>
#include <chrono>
#include <string>
#include <vector>

#include "mig/dataset.hpp"
#include "mig/errors.hpp"
#include "mig/lasso.hpp"
#include "mig/mice.hpp"
#include "mig/ols.hpp"
#include "mig/pooling.hpp"
#include "mig/rng.hpp"

namespace mig {

/// Output of any selector: a column set and coefficients over all p columns.
struct BaselineResult {
  std::string label;
  IndexSet selected;
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // length p, zero off `selected`
  double seconds = 0.0;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline IndexSet nonzero(const Eigen::VectorXd& v) {
  IndexSet s;
  for (Index j = 0; j < v.size(); ++j)
    if (v(j) != 0.0) s.push_back(j);
  return s;
}

}  // namespace detail

/// Listwise deletion least squares; slopes not significant at `alpha` are zeroed.
inline BaselineResult ldls(const Dataset& ds, double alpha) {
  detail::Stopwatch clock;
  const IndexSet cc = complete_cases(ds);
  if (static_cast<Index>(cc.size()) <= ds.p() + 1)
    throw Error(ErrorKind::infeasible, "ldls: " + std::to_string(cc.size()) + " complete cases for " +
                                           std::to_string(ds.p()) + " covariates");
  const OlsFit fit = fit_ols(ds.observed_block(cc, ds.all_columns()), ds.y_rows(cc));
  BaselineResult out{"ldls", {}, fit.coefficients(0), Eigen::VectorXd::Zero(ds.p()), 0.0};
  for (Index j = 0; j < ds.p(); ++j)
    if (t_statistic(fit, j + 1).p < alpha) out.coefficients(j) = fit.coefficients(j + 1);
  out.selected = detail::nonzero(out.coefficients);
  out.seconds = clock.seconds();
  return out;
}

/// Multiple imputation least squares: impute all columns, pool, zero the
/// pooled-t-insignificant slopes.
inline BaselineResult mils(const Dataset& ds, const MiceOptions& mice, double alpha, Stream stream) {
  detail::Stopwatch clock;
  const IndexSet all = ds.all_columns();
  const ImputedSet imp = mice_impute(ds, all, mice, stream.child("impute"));
  const auto fits = fit_imputations(imp, ds.y(), all);
  const PooledFit pf = pool_ols(fits);
  BaselineResult out{"mils", {}, pf.beta_bar(0), Eigen::VectorXd::Zero(ds.p()), 0.0};
  for (Index j = 0; j < ds.p(); ++j)
    if (pooled_t_test(pf, j + 1, alpha).p < alpha) out.coefficients(j) = pf.beta_bar(j + 1);
  out.selected = detail::nonzero(out.coefficients);
  out.seconds = clock.seconds();
  return out;
}

/// Lasso with cross-validation on the complete cases.
inline BaselineResult ld_lasso_cv(const Dataset& ds, const LassoCvOptions& opt, Stream stream) {
  detail::Stopwatch clock;
  const IndexSet cc = complete_cases(ds);
  if (static_cast<Index>(cc.size()) < opt.folds)
    throw Error(ErrorKind::input, "ld-lasso-cv: " + std::to_string(cc.size()) + " complete cases for " +
                                           std::to_string(opt.folds) + " folds");
  auto res = lasso_cv(ds.observed_block(cc, ds.all_columns()), ds.y_rows(cc), opt, stream.child("cv"));
  BaselineResult out{"ld-lasso-cv", res.fit.support(), res.fit.intercept, res.fit.slopes, 0.0};
  out.seconds = clock.seconds();
  return out;
}

enum class SupportVote { any, half, all };

inline const char* to_string(SupportVote v) {
  switch (v) {
    case SupportVote::any: return "s1";
    case SupportVote::half: return "s2";
    case SupportVote::all: return "s3";
  }
  return "?";
}

/// Lasso on each imputed dataset separately; a column is kept when it is
/// nonzero in at least one (any), ceil(M/2) (half) or all M fits. Kept
/// coefficients average the M lasso estimates, zeros included.
inline BaselineResult mi_lasso_separate(const Dataset& ds, const MiceOptions& mice, const LassoCvOptions& opt,
                                        SupportVote mode, Stream stream) {
  detail::Stopwatch clock;
  const IndexSet all = ds.all_columns();
  const ImputedSet imp = mice_impute(ds, all, mice, stream.child("impute"));
  const int m = imp.m;
  std::vector<int> count(static_cast<std::size_t>(ds.p()), 0);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(ds.p());
  double b0 = 0.0;
  for (int k = 0; k < m; ++k) {
    auto res = lasso_cv(imp.completed[static_cast<std::size_t>(k)], ds.y(), opt, stream.child("cv"));
    for (Index j = 0; j < ds.p(); ++j)
      if (res.fit.slopes(j) != 0.0) ++count[static_cast<std::size_t>(j)];
    sum += res.fit.slopes;
    b0 += res.fit.intercept;
  }
  const int need = mode == SupportVote::any ? 1 : mode == SupportVote::half ? (m + 1) / 2 : m;
  BaselineResult out{std::string("mi-lasso-") + to_string(mode), {}, b0 / m, Eigen::VectorXd::Zero(ds.p()), 0.0};
  for (Index j = 0; j < ds.p(); ++j)
    if (count[static_cast<std::size_t>(j)] >= need) {
      out.selected.push_back(j);
      out.coefficients(j) = sum(j) / m;
    }
  out.seconds = clock.seconds();
  return out;
}

/// Lasso on the M imputed datasets stacked row-wise, each row weighted 1/M.
/// CV folds are drawn over stacked rows, or over observations when
/// `group_folds` is set so that the M copies of a row share a fold.
inline BaselineResult mi_stacked(const Dataset& ds, const MiceOptions& mice, const LassoCvOptions& opt, Stream stream,
                                 bool group_folds = false) {
  detail::Stopwatch clock;
  const IndexSet all = ds.all_columns();
  const ImputedSet imp = mice_impute(ds, all, mice, stream.child("impute"));
  const Index n = ds.n();
  const int m = imp.m;
  Eigen::MatrixXd x(n * m, ds.p());
  Eigen::VectorXd y(n * m);
  std::vector<Index> unit(static_cast<std::size_t>(n * m));
  for (int k = 0; k < m; ++k) {
    x.middleRows(k * n, n) = imp.completed[static_cast<std::size_t>(k)];
    y.segment(k * n, n) = ds.y();
    for (Index i = 0; i < n; ++i) unit[static_cast<std::size_t>(k * n + i)] = i;
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(n * m, 1.0 / m);
  auto res = lasso_cv(x, y, opt, stream.child("cv"), &w, group_folds ? &unit : nullptr);
  BaselineResult out{"mi-stacked", res.fit.support(), res.fit.intercept, res.fit.slopes, 0.0};
  out.seconds = clock.seconds();
  return out;
}

}  // namespace mig

#endif  // MIG_BASELINES_HPP
