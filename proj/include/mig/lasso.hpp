#ifndef MIG_LASSO_HPP
#define MIG_LASSO_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "mig/dataset.hpp"
#include "mig/errors.hpp"
#include "mig/rng.hpp"

namespace mig {

/// l1-penalized least squares solution.
///
/// Predictors are standardized internally (weighted mean 0, weighted
/// population variance 1) and the penalty applies to the standardized slopes:
///   minimize (1/2) sum_i w_i (y_i - b0 - x_i'b)^2 + lambda * |b_std|_1,  sum_i w_i = 1.
/// With uniform weights this is the usual 1/(2n) scaling. `slopes` and
/// `intercept` are on the original scale.
struct LassoFit {
  double intercept = 0.0;
  Eigen::VectorXd slopes;
  Eigen::VectorXd standardized_slopes;
  double lambda = 0.0;
  int iterations = 0;
  double objective = 0.0;

  IndexSet support() const {
    IndexSet s;
    for (Index j = 0; j < slopes.size(); ++j)
      if (slopes(j) != 0.0) s.push_back(j);
    return s;
  }
};

struct LassoOptions {
  /// Converged when no standardized coordinate moves by more than this in a sweep.
  double tolerance = 1e-7;
  int max_sweeps = 100000;
};

namespace detail {

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// Cyclic coordinate descent with warm starts along a decreasing lambda path.
class CoordinateDescent {
 public:
  CoordinateDescent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights)
      : xs_(x), w_(weights / weights.sum()) {
    if (!x.allFinite() || !y.allFinite() || !weights.allFinite())
      throw Error(ErrorKind::input, "lasso: non-finite input");
    if (x.rows() != y.size() || weights.size() != y.size())
      throw Error(ErrorKind::input, "lasso: dimension mismatch");
    const Index p = x.cols();
    mean_.resize(p);
    scale_.resize(p);
    usable_.assign(static_cast<std::size_t>(p), false);
    for (Index j = 0; j < p; ++j) {
      mean_(j) = w_.dot(x.col(j));
      xs_.col(j).array() -= mean_(j);
      double var = (w_.array() * xs_.col(j).array().square()).sum();
      scale_(j) = std::sqrt(var);
      if (scale_(j) > 1e-12 * (1.0 + std::fabs(mean_(j)))) {
        xs_.col(j) /= scale_(j);
        usable_[static_cast<std::size_t>(j)] = true;
      } else {
        xs_.col(j).setZero();
      }
    }
    y_mean_ = w_.dot(y);
    r_ = y.array() - y_mean_;
    beta_ = Eigen::VectorXd::Zero(p);
    wx_ = xs_.array().colwise() * w_.array();
  }

  /// Computed exactly as the first coordinate update from zero, so no slope moves at this value.
  double lambda_max() const {
    double m = 0.0;
    for (Index j = 0; j < xs_.cols(); ++j) m = std::max(m, std::fabs(wx_.col(j).dot(r_) + beta_(j)));
    return m;
  }

  double objective(double lambda) const {
    return 0.5 * (w_.array() * r_.array().square()).sum() + lambda * beta_.lpNorm<1>();
  }

  /// Runs to convergence at `lambda`, starting from the current coefficients.
  int solve(double lambda, const LassoOptions& opt) {
    int sweeps = 0;
    while (sweeps < opt.max_sweeps) {
      double change = sweep(lambda, /*active_only=*/false);
      ++sweeps;
      if (change < opt.tolerance) break;
      while (sweeps < opt.max_sweeps) {
        double inner = sweep(lambda, /*active_only=*/true);
        ++sweeps;
        if (inner < opt.tolerance) break;
      }
    }
    return sweeps;
  }

  LassoFit result(double lambda, int iterations) const {
    LassoFit fit;
    fit.lambda = lambda;
    fit.iterations = iterations;
    fit.objective = objective(lambda);
    fit.standardized_slopes = beta_;
    fit.slopes = Eigen::VectorXd::Zero(beta_.size());
    fit.intercept = y_mean_;
    for (Index j = 0; j < beta_.size(); ++j) {
      if (beta_(j) == 0.0) continue;
      fit.slopes(j) = beta_(j) / scale_(j);
      fit.intercept -= fit.slopes(j) * mean_(j);
    }
    return fit;
  }

 private:
  double sweep(double lambda, bool active_only) {
    double max_change = 0.0;
    for (Index j = 0; j < xs_.cols(); ++j) {
      if (!usable_[static_cast<std::size_t>(j)]) continue;
      const double old = beta_(j);
      if (active_only && old == 0.0) continue;
      const double z = wx_.col(j).dot(r_) + old;
      const double updated = soft_threshold(z, lambda);
      if (updated != old) {
        r_.noalias() -= (updated - old) * xs_.col(j);
        beta_(j) = updated;
        max_change = std::max(max_change, std::fabs(updated - old));
      }
    }
    return max_change;
  }

  Eigen::MatrixXd xs_;
  Eigen::MatrixXd wx_;
  Eigen::VectorXd w_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
  std::vector<bool> usable_;
  double y_mean_ = 0.0;
  Eigen::VectorXd r_;
  Eigen::VectorXd beta_;
};

inline Eigen::VectorXd uniform_weights(Index n) { return Eigen::VectorXd::Constant(n, 1.0); }

}  // namespace detail

/// Smallest lambda at which every slope is zero: max_j |x~_j'(y - ybar)| / n.
inline double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd* weights = nullptr) {
  detail::CoordinateDescent cd(x, y, weights ? *weights : detail::uniform_weights(y.size()));
  return cd.lambda_max();
}

inline LassoFit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                          const LassoOptions& opt = {}, const Eigen::VectorXd* weights = nullptr) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::input, "lasso: lambda must be nonnegative");
  detail::CoordinateDescent cd(x, y, weights ? *weights : detail::uniform_weights(y.size()));
  int it = cd.solve(lambda, opt);
  return cd.result(lambda, it);
}

/// Lasso along a decreasing grid with warm starts; one fit per grid point.
inline std::vector<LassoFit> lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const std::vector<double>& lambdas, const LassoOptions& opt = {},
                                        const Eigen::VectorXd* weights = nullptr) {
  detail::CoordinateDescent cd(x, y, weights ? *weights : detail::uniform_weights(y.size()));
  std::vector<LassoFit> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) {
    int it = cd.solve(l, opt);
    out.push_back(cd.result(l, it));
  }
  return out;
}

/// Log-spaced grid from lambda_max down to min_ratio * lambda_max.
inline std::vector<double> lambda_grid(double lambda_max, int size, double min_ratio) {
  if (size < 2) throw Error(ErrorKind::input, "lasso: grid needs at least 2 points");
  if (!(lambda_max > 0.0)) lambda_max = 1e-10;
  std::vector<double> grid(static_cast<std::size_t>(size));
  const double step = std::log(min_ratio) / static_cast<double>(size - 1);
  for (int i = 0; i < size; ++i) grid[static_cast<std::size_t>(i)] = lambda_max * std::exp(step * i);
  return grid;
}

struct LassoCvOptions {
  int folds = 10;
  int grid_size = 100;
  double min_ratio = 1e-3;
  /// Select the largest lambda within one standard error of the minimum.
  bool one_se = false;
  LassoOptions solver;
};

struct CvResult {
  std::vector<double> lambdas;  // strictly decreasing
  std::vector<double> cv_mean;
  std::vector<double> cv_se;
  std::size_t index_min = 0;
  std::size_t index_1se = 0;
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  /// Key of the stream used to shuffle units into folds.
  std::uint64_t fold_seed = 0;
  std::vector<int> fold_of_unit;
};

struct LassoCvOutcome {
  CvResult cv;
  LassoFit fit;  // refit on all rows at the selected lambda
};

/// K-fold cross-validated lasso.
///
/// Rows are grouped into CV units by `unit_of_row` (default: each row its own
/// unit), so stacked copies of one observation always share a fold. Units are
/// shuffled with `stream` and cut into contiguous blocks.
inline LassoCvOutcome lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LassoCvOptions& opt,
                               Stream stream, const Eigen::VectorXd* weights = nullptr,
                               const std::vector<Index>* unit_of_row = nullptr) {
  const Index n = x.rows();
  if (opt.folds < 2) throw Error(ErrorKind::input, "lasso_cv: need at least 2 folds");
  std::vector<Index> units(static_cast<std::size_t>(n));
  if (unit_of_row) {
    if (static_cast<Index>(unit_of_row->size()) != n) throw Error(ErrorKind::input, "lasso_cv: unit map size");
    units = *unit_of_row;
  } else {
    std::iota(units.begin(), units.end(), Index{0});
  }
  const Index n_units = n == 0 ? 0 : *std::max_element(units.begin(), units.end()) + 1;
  if (n_units < opt.folds)
    throw Error(ErrorKind::input, "lasso_cv: " + std::to_string(n_units) + " observations for " +
                                      std::to_string(opt.folds) + " folds");
  const Eigen::VectorXd w = weights ? *weights : detail::uniform_weights(n);

  CvResult cv;
  cv.fold_seed = stream.key();
  {
    std::vector<Index> order(static_cast<std::size_t>(n_units));
    std::iota(order.begin(), order.end(), Index{0});
    auto eng = stream.engine();
    std::shuffle(order.begin(), order.end(), eng);
    cv.fold_of_unit.assign(static_cast<std::size_t>(n_units), 0);
    for (Index q = 0; q < n_units; ++q)
      cv.fold_of_unit[static_cast<std::size_t>(order[static_cast<std::size_t>(q)])] =
          static_cast<int>(q * opt.folds / n_units);
  }

  detail::CoordinateDescent full(x, y, w);
  cv.lambdas = lambda_grid(full.lambda_max(), opt.grid_size, opt.min_ratio);
  const std::size_t g = cv.lambdas.size();

  std::vector<std::vector<double>> fold_err(static_cast<std::size_t>(opt.folds), std::vector<double>(g));
  for (int f = 0; f < opt.folds; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i)
      (cv.fold_of_unit[static_cast<std::size_t>(units[static_cast<std::size_t>(i)])] == f ? test : train).push_back(i);
    Eigen::MatrixXd xt(static_cast<Index>(train.size()), x.cols());
    Eigen::VectorXd yt(static_cast<Index>(train.size())), wt(static_cast<Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
      xt.row(static_cast<Index>(r)) = x.row(train[r]);
      yt(static_cast<Index>(r)) = y(train[r]);
      wt(static_cast<Index>(r)) = w(train[r]);
    }
    detail::CoordinateDescent cd(xt, yt, wt);
    double wsum = 0.0;
    for (Index i : test) wsum += w(i);
    for (std::size_t l = 0; l < g; ++l) {
      int it = cd.solve(cv.lambdas[l], opt.solver);
      LassoFit fit = cd.result(cv.lambdas[l], it);
      double err = 0.0;
      for (Index i : test) {
        double e = y(i) - fit.intercept - x.row(i).dot(fit.slopes);
        err += w(i) * e * e;
      }
      fold_err[static_cast<std::size_t>(f)][l] = err / wsum;
    }
  }

  cv.cv_mean.assign(g, 0.0);
  cv.cv_se.assign(g, 0.0);
  const double k = static_cast<double>(opt.folds);
  for (std::size_t l = 0; l < g; ++l) {
    double s = 0.0;
    for (int f = 0; f < opt.folds; ++f) s += fold_err[static_cast<std::size_t>(f)][l];
    const double mean = s / k;
    double ss = 0.0;
    for (int f = 0; f < opt.folds; ++f) {
      double d = fold_err[static_cast<std::size_t>(f)][l] - mean;
      ss += d * d;
    }
    cv.cv_mean[l] = mean;
    cv.cv_se[l] = std::sqrt(ss / (k - 1.0) / k);
  }
  cv.index_min = static_cast<std::size_t>(std::min_element(cv.cv_mean.begin(), cv.cv_mean.end()) - cv.cv_mean.begin());
  cv.lambda_min = cv.lambdas[cv.index_min];
  const double bound = cv.cv_mean[cv.index_min] + cv.cv_se[cv.index_min];
  cv.index_1se = cv.index_min;
  for (std::size_t l = 0; l <= cv.index_min; ++l)
    if (cv.cv_mean[l] <= bound) {
      cv.index_1se = l;
      break;
    }
  cv.lambda_1se = cv.lambdas[cv.index_1se];

  const std::size_t chosen = opt.one_se ? cv.index_1se : cv.index_min;
  int iterations = 0;
  for (std::size_t l = 0; l <= chosen; ++l) iterations = full.solve(cv.lambdas[l], opt.solver);
  LassoFit fit = full.result(cv.lambdas[chosen], iterations);
  return {std::move(cv), std::move(fit)};
}

}  // namespace mig

#endif  // MIG_LASSO_HPP
