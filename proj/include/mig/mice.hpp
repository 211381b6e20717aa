#ifndef MIG_MICE_HPP
#define MIG_MICE_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mig/dataset.hpp"
#include "mig/errors.hpp"
#include "mig/rng.hpp"

namespace mig {

struct MiceOptions {
  int m = 5;
  int n_iter = 5;
  /// Ridge added to the normal equations, as a fraction of their mean diagonal.
  double ridge = 1e-6;
  /// Ridge used instead when a column has no more observed rows than predictors.
  double small_sample_ridge = 1e-1;
};

/// M completed copies of the columns `columns` of a Dataset.
///
/// completed[m] is n x |columns|; column c holds source column columns[c].
/// Observed cells are copied bit-exactly; only masked cells differ across m.
/// The response is never imputed and is not stored here.
struct ImputedSet {
  std::vector<Eigen::MatrixXd> completed;
  IndexSet columns;
  int m = 0;
  int n_iter = 0;
  std::uint64_t seed = 0;
  /// Source columns in the order the chained equations visit them.
  IndexSet visit_order;

  Index n() const { return completed.empty() ? 0 : completed.front().rows(); }

  /// Position of source column `col` inside `columns`, or -1.
  Index position(Index col) const {
    auto it = std::lower_bound(columns.begin(), columns.end(), col);
    return (it != columns.end() && *it == col) ? static_cast<Index>(it - columns.begin()) : -1;
  }

  /// Completed values of the source columns `cols` (a subset of `columns`) for imputation m.
  Eigen::MatrixXd submatrix(int m_index, const IndexSet& cols) const {
    const Eigen::MatrixXd& full = completed[static_cast<std::size_t>(m_index)];
    Eigen::MatrixXd out(full.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      Index pos = position(cols[c]);
      if (pos < 0) throw Error(ErrorKind::numerical, "column not present in imputed set");
      out.col(static_cast<Index>(c)) = full.col(pos);
    }
    return out;
  }
};

namespace detail {

/// One chained-equations chain with Bayesian linear regression draws.
inline Eigen::MatrixXd impute_chain(const Dataset& ds, const IndexSet& cols, const IndexSet& visit, int n_iter,
                                    const MiceOptions& opt, std::mt19937_64& eng) {
  const Index n = ds.n();
  const Index k = static_cast<Index>(cols.size());
  Eigen::MatrixXd work(n, k);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<IndexSet> observed(static_cast<std::size_t>(k)), missing(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c) {
    for (Index i = 0; i < n; ++i)
      (ds.missing(i, cols[static_cast<std::size_t>(c)]) ? missing : observed)[static_cast<std::size_t>(c)].push_back(i);
  }
  for (Index c = 0; c < k; ++c) {
    const auto& obs = observed[static_cast<std::size_t>(c)];
    const Index src = cols[static_cast<std::size_t>(c)];
    for (Index i : obs) work(i, c) = ds.at(i, src);
    const auto& mis = missing[static_cast<std::size_t>(c)];
    if (mis.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, obs.size() - 1);
    for (Index i : mis) work(i, c) = ds.at(obs[pick(eng)], src);
  }

  // Design for column c: intercept, the other imputed columns, y.
  const Index q = k + 1;
  for (int it = 0; it < n_iter; ++it) {
    for (Index src : visit) {
      const Index c = static_cast<Index>(std::lower_bound(cols.begin(), cols.end(), src) - cols.begin());
      const auto& obs = observed[static_cast<std::size_t>(c)];
      const auto& mis = missing[static_cast<std::size_t>(c)];
      auto design_row = [&](Index i, auto&& row) {
        row(0) = 1.0;
        Index col = 1;
        for (Index o = 0; o < k; ++o)
          if (o != c) row(col++) = work(i, o);
        row(col) = ds.y()(i);
      };
      const Index n_obs = static_cast<Index>(obs.size());
      Eigen::MatrixXd d(n_obs, q);
      Eigen::VectorXd target(n_obs);
      for (Index r = 0; r < n_obs; ++r) {
        design_row(obs[static_cast<std::size_t>(r)], d.row(r));
        target(r) = work(obs[static_cast<std::size_t>(r)], c);
      }
      const bool small = n_obs <= q;
      Eigen::MatrixXd a = d.transpose() * d;
      const double mean_diag = a.diagonal().mean();
      a.diagonal().array() += (small ? opt.small_sample_ridge : opt.ridge) * std::max(mean_diag, 1e-300);
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::numerical, "imputation model for column " + std::to_string(src) + " is singular");
      Eigen::VectorXd beta_hat = llt.solve(d.transpose() * target);
      const double rss = (target - d * beta_hat).squaredNorm();
      const double df = small ? 1.0 : static_cast<double>(n_obs - q);
      std::chi_squared_distribution<double> chisq(df);
      const double sigma = std::sqrt(rss / chisq(eng));
      Eigen::VectorXd z(q);
      for (Index j = 0; j < q; ++j) z(j) = normal(eng);
      // cov(L^{-T} z) = (L L')^{-1}
      Eigen::VectorXd beta_draw = beta_hat + sigma * llt.matrixU().solve(z);
      Eigen::RowVectorXd row(q);
      for (Index i : mis) {
        design_row(i, row);
        work(i, c) = row.dot(beta_draw) + sigma * normal(eng);
      }
    }
  }
  return work;
}

}  // namespace detail

/// Multiple imputation by chained equations over the columns `cols`.
///
/// Each incomplete column is regressed on the other columns of `cols` plus y.
/// Missing cells start as draws from the column's observed values; each sweep
/// then draws sigma^2 from its scaled inverse chi-square posterior, beta from
/// its normal posterior, and refills the column. Chain m uses substream
/// `stream.child("chain", m)`.
inline ImputedSet mice_impute(const Dataset& ds, IndexSet cols, const MiceOptions& opt, Stream stream) {
  if (opt.m < 1) throw Error(ErrorKind::input, "mice: need at least one imputation");
  if (opt.n_iter < 1) throw Error(ErrorKind::input, "mice: need at least one sweep");
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  for (Index c : cols) {
    if (c < 0 || c >= ds.p()) throw Error(ErrorKind::input, "mice: column index out of range");
    if (ds.missing_count(c) == ds.n()) throw UnimputableColumn(c);
  }

  ImputedSet out;
  out.columns = cols;
  out.m = opt.m;
  out.n_iter = opt.n_iter;
  out.seed = stream.key();

  std::vector<std::pair<Index, Index>> incomplete;  // (missing count, column)
  for (Index c : cols)
    if (Index mc = ds.missing_count(c); mc > 0) incomplete.emplace_back(mc, c);
  std::stable_sort(incomplete.begin(), incomplete.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [count, c] : incomplete) out.visit_order.push_back(c);

  if (out.visit_order.empty()) {
    Eigen::MatrixXd block = ds.observed_block(rows_observed_on(ds, {}), cols);
    out.completed.assign(static_cast<std::size_t>(opt.m), block);
    return out;
  }
  out.completed.resize(static_cast<std::size_t>(opt.m));
  for (int m = 0; m < opt.m; ++m) {
    auto eng = stream.child("chain", static_cast<std::uint64_t>(m)).engine();
    out.completed[static_cast<std::size_t>(m)] = detail::impute_chain(ds, cols, out.visit_order, opt.n_iter, opt, eng);
  }
  return out;
}

}  // namespace mig

#endif  // MIG_MICE_HPP
