#ifndef MIG_MIG_HPP
#define MIG_MIG_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
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

/// How the per-imputation grafting gradients are combined into one choice.
enum class PoolingRule {
  vote,                 // each imputation nominates its argmax |g|; the mode wins
  average_gradient,     // argmax |mean_m g^(m)|
  pooled_coefficients,  // argmax |g| at the Rubin-pooled fit
};

inline const char* to_string(PoolingRule r) {
  switch (r) {
    case PoolingRule::vote: return "vote";
    case PoolingRule::average_gradient: return "avg";
    case PoolingRule::pooled_coefficients: return "pooled";
  }
  return "?";
}

/// Rows over which candidate gradients are summed.
enum class SupportMode {
  all_remaining,  // rows observed on every remaining candidate (one shared row set)
  per_candidate,  // rows observed on that candidate; sums divided by the row count
};

struct MigConfig {
  PoolingRule rule = PoolingRule::average_gradient;
  int m = 5;
  int n_iter = 5;
  int cv_folds = 10;
  double alpha = 0.05;
  bool normalize = false;
  std::uint64_t seed = 0;
  SupportMode support = SupportMode::all_remaining;
  int lasso_grid_size = 100;
  /// Initial lasso penalty: largest lambda within one CV standard error of the minimum.
  bool lasso_one_se = true;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::input, "alpha must lie in (0, 1)");
    if (m < 2) throw Error(ErrorKind::input, "MiG needs at least two imputations");
    if (n_iter < 1) throw Error(ErrorKind::input, "MiG needs at least one imputation sweep");
    if (cv_folds < 2) throw Error(ErrorKind::input, "MiG needs at least two CV folds");
  }
};

/// Rows fully observed on every remaining candidate. Grows as candidates leave.
inline IndexSet s_of_r(const Dataset& ds, const IndexSet& remaining) { return rows_observed_on(ds, remaining); }

namespace detail {

/// residual(i, m) = y_i - b0^(m) - sum_v b_v^(m) x~_iv^(m), for all n rows.
inline Eigen::MatrixXd imputation_residuals(const ImputedSet& imp, const Eigen::VectorXd& y, std::span<const OlsFit> fits,
                                            const std::vector<Index>& active) {
  const Index n = y.size();
  Eigen::MatrixXd res(n, static_cast<Index>(fits.size()));
  for (std::size_t m = 0; m < fits.size(); ++m) {
    const OlsFit& f = fits[m];
    if (f.k != static_cast<Index>(active.size())) throw Error(ErrorKind::input, "gradient: fit does not match active set");
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(n, f.coefficients(0));
    if (!active.empty()) fitted += imp.submatrix(static_cast<int>(m), IndexSet(active.begin(), active.end())) * f.coefficients.tail(f.k);
    res.col(static_cast<Index>(m)) = y - fitted;
  }
  return res;
}

inline void check_rows(const Dataset& ds, const IndexSet& candidates, const IndexSet& rows) {
  if (rows.empty()) throw Error(ErrorKind::infeasible, "grafting: empty row support");
  for (Index v : candidates)
    for (Index i : rows)
      if (ds.missing(i, v)) throw Error(ErrorKind::input, "grafting: candidate not observed on every support row");
}

}  // namespace detail

/// g^(m)_{v'} = sum_{i in rows} x_{iv'} (y_i - b0^(m) - sum_{v in active} b_v^(m) x~_iv^(m)).
/// Returns an M x |candidates| table. `fits[m]` regresses y on `active` (in that
/// column order) using imputation m of `imp`.
inline Eigen::MatrixXd gradients_per_imputation(const ImputedSet& imp, const Dataset& ds, std::span<const OlsFit> fits,
                                                const std::vector<Index>& active, const IndexSet& candidates,
                                                const IndexSet& rows) {
  detail::check_rows(ds, candidates, rows);
  const Eigen::MatrixXd res = detail::imputation_residuals(imp, ds.y(), fits, active);
  const Index mcount = static_cast<Index>(fits.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(mcount, static_cast<Index>(candidates.size()));
  for (std::size_t c = 0; c < candidates.size(); ++c)
    for (Index i : rows) g.col(static_cast<Index>(c)) += ds.at(i, candidates[c]) * res.row(i).transpose();
  return g;
}

/// g^pooled_{v'} = sum_{i in rows} x_{iv'} (y_i - bbar_0 - sum_{v in active} (sum_m b_v^(m) x~_iv^(m)) / M).
inline Eigen::VectorXd gradient_pooled(const ImputedSet& imp, const Dataset& ds, std::span<const OlsFit> fits,
                                       const std::vector<Index>& active, const IndexSet& candidates,
                                       const IndexSet& rows) {
  detail::check_rows(ds, candidates, rows);
  const Index n = ds.n();
  const double md = static_cast<double>(fits.size());
  double b0 = 0.0;
  for (const OlsFit& f : fits) b0 += f.coefficients(0);
  b0 /= md;
  Eigen::VectorXd averaged = Eigen::VectorXd::Zero(n);
  const IndexSet cols(active.begin(), active.end());
  for (std::size_t m = 0; m < fits.size(); ++m) {
    if (fits[m].k != static_cast<Index>(active.size())) throw Error(ErrorKind::input, "gradient: fit does not match active set");
    if (!active.empty()) averaged += imp.submatrix(static_cast<int>(m), cols) * fits[m].coefficients.tail(fits[m].k);
  }
  averaged /= md;
  const Eigen::VectorXd residual = ds.y().array() - b0 - averaged.array();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Index>(candidates.size()));
  for (std::size_t c = 0; c < candidates.size(); ++c)
    for (Index i : rows) g(static_cast<Index>(c)) += ds.at(i, candidates[c]) * residual(i);
  return g;
}

struct Gradients {
  Eigen::MatrixXd per_imputation;  // M x |candidates|
  Eigen::VectorXd pooled;          // |candidates|
  std::vector<Index> support_rows; // rows used per candidate
};

/// Per-candidate support: each candidate's sums run over its own observed rows
/// and are divided by the row count so candidates stay comparable.
inline Gradients gradients_per_candidate_support(const ImputedSet& imp, const Dataset& ds, std::span<const OlsFit> fits,
                                                 const std::vector<Index>& active, const IndexSet& candidates) {
  Gradients out;
  out.per_imputation.resize(static_cast<Index>(fits.size()), static_cast<Index>(candidates.size()));
  out.pooled.resize(static_cast<Index>(candidates.size()));
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const IndexSet one{candidates[c]};
    const IndexSet rows = rows_observed_on(ds, one);
    const double scale = 1.0 / static_cast<double>(rows.size());
    out.per_imputation.col(static_cast<Index>(c)) = gradients_per_imputation(imp, ds, fits, active, one, rows).col(0) * scale;
    out.pooled(static_cast<Index>(c)) = gradient_pooled(imp, ds, fits, active, one, rows)(0) * scale;
    out.support_rows.push_back(static_cast<Index>(rows.size()));
  }
  return out;
}

struct SelectionDiagnostics {
  std::vector<int> votes;          // per candidate (vote rule)
  Eigen::VectorXd mean_gradient;   // per candidate
  std::vector<Index> co_modes;     // candidate positions tied for most votes
  bool tie_broken = false;
};

namespace detail {
inline Index argmax_abs(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Index best = 0;
  for (Index j = 1; j < v.size(); ++j)
    if (std::fabs(v(j)) > std::fabs(v(best))) best = j;
  return best;
}
}  // namespace detail

/// Chooses the next candidate (returned as a position into the candidate list).
/// Exact ties in |g| resolve to the lowest position; ties between vote modes
/// are broken uniformly at random with `stream`.
inline std::pair<Index, SelectionDiagnostics> select_next(PoolingRule rule, const Eigen::MatrixXd& per_imputation,
                                                         const Eigen::VectorXd& pooled, Stream stream) {
  const Index c = per_imputation.cols();
  if (c == 0) throw Error(ErrorKind::input, "select_next: no candidates");
  SelectionDiagnostics diag;
  diag.mean_gradient = per_imputation.colwise().mean().transpose();
  diag.votes.assign(static_cast<std::size_t>(c), 0);
  for (Index m = 0; m < per_imputation.rows(); ++m)
    ++diag.votes[static_cast<std::size_t>(detail::argmax_abs(per_imputation.row(m).transpose()))];

  switch (rule) {
    case PoolingRule::vote: {
      const int top = *std::max_element(diag.votes.begin(), diag.votes.end());
      for (Index j = 0; j < c; ++j)
        if (diag.votes[static_cast<std::size_t>(j)] == top) diag.co_modes.push_back(j);
      if (diag.co_modes.size() == 1) return {diag.co_modes.front(), diag};
      diag.tie_broken = true;
      auto eng = stream.engine();
      std::uniform_int_distribution<std::size_t> pick(0, diag.co_modes.size() - 1);
      return {diag.co_modes[pick(eng)], diag};
    }
    case PoolingRule::average_gradient:
      return {detail::argmax_abs(diag.mean_gradient), diag};
    case PoolingRule::pooled_coefficients:
      return {detail::argmax_abs(pooled), diag};
  }
  throw Error(ErrorKind::input, "select_next: unknown rule");
}

/// Inference on one variable of the initial lasso set.
struct InitialTest {
  Index column = 0;
  double estimate = 0.0;
  PooledTTest test;
};

/// One grafting iteration.
struct GraftingStep {
  int iteration = 0;
  std::vector<Index> active_before;  // in order of entry
  IndexSet candidates;
  Index support_size = 0;            // |S(r)|; 0 under per-candidate support
  bool per_candidate_support = false;
  Eigen::MatrixXd gradients;         // M x |candidates|, signed
  Eigen::VectorXd pooled_gradient;   // |candidates|, signed
  SelectionDiagnostics selection;
  Index chosen = -1;                 // column index u
  PooledFtest ftest;
  double t_chosen = 0.0;             // pooled t of u in the augmented model, logged only
  double p_t_chosen = 1.0;
  bool accepted = false;
  std::string note;
};

struct SelectionTrace {
  IndexSet lasso_set;                 // V0
  double lasso_lambda = 0.0;
  Index complete_rows = 0;
  std::vector<InitialTest> initial_tests;
  std::vector<Index> initial_active;  // V_r after the pooled t tests
  std::vector<GraftingStep> steps;
  std::vector<Index> active;          // final active set in order of entry
  IndexSet selected;                  // final active set, ascending
  std::optional<PooledFit> final_fit; // columns ordered as `active`, intercept first
  /// Final coefficients on the input scale: intercept and all p slopes (zeros off the selection).
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  std::optional<StandardizeParams> scaling;
  double seconds = 0.0;
};

namespace detail {

inline std::vector<OlsFit> fit_ordered(const ImputedSet& imp, const Eigen::VectorXd& y, const std::vector<Index>& cols) {
  return fit_imputations(imp, y, IndexSet(cols.begin(), cols.end()));
}

inline IndexSet sorted(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

/// Multiple imputation with adaptive greedy forward selection.
///
/// Initialization: cross-validated lasso on the complete cases gives the
/// auxiliary set V0; the variables of V0 significant in the pooled fit over
/// imputations of V0 form the initial active set. Each iteration grafts the
/// candidate with the largest combined gradient, re-imputes the augmented set
/// from scratch, and keeps the candidate only if the pooled F test for the
/// change in R^2 rejects at `alpha`.
inline SelectionTrace mig_run(const Dataset& input, const MigConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const Stream root(cfg.seed);
  SelectionTrace trace;

  Dataset ds = input;
  if (cfg.normalize) {
    auto [scaled, params] = standardize(input, /*include_y=*/true);
    ds = std::move(scaled);
    trace.scaling = params;
  }
  const Index n = ds.n();
  const MiceOptions mice{.m = cfg.m, .n_iter = cfg.n_iter};

  // Step 0: lasso on complete cases.
  const IndexSet cc = complete_cases(ds);
  trace.complete_rows = static_cast<Index>(cc.size());
  if (cc.empty()) throw Error(ErrorKind::infeasible, "MiG: no complete cases to initialize from");
  if (static_cast<Index>(cc.size()) < cfg.cv_folds)
    throw Error(ErrorKind::infeasible, "MiG: " + std::to_string(cc.size()) + " complete cases for " +
                                           std::to_string(cfg.cv_folds) + "-fold initialization");
  LassoCvOptions lopt;
  lopt.folds = cfg.cv_folds;
  lopt.grid_size = cfg.lasso_grid_size;
  lopt.one_se = cfg.lasso_one_se;
  auto init = lasso_cv(ds.observed_block(cc, ds.all_columns()), ds.y_rows(cc), lopt, root.child("init-lasso"));
  trace.lasso_set = init.fit.support();
  trace.lasso_lambda = init.fit.lambda;

  // Step 0-(a), 0-(b): impute V0, pool, keep significant variables.
  std::vector<Index> active;
  ImputedSet current = mice_impute(ds, {}, mice, root.child("impute", 0));
  if (!trace.lasso_set.empty()) {
    current = mice_impute(ds, trace.lasso_set, mice, root.child("impute", 0));
    const auto fits0 = fit_imputations(current, ds.y(), trace.lasso_set);
    const PooledFit pf0 = pool_ols(fits0);
    for (std::size_t j = 0; j < trace.lasso_set.size(); ++j) {
      InitialTest t{trace.lasso_set[j], pf0.beta_bar(static_cast<Index>(j) + 1),
                    pooled_t_test(pf0, static_cast<Index>(j) + 1, cfg.alpha)};
      if (t.test.significant) active.push_back(t.column);
      trace.initial_tests.push_back(t);
    }
  }
  trace.initial_active = active;
  std::vector<OlsFit> fits = detail::fit_ordered(current, ds.y(), active);

  // Steps 1-2.
  for (int r = 0;; ++r) {
    const IndexSet candidates = set_difference(ds.all_columns(), detail::sorted(active));
    if (candidates.empty()) break;
    if (n <= static_cast<Index>(active.size()) + 2) break;

    GraftingStep step;
    step.iteration = r;
    step.active_before = active;
    step.candidates = candidates;
    IndexSet rows = cfg.support == SupportMode::all_remaining ? s_of_r(ds, candidates) : IndexSet{};
    if (cfg.support == SupportMode::per_candidate || rows.empty()) {
      if (cfg.support == SupportMode::all_remaining) step.note = "no row observed on all candidates; per-candidate support";
      step.per_candidate_support = true;
      Gradients g = gradients_per_candidate_support(current, ds, fits, active, candidates);
      step.gradients = std::move(g.per_imputation);
      step.pooled_gradient = std::move(g.pooled);
    } else {
      step.support_size = static_cast<Index>(rows.size());
      step.gradients = gradients_per_imputation(current, ds, fits, active, candidates, rows);
      step.pooled_gradient = gradient_pooled(current, ds, fits, active, candidates, rows);
    }
    auto [pos, diag] = select_next(cfg.rule, step.gradients, step.pooled_gradient,
                                   root.child("tie", static_cast<std::uint64_t>(r)));
    step.selection = std::move(diag);
    const Index u = candidates[static_cast<std::size_t>(pos)];
    step.chosen = u;

    std::vector<Index> augmented = active;
    augmented.push_back(u);
    ImputedSet next = mice_impute(ds, detail::sorted(augmented), mice, root.child("impute", static_cast<std::uint64_t>(r) + 1));
    std::vector<OlsFit> fits_alt;
    try {
      fits_alt = detail::fit_ordered(next, ds.y(), augmented);
    } catch (const SingularDesign&) {
      step.note = "augmented design singular; candidate rejected";
      trace.steps.push_back(std::move(step));
      break;
    }
    const std::vector<OlsFit> fits_null = detail::fit_ordered(next, ds.y(), active);
    step.ftest = pooled_f_test_change_r2(fits_null, fits_alt, n);
    const PooledFit pf_alt = pool_ols(fits_alt);
    const PooledTTest tu = pooled_t_test(pf_alt, static_cast<Index>(augmented.size()), cfg.alpha);
    step.t_chosen = tu.t;
    step.p_t_chosen = tu.p;
    step.accepted = step.ftest.p < cfg.alpha;
    const bool accepted = step.accepted;
    trace.steps.push_back(std::move(step));
    if (!accepted) break;
    active = std::move(augmented);
    current = std::move(next);
    fits = std::move(fits_alt);
  }

  trace.active = active;
  trace.selected = detail::sorted(active);
  trace.final_fit = pool_ols(fits);
  Eigen::VectorXd slopes = Eigen::VectorXd::Zero(ds.p());
  for (std::size_t j = 0; j < active.size(); ++j) slopes(active[j]) = trace.final_fit->beta_bar(static_cast<Index>(j) + 1);
  double b0 = trace.final_fit->beta_bar(0);
  if (trace.scaling) std::tie(b0, slopes) = destandardize(*trace.scaling, b0, slopes);
  trace.intercept = b0;
  trace.coefficients = std::move(slopes);
  trace.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

}  // namespace mig

#endif  // MIG_MIG_HPP
