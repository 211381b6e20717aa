#ifndef MIG_SIMBENCH_HPP
#define MIG_SIMBENCH_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mig/dataset.hpp"
#include "mig/errors.hpp"
#include "mig/methods.hpp"
#include "mig/pooling.hpp"
#include "mig/rng.hpp"

namespace mig {

/// One simulation scenario.
struct SimConfig {
  Index n_train = 200;
  Index n_test = 200;
  Index p = 35;
  double rho = 0.2;
  double miss_pct = 0.01;
  /// Share of training rows kept fully observed.
  double protected_frac = 0.25;
  int replicates = 20;
  std::uint64_t seed = 1;
  MethodSettings methods;

  void validate() const {
    if (p < 10) throw Error(ErrorKind::input, "simulation needs p >= 10");
    if (n_train < 2 || n_test < 1) throw Error(ErrorKind::input, "simulation needs n_train >= 2 and n_test >= 1");
    if (!(rho >= 0.0 && rho < 1.0)) throw Error(ErrorKind::input, "rho must lie in [0, 1)");
    if (!(miss_pct >= 0.0 && miss_pct < 1.0)) throw Error(ErrorKind::input, "miss_pct must lie in [0, 1)");
    if (!(protected_frac >= 0.0 && protected_frac <= 1.0)) throw Error(ErrorKind::input, "protected_frac must lie in [0, 1]");
    if (replicates < 1) throw Error(ErrorKind::input, "need at least one replicate");
  }
};

/// (1, 2, 3, 4, 5, -1, -2, -3, -4, -5, 0, ..., 0)
inline Eigen::VectorXd true_coefficients(Index p) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (Index j = 0; j < 5; ++j) {
    beta(j) = static_cast<double>(j + 1);
    beta(j + 5) = -static_cast<double>(j + 1);
  }
  return beta;
}

struct SimData {
  Dataset train;
  Dataset test;
  Eigen::VectorXd beta;
  Index mar_cells = 0;
  Index mcar_cells = 0;
  Index target_cells = 0;
  double realized_fraction = 0.0;
  /// MAR masking alone overshot the requested missing fraction.
  bool calibration_warning = false;
  IndexSet protected_rows;
};

namespace detail {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline Eigen::MatrixXd compound_symmetry_normal(Index n, Index p, double rho, std::mt19937_64& eng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
  Eigen::MatrixXd x(n, p);
  for (Index i = 0; i < n; ++i) {
    const double common = normal(eng);
    for (Index j = 0; j < p; ++j) x(i, j) = a * common + b * normal(eng);
  }
  return x;
}

}  // namespace detail

/// Draws a training set with MAR and MCAR missingness and a complete test set.
///
/// X3, X5 and X10 go missing with logistic probabilities driven by the
/// always-observed X1 and X6; a fixed share of rows is protected; the other
/// p - 5 columns then receive MCAR cells sampled without replacement so that
/// the total hits round(miss_pct * n_train * p) whenever MAR leaves room.
inline SimData generate_dataset(const SimConfig& cfg, Stream stream) {
  cfg.validate();
  const Index n = cfg.n_train + cfg.n_test;
  const Index p = cfg.p;
  auto eng_x = stream.child("x").engine();
  Eigen::MatrixXd x = detail::compound_symmetry_normal(n, p, cfg.rho, eng_x);
  SimData out;
  out.beta = true_coefficients(p);
  auto eng_e = stream.child("noise").engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd y = x * out.beta;
  for (Index i = 0; i < n; ++i) y(i) += normal(eng_e);

  const Index nt = cfg.n_train;
  MaskMatrix mask = MaskMatrix::Zero(nt, p);
  out.target_cells = static_cast<Index>(std::llround(cfg.miss_pct * static_cast<double>(nt * p)));
  if (cfg.miss_pct > 0.0) {
    auto eng_m = stream.child("mask").engine();
    std::vector<Index> rows(static_cast<std::size_t>(nt));
    std::iota(rows.begin(), rows.end(), Index{0});
    std::shuffle(rows.begin(), rows.end(), eng_m);
    const auto n_protected = static_cast<std::size_t>(std::llround(cfg.protected_frac * static_cast<double>(nt)));
    out.protected_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_protected));
    std::sort(out.protected_rows.begin(), out.protected_rows.end());
    std::vector<bool> is_protected(static_cast<std::size_t>(nt), false);
    for (Index i : out.protected_rows) is_protected[static_cast<std::size_t>(i)] = true;

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index i = 0; i < nt; ++i) {
      const double x1 = x(i, 0), x6 = x(i, 5);
      const double pr[3] = {detail::logistic(x6 - 2.5), detail::logistic(x1 + x6 - 2.0),
                            detail::logistic(-x1 - 0.5 * x6 - 2.0)};
      const Index col[3] = {2, 4, 9};
      for (int c = 0; c < 3; ++c) {
        const double u = unif(eng_m);
        if (!is_protected[static_cast<std::size_t>(i)] && u < pr[c]) {
          mask(i, col[c]) = 1;
          ++out.mar_cells;
        }
      }
    }

    std::vector<std::pair<Index, Index>> eligible;
    for (Index j = 0; j < p; ++j) {
      if (j == 0 || j == 2 || j == 4 || j == 5 || j == 9) continue;
      for (Index i = 0; i < nt; ++i)
        if (!is_protected[static_cast<std::size_t>(i)]) eligible.emplace_back(i, j);
    }
    const Index need = out.target_cells - out.mar_cells;
    if (need < 0) out.calibration_warning = true;
    const auto take = static_cast<std::size_t>(std::clamp<Index>(need, 0, static_cast<Index>(eligible.size())));
    std::vector<std::pair<Index, Index>> chosen;
    std::sample(eligible.begin(), eligible.end(), std::back_inserter(chosen), take, eng_m);
    for (auto [i, j] : chosen) mask(i, j) = 1;
    out.mcar_cells = static_cast<Index>(take);
  }
  out.realized_fraction = static_cast<double>(out.mar_cells + out.mcar_cells) / static_cast<double>(nt * p);

  Eigen::MatrixXd x_train = x.topRows(nt);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < nt; ++i)
      if (mask(i, j)) x_train(i, j) = std::numeric_limits<double>::quiet_NaN();
  out.train = Dataset(y.head(nt), std::move(x_train), std::move(mask));
  out.test = Dataset::complete(y.tail(cfg.n_test), x.bottomRows(cfg.n_test));
  return out;
}

struct MetricsRow {
  Index tp = 0, tn = 0, fp = 0, fn = 0;
  double mcc = 0.0;
  /// A confusion-matrix margin was empty, so MCC was set to 0.
  bool mcc_degenerate = false;
  double l1 = 0.0;
  double l2 = 0.0;
  double mspe = 0.0;
  double seconds = 0.0;
};

inline double matthews(Index tp, Index tn, Index fp, Index fn, bool* degenerate = nullptr) {
  const double d = static_cast<double>(tp + fp) * static_cast<double>(tp + fn) * static_cast<double>(tn + fp) *
                   static_cast<double>(tn + fn);
  if (degenerate) *degenerate = !(d > 0.0);
  if (!(d > 0.0)) return 0.0;
  return (static_cast<double>(tp) * static_cast<double>(tn) - static_cast<double>(fp) * static_cast<double>(fn)) /
         std::sqrt(d);
}

/// Selection counts against the true support, coefficient error norms over
/// the p slopes, and mean squared prediction error on the complete test set.
inline MetricsRow compute_metrics(const Eigen::VectorXd& beta_true, double intercept, const Eigen::VectorXd& beta_hat,
                                  const Dataset& test) {
  if (beta_hat.size() != beta_true.size() || test.p() != beta_true.size())
    throw Error(ErrorKind::input, "metrics: coefficient length mismatch");
  if (test.missing_count() != 0) throw Error(ErrorKind::input, "metrics: test set must be complete");
  MetricsRow r;
  for (Index j = 0; j < beta_true.size(); ++j) {
    const bool truth = beta_true(j) != 0.0, chosen = beta_hat(j) != 0.0;
    if (truth && chosen) ++r.tp;
    else if (truth) ++r.fn;
    else if (chosen) ++r.fp;
    else ++r.tn;
  }
  r.mcc = matthews(r.tp, r.tn, r.fp, r.fn, &r.mcc_degenerate);
  const Eigen::VectorXd diff = beta_hat - beta_true;
  r.l1 = diff.lpNorm<1>();
  r.l2 = diff.norm();
  const Eigen::VectorXd pred = (test.x_raw() * beta_hat).array() + intercept;
  r.mspe = (test.y() - pred).squaredNorm() / static_cast<double>(test.n());
  return r;
}

/// Runs `work(r)` for r in [0, count) on `jobs` threads. Each index is
/// processed exactly once; callers store results by index.
template <class F>
void parallel_for(int count, int jobs, F&& work) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int r = 0; r < count; ++r) work(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int r = next++; r < count; r = next++) work(r);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Mean and sample sd of the available values, summed in sorted order so the
/// result does not depend on replicate order.
struct Summary {
  double mean = NAN;
  double sd = NAN;
  int count = 0;
};

inline Summary summarize(std::vector<double> v) {
  Summary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    std::vector<double> sq;
    for (double x : v) sq.push_back((x - s.mean) * (x - s.mean));
    std::sort(sq.begin(), sq.end());
    double ss = 0.0;
    for (double x : sq) ss += x;
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct ReplicateOutcome {
  std::optional<MetricsRow> metrics;  // empty when the method was infeasible
  IndexSet selected;
  std::string error;
  int exit_code = 0;
};

struct MethodSummary {
  std::string method;
  int feasible = 0;
  int replicates = 0;
  Summary l1, l2, mspe, tp, tn, fp, fn, mcc, seconds;
};

struct BenchReport {
  SimConfig config;
  std::vector<Method> methods;
  std::vector<Index> complete_rows;                 // per replicate
  std::vector<double> realized_fraction;            // per replicate
  std::vector<std::vector<ReplicateOutcome>> runs;  // [replicate][method]
  std::vector<MethodSummary> summary;               // per method
};

inline MethodSummary summarize_method(const std::string& name, const std::vector<const ReplicateOutcome*>& runs) {
  MethodSummary s;
  s.method = name;
  s.replicates = static_cast<int>(runs.size());
  std::vector<double> l1, l2, mspe, tp, tn, fp, fn, mcc, sec;
  for (const ReplicateOutcome* o : runs) {
    if (!o->metrics) continue;
    const MetricsRow& m = *o->metrics;
    ++s.feasible;
    l1.push_back(m.l1);
    l2.push_back(m.l2);
    mspe.push_back(m.mspe);
    tp.push_back(static_cast<double>(m.tp));
    tn.push_back(static_cast<double>(m.tn));
    fp.push_back(static_cast<double>(m.fp));
    fn.push_back(static_cast<double>(m.fn));
    mcc.push_back(m.mcc);
    sec.push_back(m.seconds);
  }
  s.l1 = summarize(l1);
  s.l2 = summarize(l2);
  s.mspe = summarize(mspe);
  s.tp = summarize(tp);
  s.tn = summarize(tn);
  s.fp = summarize(fp);
  s.fn = summarize(fn);
  s.mcc = summarize(mcc);
  s.seconds = summarize(sec);
  return s;
}

/// Replicate r draws its data from `Stream(seed).child("replicate", r)` and
/// gives method k the substream `child("method", k)` of that replicate, so
/// results are independent of `jobs` and of which other methods run.
inline BenchReport run_benchmark(const SimConfig& cfg, const std::vector<Method>& methods, int jobs = 1) {
  cfg.validate();
  if (methods.empty()) throw Error(ErrorKind::input, "benchmark needs at least one method");
  BenchReport rep;
  rep.config = cfg;
  rep.methods = methods;
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  rep.complete_rows.assign(reps, 0);
  rep.realized_fraction.assign(reps, 0.0);
  rep.runs.assign(reps, std::vector<ReplicateOutcome>(methods.size()));
  const Stream master(cfg.seed);
  parallel_for(cfg.replicates, jobs, [&](int r) {
    const Stream rs = master.child("replicate", static_cast<std::uint64_t>(r));
    const SimData data = generate_dataset(cfg, rs.child("data"));
    rep.complete_rows[static_cast<std::size_t>(r)] = static_cast<Index>(complete_cases(data.train).size());
    rep.realized_fraction[static_cast<std::size_t>(r)] = data.realized_fraction;
    for (std::size_t k = 0; k < methods.size(); ++k) {
      ReplicateOutcome& o = rep.runs[static_cast<std::size_t>(r)][k];
      try {
        const Stream ms = rs.child("method", static_cast<std::uint64_t>(methods[k]));
        MethodOutput out = run_method(methods[k], data.train, cfg.methods, ms);
        MetricsRow m = compute_metrics(data.beta, out.intercept, out.coefficients, data.test);
        m.seconds = out.seconds;
        o.metrics = m;
        o.selected = std::move(out.selected);
      } catch (const Error& e) {
        o.error = e.what();
        o.exit_code = e.exit_code();
      }
    }
  });
  for (std::size_t k = 0; k < methods.size(); ++k) {
    std::vector<const ReplicateOutcome*> col;
    for (std::size_t r = 0; r < reps; ++r) col.push_back(&rep.runs[r][k]);
    rep.summary.push_back(summarize_method(method_name(methods[k]), col));
  }
  return rep;
}

struct RefitSummary {
  std::string method;
  Summary phi;
  Summary phi_full;
  Summary ratio;
  int empty_selections = 0;
  int infeasible = 0;
};

struct RefitReport {
  SimConfig config;
  std::vector<RefitSummary> summary;
  /// [replicate][method]; empty when the selection was empty or the method failed.
  std::vector<std::vector<std::optional<RefitFmi>>> runs;
};

/// Average fraction of missing information of each method's refitted model,
/// with M = `refit_m` imputations per refit.
inline RefitReport refit_study(const SimConfig& cfg, const std::vector<Method>& methods, int jobs = 1, int refit_m = 5) {
  cfg.validate();
  if (methods.empty()) throw Error(ErrorKind::input, "refit study needs at least one method");
  RefitReport rep;
  rep.config = cfg;
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  rep.runs.assign(reps, std::vector<std::optional<RefitFmi>>(methods.size()));
  std::vector<std::vector<int>> status(reps, std::vector<int>(methods.size(), 0));  // 1 empty, 2 failed
  const Stream master(cfg.seed);
  const MiceOptions mice{.m = refit_m, .n_iter = cfg.methods.n_iter};
  parallel_for(cfg.replicates, jobs, [&](int r) {
    const Stream rs = master.child("replicate", static_cast<std::uint64_t>(r));
    const SimData data = generate_dataset(cfg, rs.child("data"));
    for (std::size_t k = 0; k < methods.size(); ++k) {
      try {
        const Stream ms = rs.child("method", static_cast<std::uint64_t>(methods[k]));
        MethodOutput out = run_method(methods[k], data.train, cfg.methods, ms);
        if (out.selected.empty()) {
          status[static_cast<std::size_t>(r)][k] = 1;
          continue;
        }
        rep.runs[static_cast<std::size_t>(r)][k] = refit_fmi(data.train, out.selected, mice, ms.child("refit"));
      } catch (const Error&) {
        status[static_cast<std::size_t>(r)][k] = 2;
      }
    }
  });
  for (std::size_t k = 0; k < methods.size(); ++k) {
    RefitSummary s;
    s.method = method_name(methods[k]);
    std::vector<double> phi, full, ratio;
    for (std::size_t r = 0; r < reps; ++r) {
      if (status[r][k] == 1) ++s.empty_selections;
      if (status[r][k] == 2) ++s.infeasible;
      if (const auto& f = rep.runs[r][k]) {
        phi.push_back(f->phi);
        full.push_back(f->phi_full);
        if (!f->full_model_zero) ratio.push_back(f->ratio);
      }
    }
    s.phi = summarize(phi);
    s.phi_full = summarize(full);
    s.ratio = summarize(ratio);
    rep.summary.push_back(s);
  }
  return rep;
}

}  // namespace mig

#endif  // MIG_SIMBENCH_HPP
