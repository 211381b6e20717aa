#ifndef MIG_METHODS_HPP
#define MIG_METHODS_HPP

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mig/baselines.hpp"
#include "mig/errors.hpp"
#include "mig/mig.hpp"

namespace mig {

enum class Method {
  ldls,
  mils,
  ld_lasso_cv,
  mi_lasso_s1,
  mi_lasso_s2,
  mi_lasso_s3,
  mi_stacked,
  mig_1,
  mig_2,
  mig_3,
  mignorm_1,
  mignorm_2,
  mignorm_3,
};

inline constexpr std::array<Method, 13> all_methods{
    Method::ldls,      Method::mils,      Method::ld_lasso_cv, Method::mi_lasso_s1, Method::mi_lasso_s2,
    Method::mi_lasso_s3, Method::mi_stacked, Method::mig_1,     Method::mig_2,       Method::mig_3,
    Method::mignorm_1, Method::mignorm_2, Method::mignorm_3};

inline std::string method_name(Method m) {
  switch (m) {
    case Method::ldls: return "ldls";
    case Method::mils: return "mils";
    case Method::ld_lasso_cv: return "ld-lasso-cv";
    case Method::mi_lasso_s1: return "mi-lasso-s1";
    case Method::mi_lasso_s2: return "mi-lasso-s2";
    case Method::mi_lasso_s3: return "mi-lasso-s3";
    case Method::mi_stacked: return "mi-stacked";
    case Method::mig_1: return "mig-1";
    case Method::mig_2: return "mig-2";
    case Method::mig_3: return "mig-3";
    case Method::mignorm_1: return "mignorm-1";
    case Method::mignorm_2: return "mignorm-2";
    case Method::mignorm_3: return "mignorm-3";
  }
  return "?";
}

inline std::string method_names_joined() {
  std::string s;
  for (Method m : all_methods) s += (s.empty() ? "" : ", ") + method_name(m);
  return s;
}

inline Method parse_method(std::string_view name) {
  for (Method m : all_methods)
    if (method_name(m) == name) return m;
  throw Error(ErrorKind::input, "unknown method '" + std::string(name) + "'; valid methods: " + method_names_joined());
}

inline bool is_mig(Method m) {
  switch (m) {
    case Method::mig_1: case Method::mig_2: case Method::mig_3:
    case Method::mignorm_1: case Method::mignorm_2: case Method::mignorm_3:
      return true;
    default:
      return false;
  }
}

inline PoolingRule parse_rule(std::string_view s) {
  if (s == "vote") return PoolingRule::vote;
  if (s == "avg") return PoolingRule::average_gradient;
  if (s == "pooled") return PoolingRule::pooled_coefficients;
  throw Error(ErrorKind::input, "unknown rule '" + std::string(s) + "'; valid rules: vote, avg, pooled");
}

/// Settings shared by every method.
struct MethodSettings {
  int m = 5;
  int n_iter = 5;
  int cv_folds = 10;
  double alpha = 0.05;
  SupportMode support = SupportMode::all_remaining;
  /// Lasso penalty from the one-standard-error rule (false: CV minimum).
  bool lasso_one_se = true;
  /// Stacked lasso: keep the M copies of an observation in one CV fold.
  bool stacked_group_folds = false;
};

struct MethodOutput {
  std::string label;
  IndexSet selected;
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  double seconds = 0.0;
  std::optional<SelectionTrace> trace;
};

inline MigConfig mig_config_for(Method method, const MethodSettings& s, std::uint64_t seed) {
  MigConfig cfg;
  cfg.m = s.m;
  cfg.n_iter = s.n_iter;
  cfg.cv_folds = s.cv_folds;
  cfg.alpha = s.alpha;
  cfg.seed = seed;
  cfg.support = s.support;
  cfg.lasso_one_se = s.lasso_one_se;
  switch (method) {
    case Method::mig_1: case Method::mignorm_1: cfg.rule = PoolingRule::vote; break;
    case Method::mig_2: case Method::mignorm_2: cfg.rule = PoolingRule::average_gradient; break;
    case Method::mig_3: case Method::mignorm_3: cfg.rule = PoolingRule::pooled_coefficients; break;
    default: throw Error(ErrorKind::input, method_name(method) + " is not a MiG variant");
  }
  cfg.normalize = method == Method::mignorm_1 || method == Method::mignorm_2 || method == Method::mignorm_3;
  return cfg;
}

/// Runs one selector on `ds`. All randomness descends from `stream`.
inline MethodOutput run_method(Method method, const Dataset& ds, const MethodSettings& s, Stream stream) {
  const MiceOptions mice{.m = s.m, .n_iter = s.n_iter};
  LassoCvOptions lasso;
  lasso.folds = s.cv_folds;
  lasso.one_se = s.lasso_one_se;
  auto from = [](BaselineResult r) {
    return MethodOutput{std::move(r.label), std::move(r.selected), r.intercept, std::move(r.coefficients), r.seconds, {}};
  };
  switch (method) {
    case Method::ldls: return from(ldls(ds, s.alpha));
    case Method::mils: return from(mils(ds, mice, s.alpha, stream));
    case Method::ld_lasso_cv: return from(ld_lasso_cv(ds, lasso, stream));
    case Method::mi_lasso_s1: return from(mi_lasso_separate(ds, mice, lasso, SupportVote::any, stream));
    case Method::mi_lasso_s2: return from(mi_lasso_separate(ds, mice, lasso, SupportVote::half, stream));
    case Method::mi_lasso_s3: return from(mi_lasso_separate(ds, mice, lasso, SupportVote::all, stream));
    case Method::mi_stacked: return from(mi_stacked(ds, mice, lasso, stream, s.stacked_group_folds));
    default: break;
  }
  SelectionTrace trace = mig_run(ds, mig_config_for(method, s, stream.key()));
  MethodOutput out{method_name(method), trace.selected, trace.intercept, trace.coefficients, trace.seconds, {}};
  out.trace = std::move(trace);
  return out;
}

}  // namespace mig

#endif  // MIG_METHODS_HPP
