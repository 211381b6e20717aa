#ifndef MIG_DATASET_HPP
#define MIG_DATASET_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mig/errors.hpp"

namespace mig {

using Index = Eigen::Index;
/// Ascending, duplicate-free row or column indices (0-based).
using IndexSet = std::vector<Index>;
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Response, covariates and missingness mask.
///
/// `mask(i, j) != 0` marks x_ij as missing; whatever value X holds there is
/// undefined and no estimator in this library reads it. The response is always
/// fully observed.
class Dataset {
 public:
  Dataset() = default;

  Dataset(Eigen::VectorXd y, Eigen::MatrixXd x, MaskMatrix mask, std::vector<std::string> names = {},
          std::string response_name = "y")
      : y_(std::move(y)), x_(std::move(x)), mask_(std::move(mask)), names_(std::move(names)),
        response_name_(std::move(response_name)) {
    if (x_.rows() < 1 || x_.cols() < 1) throw Error(ErrorKind::input, "dataset needs n >= 1 and p >= 1");
    if (y_.size() != x_.rows()) throw Error(ErrorKind::input, "response length differs from covariate rows");
    if (mask_.rows() != x_.rows() || mask_.cols() != x_.cols())
      throw Error(ErrorKind::input, "mask dimensions differ from covariate matrix");
    if (!y_.allFinite()) throw Error(ErrorKind::data_contract, "response contains missing or non-finite values");
    if (names_.empty()) {
      for (Index j = 0; j < x_.cols(); ++j) names_.push_back("X" + std::to_string(j + 1));
    }
    if (static_cast<Index>(names_.size()) != x_.cols())
      throw Error(ErrorKind::input, "column name count differs from covariate columns");
    for (Index j = 0; j < x_.cols(); ++j)
      for (Index i = 0; i < x_.rows(); ++i)
        if (!mask_(i, j) && !std::isfinite(x_(i, j)))
          throw Error(ErrorKind::input, "non-finite observed value in column '" + names_[j] + "'");
  }

  /// Fully observed dataset.
  static Dataset complete(Eigen::VectorXd y, Eigen::MatrixXd x, std::vector<std::string> names = {}) {
    MaskMatrix mask = MaskMatrix::Zero(x.rows(), x.cols());
    return Dataset(std::move(y), std::move(x), std::move(mask), std::move(names));
  }

  Index n() const { return x_.rows(); }
  Index p() const { return x_.cols(); }
  const Eigen::VectorXd& y() const { return y_; }
  /// Raw storage; masked cells hold unspecified values.
  const Eigen::MatrixXd& x_raw() const { return x_; }
  const MaskMatrix& mask() const { return mask_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& response_name() const { return response_name_; }

  bool missing(Index i, Index j) const { return mask_(i, j) != 0; }
  /// Observed value; callers must check `missing` first.
  double at(Index i, Index j) const { return x_(i, j); }

  Index missing_count() const {
    Index c = 0;
    for (Index j = 0; j < p(); ++j) c += missing_count(j);
    return c;
  }
  Index missing_count(Index j) const {
    Index c = 0;
    for (Index i = 0; i < n(); ++i) c += mask_(i, j) ? 1 : 0;
    return c;
  }

  IndexSet all_columns() const {
    IndexSet c(static_cast<std::size_t>(p()));
    for (Index j = 0; j < p(); ++j) c[static_cast<std::size_t>(j)] = j;
    return c;
  }

  /// Dense rows x cols block. Every requested cell must be observed.
  Eigen::MatrixXd observed_block(const IndexSet& rows, const IndexSet& cols) const {
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (mask_(rows[r], cols[c])) throw Error(ErrorKind::numerical, "observed_block touched a masked cell");
        out(static_cast<Index>(r), static_cast<Index>(c)) = x_(rows[r], cols[c]);
      }
    return out;
  }

  Eigen::VectorXd y_rows(const IndexSet& rows) const {
    Eigen::VectorXd out(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = y_(rows[r]);
    return out;
  }

  /// Same dataset with X and y replaced (mask, names kept).
  Dataset with_values(Eigen::VectorXd y, Eigen::MatrixXd x) const {
    return Dataset(std::move(y), std::move(x), mask_, names_, response_name_);
  }

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd x_;
  MaskMatrix mask_;
  std::vector<std::string> names_;
  std::string response_name_ = "y";
};

/// Rows with no masked cell in any column of `cols`. Empty `cols` gives all rows.
inline IndexSet rows_observed_on(const Dataset& ds, const IndexSet& cols) {
  IndexSet rows;
  for (Index i = 0; i < ds.n(); ++i) {
    bool ok = std::none_of(cols.begin(), cols.end(), [&](Index j) { return ds.missing(i, j); });
    if (ok) rows.push_back(i);
  }
  return rows;
}

inline IndexSet complete_cases(const Dataset& ds) { return rows_observed_on(ds, ds.all_columns()); }

/// Per-column location and scale from observed entries (sample sd, divisor n_obs - 1).
struct StandardizeParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  double y_mean = 0.0;
  double y_sd = 1.0;
  bool include_y = false;
};

/// Mean and sample sd of observed entries of column j; {mean, sd, distinct>=2}.
inline std::tuple<double, double, bool> observed_moments(const Dataset& ds, Index j) {
  double sum = 0.0;
  Index count = 0;
  bool distinct = false;
  double first = 0.0;
  for (Index i = 0; i < ds.n(); ++i) {
    if (ds.missing(i, j)) continue;
    double v = ds.at(i, j);
    if (count == 0) first = v;
    else if (v != first) distinct = true;
    sum += v;
    ++count;
  }
  if (count == 0) return {0.0, 0.0, false};
  double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (Index i = 0; i < ds.n(); ++i)
    if (!ds.missing(i, j)) ss += (ds.at(i, j) - mean) * (ds.at(i, j) - mean);
  double sd = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
  return {mean, sd, distinct};
}

/// Centers and scales every covariate (and optionally y) over observed entries.
/// Masked cells stay masked and are left untouched.
inline std::pair<Dataset, StandardizeParams> standardize(const Dataset& ds, bool include_y) {
  StandardizeParams params;
  params.include_y = include_y;
  params.mean.resize(ds.p());
  params.sd.resize(ds.p());
  Eigen::MatrixXd x = ds.x_raw();
  for (Index j = 0; j < ds.p(); ++j) {
    auto [mean, sd, distinct] = observed_moments(ds, j);
    if (!distinct || !(sd > 0.0)) throw DegenerateColumn(j, ds.names()[static_cast<std::size_t>(j)]);
    params.mean(j) = mean;
    params.sd(j) = sd;
    for (Index i = 0; i < ds.n(); ++i)
      if (!ds.missing(i, j)) x(i, j) = (ds.at(i, j) - mean) / sd;
  }
  Eigen::VectorXd y = ds.y();
  if (include_y) {
    const double n = static_cast<double>(ds.n());
    params.y_mean = y.mean();
    double var = ds.n() > 1 ? (y.array() - params.y_mean).square().sum() / (n - 1.0) : 0.0;
    if (!(var > 0.0)) throw DegenerateColumn(-1, ds.response_name());
    params.y_sd = std::sqrt(var);
    y = (y.array() - params.y_mean) / params.y_sd;
  }
  return {ds.with_values(std::move(y), std::move(x)), params};
}

/// Maps coefficients fitted on standardized data back to the original scale.
/// `slopes` covers all p columns.
inline std::pair<double, Eigen::VectorXd> destandardize(const StandardizeParams& params, double intercept,
                                                       const Eigen::VectorXd& slopes) {
  Eigen::VectorXd out(slopes.size());
  double y_sd = params.include_y ? params.y_sd : 1.0;
  double y_mean = params.include_y ? params.y_mean : 0.0;
  double b0 = y_mean + y_sd * intercept;
  for (Index j = 0; j < slopes.size(); ++j) {
    out(j) = slopes(j) * y_sd / params.sd(j);
    b0 -= out(j) * params.mean(j);
  }
  return {b0, out};
}

inline IndexSet set_difference(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline IndexSet with_index(IndexSet s, Index v) {
  s.insert(std::upper_bound(s.begin(), s.end(), v), v);
  return s;
}

}  // namespace mig

#endif  // MIG_DATASET_HPP
