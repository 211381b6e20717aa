#ifndef MIG_TESTS_HELPERS_HPP
#define MIG_TESTS_HELPERS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>

#include "mig/dataset.hpp"

namespace testing_util {

inline Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index p, std::mt19937_64& eng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = z(eng);
  return x;
}

inline Eigen::VectorXd gaussian(Eigen::Index n, std::mt19937_64& eng) { return gaussian(n, 1, eng).col(0); }

/// Masks each cell of the listed columns with probability `rate`, keeping at
/// least two observed cells per column. Masked cells get `poison`.
inline mig::Dataset random_mask(const Eigen::VectorXd& y, Eigen::MatrixXd x, double rate, std::mt19937_64& eng,
                                double poison = std::numeric_limits<double>::quiet_NaN()) {
  std::bernoulli_distribution miss(rate);
  mig::MaskMatrix mask = mig::MaskMatrix::Zero(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::Index observed = x.rows();
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (observed > 2 && miss(eng)) {
        mask(i, j) = 1;
        x(i, j) = poison;
        --observed;
      }
  }
  return mig::Dataset(y, std::move(x), std::move(mask));
}

}  // namespace testing_util

#endif  // MIG_TESTS_HELPERS_HPP
