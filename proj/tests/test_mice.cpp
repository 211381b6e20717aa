#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "helpers.hpp"
#include "mig/mice.hpp"

namespace {

mig::Dataset noisy_instance(std::uint64_t seed, double rate, double poison = std::numeric_limits<double>::quiet_NaN()) {
  std::mt19937_64 eng(seed);
  const Eigen::MatrixXd x = testing_util::gaussian(60, 4, eng);
  const Eigen::VectorXd y = x.col(0) - x.col(2) + testing_util::gaussian(60, eng);
  return testing_util::random_mask(y, x, rate, eng, poison);
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(Mice, ObservedCellsAreCopiedBitExactly) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const mig::Dataset ds = noisy_instance(seed, 0.15);
    const mig::IndexSet cols{0, 1, 2, 3};
    const mig::ImputedSet imp = mig::mice_impute(ds, cols, {}, mig::Stream(seed));
    ASSERT_EQ(imp.completed.size(), 5u);
    for (const auto& c : imp.completed) {
      ASSERT_TRUE(c.allFinite());
      for (Eigen::Index i = 0; i < ds.n(); ++i)
        for (Eigen::Index j = 0; j < 4; ++j)
          if (!ds.missing(i, j)) { EXPECT_TRUE(same_bits(c(i, j), ds.at(i, j))); }
    }
  }
}

TEST(Mice, OnlyMaskedCellsDiffer) {
  const mig::Dataset ds = noisy_instance(2, 0.1);
  const mig::ImputedSet imp = mig::mice_impute(ds, {0, 1, 2, 3}, {}, mig::Stream(9));
  int differing_masked = 0;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      bool differs = false;
      for (int m = 1; m < imp.m; ++m) differs |= imp.completed[m](i, j) != imp.completed[0](i, j);
      if (ds.missing(i, j)) differing_masked += differs;
      else EXPECT_FALSE(differs);
    }
  EXPECT_EQ(differing_masked, ds.missing_count());
}

TEST(Mice, SingleMaskedCellVariesAcrossImputations) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 eng(seed);
    Eigen::MatrixXd x = testing_util::gaussian(40, 3, eng);
    const Eigen::VectorXd y = x.rowwise().sum() + testing_util::gaussian(40, eng);
    mig::MaskMatrix mask = mig::MaskMatrix::Zero(40, 3);
    mask(7, 1) = 1;
    x(7, 1) = std::numeric_limits<double>::quiet_NaN();
    const mig::Dataset ds(y, x, mask);
    const mig::ImputedSet imp = mig::mice_impute(ds, {0, 1, 2}, {}, mig::Stream(seed + 1000));
    Eigen::VectorXd v(imp.m);
    for (int m = 0; m < imp.m; ++m) v(m) = imp.completed[m](7, 1);
    const double var = (v.array() - v.mean()).square().sum() / (imp.m - 1);
    EXPECT_GT(var, 0.0) << "seed " << seed;
  }
}

TEST(Mice, NoMaskedCellsGivesIdenticalCopies) {
  std::mt19937_64 eng(5);
  const Eigen::MatrixXd x = testing_util::gaussian(20, 3, eng);
  const mig::Dataset ds = mig::Dataset::complete(testing_util::gaussian(20, eng), x);
  const mig::ImputedSet imp = mig::mice_impute(ds, {2, 0}, {}, mig::Stream(1));
  EXPECT_EQ(imp.columns, (mig::IndexSet{0, 2}));
  EXPECT_TRUE(imp.visit_order.empty());
  for (const auto& c : imp.completed) {
    EXPECT_EQ(c.col(0), x.col(0));
    EXPECT_EQ(c.col(1), x.col(2));
  }
  const Eigen::MatrixXd sub = imp.submatrix(0, {2, 0});
  EXPECT_EQ(sub.col(0), x.col(2));
}

TEST(Mice, DeterministicRelationshipIsRecovered) {
  std::mt19937_64 eng(77);
  Eigen::MatrixXd x(50, 2);
  x.col(0) = testing_util::gaussian(50, eng);
  x.col(1) = 3.0 * x.col(0);
  const Eigen::VectorXd y = x.col(0) + testing_util::gaussian(50, eng);
  mig::MaskMatrix mask = mig::MaskMatrix::Zero(50, 2);
  mask(11, 1) = 1;
  const double truth = x(11, 1);
  x(11, 1) = 1e6;
  const mig::ImputedSet imp = mig::mice_impute(mig::Dataset(y, x, mask), {0, 1}, {}, mig::Stream(3));
  for (int m = 0; m < imp.m; ++m) EXPECT_NEAR(imp.completed[m](11, 1), truth, 1e-2);
}

TEST(Mice, DeterministicForFixedSeed) {
  const mig::Dataset ds = noisy_instance(4, 0.2);
  const auto a = mig::mice_impute(ds, {0, 1, 2, 3}, {}, mig::Stream(42));
  const auto b = mig::mice_impute(ds, {3, 2, 1, 0}, {}, mig::Stream(42));
  const auto c = mig::mice_impute(ds, {0, 1, 2, 3}, {}, mig::Stream(43));
  for (int m = 0; m < a.m; ++m) {
    EXPECT_EQ(a.completed[m], b.completed[m]);
    EXPECT_NE(a.completed[m], c.completed[m]);
  }
  EXPECT_EQ(a.seed, mig::Stream(42).key());
}

TEST(Mice, VisitOrderFollowsMissingCount) {
  const mig::Dataset ds = noisy_instance(8, 0.2);
  const auto imp = mig::mice_impute(ds, {0, 1, 2, 3}, {}, mig::Stream(1));
  for (std::size_t v = 1; v < imp.visit_order.size(); ++v)
    EXPECT_LE(ds.missing_count(imp.visit_order[v - 1]), ds.missing_count(imp.visit_order[v]));
}

TEST(Mice, MaskedValuesNeverLeak) {
  const mig::Dataset ds = noisy_instance(6, 0.2, 1e9);
  const auto imp = mig::mice_impute(ds, {0, 1, 2, 3}, {}, mig::Stream(6));
  for (const auto& c : imp.completed) EXPECT_LT(c.cwiseAbs().maxCoeff(), 100.0);
}

TEST(Mice, EntirelyMissingColumnIsUnimputable) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 2);
  mig::MaskMatrix mask = mig::MaskMatrix::Zero(10, 2);
  mask.col(1).setOnes();
  const mig::Dataset ds(Eigen::VectorXd::Random(10), x, mask);
  try {
    mig::mice_impute(ds, {0, 1}, {}, mig::Stream(1));
    FAIL();
  } catch (const mig::UnimputableColumn& e) {
    EXPECT_EQ(e.column(), 1);
  }
  EXPECT_NO_THROW(mig::mice_impute(ds, {0}, {}, mig::Stream(1)));
}

TEST(Mice, FewObservedRowsStillImputes) {
  std::mt19937_64 eng(31);
  Eigen::MatrixXd x = testing_util::gaussian(12, 6, eng);
  const Eigen::VectorXd y = testing_util::gaussian(12, eng);
  mig::MaskMatrix mask = mig::MaskMatrix::Zero(12, 6);
  for (int i = 0; i < 8; ++i) mask(i, 0) = 1;
  const mig::Dataset ds(y, x, mask);
  const auto imp = mig::mice_impute(ds, ds.all_columns(), {}, mig::Stream(2));
  for (const auto& c : imp.completed) EXPECT_TRUE(c.allFinite());
}
