#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "mig/mig.hpp"

namespace {

// Four rows, column 0 imputed (row 2 masked), columns 1 and 2 observed candidates.
struct HandInstance {
  mig::Dataset ds;
  mig::ImputedSet imp;
  std::vector<mig::OlsFit> fits;
};

HandInstance hand_instance() {
  Eigen::MatrixXd x(4, 3);
  x << 1.0, 2.0, -1.0,
       2.0, 0.5, 3.0,
       0.0, -1.0, 1.5,
       4.0, 1.0, -2.0;
  mig::MaskMatrix mask = mig::MaskMatrix::Zero(4, 3);
  mask(2, 0) = 1;
  const Eigen::VectorXd y = (Eigen::VectorXd(4) << 1.0, 3.0, 2.0, 6.5).finished();
  HandInstance h{mig::Dataset(y, x, mask), {}, {}};
  h.imp.columns = {0};
  h.imp.m = 2;
  Eigen::MatrixXd a(4, 1), b(4, 1);
  a << 1.0, 2.0, 0.5, 4.0;
  b << 1.0, 2.0, 3.5, 4.0;
  h.imp.completed = {a, b};
  for (const auto& c : h.imp.completed) h.fits.push_back(mig::fit_ols(c, y));
  return h;
}

mig::Dataset strong_signal(std::uint64_t seed, Eigen::Index n = 200, Eigen::Index noise = 10) {
  std::mt19937_64 eng(seed);
  const Eigen::MatrixXd x = testing_util::gaussian(n, noise + 2, eng);
  const Eigen::VectorXd y = 4.0 * x.col(0) - 3.0 * x.col(1) + testing_util::gaussian(n, eng);
  return mig::Dataset::complete(y, x);
}

}  // namespace

TEST(Gradients, PerImputationMatchesSummationOracle) {
  const HandInstance h = hand_instance();
  const mig::IndexSet cand{1, 2}, rows{0, 1, 2, 3};
  const Eigen::MatrixXd g = mig::gradients_per_imputation(h.imp, h.ds, h.fits, {0}, cand, rows);
  ASSERT_EQ(g.rows(), 2);
  ASSERT_EQ(g.cols(), 2);
  for (int m = 0; m < 2; ++m)
    for (int c = 0; c < 2; ++c) {
      double s = 0.0;
      for (int i = 0; i < 4; ++i) {
        const double fitted = h.fits[m].coefficients(0) + h.fits[m].coefficients(1) * h.imp.completed[m](i, 0);
        s += h.ds.at(i, cand[c]) * (h.ds.y()(i) - fitted);
      }
      EXPECT_NEAR(g(m, c), s, 1e-12);
    }
}

TEST(Gradients, PooledMatchesSummationOracle) {
  const HandInstance h = hand_instance();
  const mig::IndexSet cand{1, 2}, rows{0, 1, 3};
  const Eigen::VectorXd g = mig::gradient_pooled(h.imp, h.ds, h.fits, {0}, cand, rows);
  const double b0 = (h.fits[0].coefficients(0) + h.fits[1].coefficients(0)) / 2.0;
  for (int c = 0; c < 2; ++c) {
    double s = 0.0;
    for (int i : {0, 1, 3}) {
      double avg = 0.0;
      for (int m = 0; m < 2; ++m) avg += h.fits[m].coefficients(1) * h.imp.completed[m](i, 0);
      s += h.ds.at(i, cand[c]) * (h.ds.y()(i) - b0 - avg / 2.0);
    }
    EXPECT_NEAR(g(c), s, 1e-12);
  }
}

TEST(Gradients, EmptyActiveSetGivesCenteredCrossProducts) {
  const mig::Dataset ds = strong_signal(1, 30, 2);
  mig::ImputedSet imp = mig::mice_impute(ds, {}, {}, mig::Stream(1));
  const auto fits = mig::fit_imputations(imp, ds.y(), {});
  const mig::IndexSet cand = ds.all_columns(), rows = mig::s_of_r(ds, cand);
  const Eigen::MatrixXd g = mig::gradients_per_imputation(imp, ds, fits, {}, cand, rows);
  const Eigen::VectorXd centered = ds.y().array() - ds.y().mean();
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (int m = 0; m < imp.m; ++m) EXPECT_NEAR(g(m, c), ds.x_raw().col(c).dot(centered), 1e-10);
  }
  // Identical imputations collapse the pooled gradient onto any row.
  const Eigen::VectorXd pooled = mig::gradient_pooled(imp, ds, fits, {}, cand, rows);
  EXPECT_LT((pooled - g.row(0).transpose()).norm(), 1e-10);
}

TEST(Gradients, OrthogonalCandidateHasZeroGradient) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, -1, 1, 1, -1, -1, -1;
  const Eigen::VectorXd y = (Eigen::VectorXd(4) << 2, 0, 2, 0).finished();
  const mig::Dataset ds = mig::Dataset::complete(y, x);
  const mig::ImputedSet imp = mig::mice_impute(ds, {0}, {}, mig::Stream(1));
  const auto fits = mig::fit_imputations(imp, y, {0});
  const Eigen::MatrixXd g = mig::gradients_per_imputation(imp, ds, fits, {0}, {1}, {0, 1, 2, 3});
  EXPECT_NEAR(g.cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(Gradients, EmptySupportIsRejected) {
  const HandInstance h = hand_instance();
  EXPECT_THROW(mig::gradients_per_imputation(h.imp, h.ds, h.fits, {0}, {1}, {}), mig::Error);
}

TEST(SelectNext, UniqueModeWins) {
  // Nominations per row: 0, 0, 1, 0, 2.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(5, 3);
  g(0, 0) = 5; g(1, 0) = -4; g(2, 1) = 3; g(3, 0) = 1; g(4, 2) = 9;
  const auto [pos, diag] = mig::select_next(mig::PoolingRule::vote, g, Eigen::VectorXd::Zero(3), mig::Stream(1));
  EXPECT_EQ(pos, 0);
  EXPECT_EQ(diag.votes, (std::vector<int>{3, 1, 1}));
  EXPECT_FALSE(diag.tie_broken);
}

TEST(SelectNext, TiedModesAreBrokenBySeed) {
  // Nominations per row: 0, 0, 1, 1, 2.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(5, 3);
  g(0, 0) = 5; g(1, 0) = 4; g(2, 1) = 3; g(3, 1) = -2; g(4, 2) = 9;
  std::set<mig::Index> seen;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const auto [pos, diag] = mig::select_next(mig::PoolingRule::vote, g, Eigen::VectorXd::Zero(3), mig::Stream(s));
    EXPECT_TRUE(pos == 0 || pos == 1);
    EXPECT_TRUE(diag.tie_broken);
    EXPECT_EQ(diag.co_modes, (std::vector<mig::Index>{0, 1}));
    EXPECT_EQ(pos, mig::select_next(mig::PoolingRule::vote, g, Eigen::VectorXd::Zero(3), mig::Stream(s)).first);
    seen.insert(pos);
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(SelectNext, AverageUsesAbsoluteMean) {
  Eigen::MatrixXd g(2, 2);
  g << -5, 4, -7, 4;
  const auto [pos, diag] = mig::select_next(mig::PoolingRule::average_gradient, g, Eigen::VectorXd::Zero(2), mig::Stream(1));
  EXPECT_EQ(pos, 0);
  EXPECT_DOUBLE_EQ(diag.mean_gradient(0), -6.0);
  const Eigen::VectorXd pooled = (Eigen::VectorXd(2) << 1.0, -2.0).finished();
  EXPECT_EQ(mig::select_next(mig::PoolingRule::pooled_coefficients, g, pooled, mig::Stream(1)).first, 1);
  // Scaling every gradient leaves the choice unchanged.
  EXPECT_EQ(mig::select_next(mig::PoolingRule::pooled_coefficients, -3.0 * g, -3.0 * pooled, mig::Stream(1)).first, 1);
}

TEST(SOfR, Examples) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 9);
  mig::MaskMatrix mask = mig::MaskMatrix::Zero(6, 9);
  mask(1, 7) = mask(4, 7) = 1;
  const mig::Dataset ds(Eigen::VectorXd::Random(6), x, mask);
  EXPECT_EQ(mig::s_of_r(ds, ds.all_columns()), mig::complete_cases(ds));
  EXPECT_EQ(mig::s_of_r(ds, {}).size(), 6u);
  EXPECT_EQ(mig::s_of_r(ds, {0, 3, 8}).size(), 6u);
  EXPECT_EQ(mig::s_of_r(ds, {0, 7}), (mig::IndexSet{0, 2, 3, 5}));
}

TEST(MigRun, StrongSignalIsFound) {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    mig::MigConfig cfg;
    cfg.seed = seed;
    const mig::SelectionTrace t = mig::mig_run(strong_signal(seed + 300), cfg);
    const bool has = std::count(t.selected.begin(), t.selected.end(), 0) && std::count(t.selected.begin(), t.selected.end(), 1);
    good += has && t.selected.size() <= 4;
  }
  EXPECT_GE(good, 18);
}

TEST(MigRun, CompleteDataChoicesMatchBruteForce) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 eng(seed);
    const Eigen::MatrixXd x = testing_util::gaussian(60, 8, eng);
    const Eigen::VectorXd y = x.col(0) + 0.6 * x.col(3) - 0.4 * x.col(5) + testing_util::gaussian(60, eng);
    const mig::Dataset ds = mig::Dataset::complete(y, x);
    std::vector<std::vector<mig::Index>> sequences;
    for (auto rule : {mig::PoolingRule::vote, mig::PoolingRule::average_gradient, mig::PoolingRule::pooled_coefficients}) {
      mig::MigConfig cfg;
      cfg.rule = rule;
      cfg.seed = seed;
      const mig::SelectionTrace t = mig::mig_run(ds, cfg);
      std::vector<mig::Index> chosen;
      for (const auto& step : t.steps) {
        Eigen::MatrixXd design(60, static_cast<Eigen::Index>(step.active_before.size()));
        for (std::size_t j = 0; j < step.active_before.size(); ++j) design.col(j) = x.col(step.active_before[j]);
        const Eigen::VectorXd resid = mig::fit_ols(design, y).residuals;
        mig::Index best = -1;
        double best_abs = -1.0;
        for (mig::Index c : step.candidates) {
          const double v = std::fabs(x.col(c).dot(resid));
          if (v > best_abs) best_abs = v, best = c;
        }
        EXPECT_EQ(step.chosen, best);
        EXPECT_EQ(step.support_size, 60);
        chosen.push_back(step.chosen);
      }
      sequences.push_back(chosen);
    }
    EXPECT_EQ(sequences[0], sequences[1]);
    EXPECT_EQ(sequences[1], sequences[2]);
  }
}

TEST(MigRun, TraceInvariantsWithMissingData) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 eng(seed + 40);
    const Eigen::MatrixXd x = testing_util::gaussian(120, 12, eng);
    const Eigen::VectorXd y = 2.0 * x.col(0) + x.col(4) - x.col(7) + testing_util::gaussian(120, eng);
    const mig::Dataset ds = testing_util::random_mask(y, x, 0.03, eng);
    mig::MigConfig cfg;
    cfg.seed = seed;
    const mig::SelectionTrace t = mig::mig_run(ds, cfg);
    std::size_t size = t.initial_active.size();
    for (std::size_t s = 0; s < t.steps.size(); ++s) {
      const auto& step = t.steps[s];
      EXPECT_EQ(step.active_before.size(), size);
      EXPECT_EQ(std::count(step.active_before.begin(), step.active_before.end(), step.chosen), 0);
      EXPECT_LE(step.ftest.p, 1.0);
      if (s + 1 < t.steps.size()) { EXPECT_TRUE(step.accepted); }
      if (step.accepted) ++size;
    }
    EXPECT_EQ(t.active.size(), size);
    if (!t.steps.empty() && !t.steps.back().accepted) {
      EXPECT_EQ(std::count(t.active.begin(), t.active.end(), t.steps.back().chosen), 0);
    }
    for (mig::Index j = 0; j < ds.p(); ++j)
      if (t.coefficients(j) != 0.0) { EXPECT_TRUE(std::count(t.selected.begin(), t.selected.end(), j)); }
    // S(r) never shrinks as candidates leave.
    for (std::size_t s = 1; s < t.steps.size(); ++s)
      if (!t.steps[s].per_candidate_support) { EXPECT_GE(t.steps[s].support_size, t.steps[s - 1].support_size); }
  }
}

TEST(MigRun, Reproducible) {
  std::mt19937_64 eng(9);
  const Eigen::MatrixXd x = testing_util::gaussian(100, 10, eng);
  const Eigen::VectorXd y = x.col(1) - x.col(2) + testing_util::gaussian(100, eng);
  const mig::Dataset ds = testing_util::random_mask(y, x, 0.05, eng);
  mig::MigConfig cfg;
  cfg.rule = mig::PoolingRule::vote;
  cfg.seed = 77;
  const auto a = mig::mig_run(ds, cfg), b = mig::mig_run(ds, cfg);
  EXPECT_EQ(a.active, b.active);
  EXPECT_EQ(a.lasso_set, b.lasso_set);
  EXPECT_EQ(a.coefficients, b.coefficients);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    EXPECT_EQ(a.steps[s].gradients, b.steps[s].gradients);
    EXPECT_EQ(a.steps[s].ftest.f, b.steps[s].ftest.f);
  }
}

TEST(MigRun, NormalizedSelectionIgnoresColumnScale) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 eng(seed + 60);
    Eigen::MatrixXd x = testing_util::gaussian(100, 8, eng);
    const Eigen::VectorXd y = x.col(0) + 0.5 * x.col(3) + testing_util::gaussian(100, eng);
    const mig::Dataset ds = testing_util::random_mask(y, x, 0.03, eng);
    Eigen::MatrixXd scaled = ds.x_raw();
    scaled.col(3) *= 8.0;
    scaled.col(5) *= 0.125;
    const mig::Dataset ds2 = ds.with_values(ds.y(), scaled);
    mig::MigConfig cfg;
    cfg.normalize = true;
    cfg.seed = seed;
    const auto a = mig::mig_run(ds, cfg), b = mig::mig_run(ds2, cfg);
    EXPECT_EQ(a.active, b.active);
    if (!a.active.empty()) {
      const mig::Index j = a.active.front();
      const double factor = j == 3 ? 8.0 : (j == 5 ? 0.125 : 1.0);
      EXPECT_NEAR(a.coefficients(j), b.coefficients(j) * factor, 1e-6 * (1.0 + std::fabs(a.coefficients(j))));
    }
  }
}

TEST(MigRun, EmptyLassoSetStillRuns) {
  int empty_seen = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 eng(seed + 900);
    const Eigen::MatrixXd x = testing_util::gaussian(80, 6, eng);
    const Eigen::VectorXd y = testing_util::gaussian(80, eng);
    mig::MigConfig cfg;
    cfg.seed = seed;
    const auto t = mig::mig_run(testing_util::random_mask(y, x, 0.02, eng), cfg);
    if (t.lasso_set.empty()) {
      ++empty_seen;
      EXPECT_TRUE(t.initial_active.empty());
      EXPECT_FALSE(t.steps.empty());
    }
    EXPECT_TRUE(t.final_fit.has_value());
  }
  EXPECT_GE(empty_seen, 1);
}

TEST(MigRun, NoCompleteCasesIsInfeasible) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(20, 2);
  mig::MaskMatrix mask = mig::MaskMatrix::Zero(20, 2);
  for (int i = 0; i < 20; ++i) mask(i, i % 2) = 1;
  try {
    mig::mig_run(mig::Dataset(Eigen::VectorXd::Random(20), x, mask), {});
    FAIL();
  } catch (const mig::Error& e) {
    EXPECT_EQ(e.kind(), mig::ErrorKind::infeasible);
  }
  mig::MigConfig bad;
  bad.alpha = 1.0;
  EXPECT_THROW(bad.validate(), mig::Error);
  bad.alpha = 0.05;
  bad.m = 1;
  EXPECT_THROW(bad.validate(), mig::Error);
}
