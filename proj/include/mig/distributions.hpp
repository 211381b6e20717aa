#ifndef MIG_DISTRIBUTIONS_HPP
#define MIG_DISTRIBUTIONS_HPP

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

namespace mig::dist {

/// P(|T| >= |t|) for Student t with `df` degrees of freedom; infinite df is the normal limit.
inline double t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  const double a = std::fabs(t);
  if (!std::isfinite(df)) return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), a));
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), a));
}

/// P(F >= f) for F(df1, df2).
inline double f_upper_tail(double f, double df1, double df2) {
  if (std::isnan(f) || f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  if (!std::isfinite(df2)) {
    // df1 * F -> chi-square(df1)
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df1), f * df1));
  }
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f(df1, df2), f));
}

}  // namespace mig::dist

#endif  // MIG_DISTRIBUTIONS_HPP
