#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/beta.hpp>

namespace reverie::stats {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class RankDeficient : public StatsError { using StatsError::StatsError; };
class TooFewRows : public StatsError { using StatsError::StatsError; };
class DegenerateData : public StatsError { using StatsError::StatsError; };
class TooFewGroups : public StatsError { using StatsError::StatsError; };
class SingularDesign : public StatsError { using StatsError::StatsError; };
class NonConvergence : public StatsError { using StatsError::StatsError; };
class WrongItemCount : public StatsError { using StatsError::StatsError; };
class OutOfRange : public StatsError { using StatsError::StatsError; };

/// P(T > |t|) * 2 for Student's t with `dof` degrees of freedom.
/// I_{v/(v+t^2)}(v/2, 1/2) is exactly the two-sided tail.
inline double t_two_tailed_p(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("dof must be positive");
  if (std::isinf(t)) return 0.0;
  if (std::isnan(t)) return 1.0;
  return boost::math::ibeta(0.5 * dof, 0.5, dof / (dof + t * t));
}

inline double t_cdf(double t, double dof) {
  const double tail = 0.5 * t_two_tailed_p(t, dof);
  return t < 0.0 ? tail : 1.0 - tail;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double z_two_tailed_p(double z) {
  if (std::isnan(z)) return 1.0;
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

}  // namespace reverie::stats
