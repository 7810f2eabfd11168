#include "icsim/chi_square.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "icsim/error.hpp"

namespace icsim {

double chi_square_cdf(double x, double dof) {
  if (!(dof > 0.0)) throw ConfigError("chi-square dof must be > 0");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(dof / 2.0, x / 2.0);
}

double chi_square_quantile(double probability, double dof) {
  if (!(dof > 0.0)) throw ConfigError("chi-square dof must be > 0");
  if (!(probability >= 0.0 && probability < 1.0)) {
    throw ConfigError("chi-square quantile probability must lie in [0, 1)");
  }
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof),
                               probability);
}

}  // namespace icsim
