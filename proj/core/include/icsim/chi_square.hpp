#pragma once

namespace icsim {

/// P[X <= x] for X ~ chi-square with `dof` degrees of freedom.
double chi_square_cdf(double x, double dof);

/// Inverse of chi_square_cdf in x.
double chi_square_quantile(double probability, double dof);

}  // namespace icsim
