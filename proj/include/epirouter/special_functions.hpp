#pragma once

namespace epirouter {

// Standard normal CDF, accurate to ~1e-15 via the complementary error
// function.
double normal_cdf(double x);

// Inverse standard normal CDF on (0, 1). Rational initial guess refined by
// one Halley step; absolute error below 1e-13 across the open interval.
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b), a,b > 0, x in [0, 1].
// Continued-fraction evaluation (modified Lentz), relative error ~1e-14.
double regularized_incomplete_beta(double a, double b, double x);

// Regularized upper incomplete gamma Q(a, x) = Γ(a, x)/Γ(a), a > 0, x >= 0.
// Series for x < a+1, continued fraction otherwise.
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-square distribution with 1 degree of freedom.
// Equals Q(1/2, x/2); the erfc closed form is kept out of the implementation
// so tests can use it as an independent cross-check.
double chi_square1_sf(double x);

}  // namespace epirouter
