#pragma once

namespace realism::stats {

double normal_cdf(double x);
/// Upper tail 1 - Phi(x), without cancellation for large x.
double normal_sf(double x);
/// Inverse of normal_cdf on (0, 1): rational approximation refined by two Halley steps.
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b), continued fraction evaluated by the modified Lentz method.
double incomplete_beta(double x, double a, double b);

double student_t_cdf(double t, double df);
double student_t_sf(double t, double df);
/// Upper tail of the F distribution.
double f_sf(double f, double df1, double df2);

}  // namespace realism::stats
