#pragma once

#include <cstddef>

namespace pmlsh {

// Chi-squared distribution machinery built on the regularized incomplete
// gamma function. No external statistics dependency; quantiles are checked
// against standard tables in the tests.

// Regularized lower incomplete gamma P(a, x) and its complement Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// CDF and upper-tail (survival) probability of chi2(m) at x.
double chi2_cdf(double x, unsigned m);
double chi2_upper_tail(double x, unsigned m);

// Upper quantile: the x with chi2_upper_tail(x, m) == alpha, to an absolute
// tolerance of 1e-9. Throws std::domain_error for alpha outside (0, 1).
double chi2_upper_quantile(double alpha, unsigned m);

// Quantile of the standard normal (Acklam's rational approximation,
// |rel err| < 1.2e-9). Used to seed the chi2 quantile search.
double normal_quantile(double p);

}  // namespace pmlsh
