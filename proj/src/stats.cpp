#include "pmlsh/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pmlsh {

namespace {

constexpr int kMaxIter = 500;
constexpr double kEps = 1e-16;

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::domain_error("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::domain_error("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi2_cdf(double x, unsigned m) {
    if (x <= 0.0) return 0.0;
    return gamma_p(0.5 * m, 0.5 * x);
}

double chi2_upper_tail(double x, unsigned m) {
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * m, 0.5 * x);
}

double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::domain_error("normal_quantile: p outside (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double chi2_upper_quantile(double alpha, unsigned m) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::domain_error("chi2_upper_quantile: alpha outside (0,1)");
    }
    if (m < 1) throw std::domain_error("chi2_upper_quantile: m must be >= 1");

    const double md = static_cast<double>(m);
    // Wilson-Hilferty seed.
    const double z = normal_quantile(1.0 - alpha);
    const double h = 2.0 / (9.0 * md);
    double x = md * std::pow(1.0 - h + z * std::sqrt(h), 3.0);
    if (!(x > 0.0)) x = 0.5 / md;

    // Bracket the root of chi2_upper_tail(x) - alpha (decreasing in x).
    double lo = 0.0, hi = x;
    while (chi2_upper_tail(hi, m) > alpha) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e308) break;
    }
    if (lo == 0.0) {
        lo = x;
        while (lo > 1e-300 && chi2_upper_tail(lo, m) < alpha) lo *= 0.5;
        if (chi2_upper_tail(lo, m) < alpha) lo = 0.0;
    }
    if (lo > hi) std::swap(lo, hi);

    // Newton with bisection safeguard on the upper-tail function.
    x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = chi2_upper_tail(x, m) - alpha;
        if (f > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        // pdf of chi2(m) at x
        const double logpdf = (0.5 * md - 1.0) * std::log(x) - 0.5 * x -
                              0.5 * md * std::log(2.0) - std::lgamma(0.5 * md);
        const double pdf = std::exp(logpdf);
        double nx = (pdf > 0.0) ? x + f / pdf : 0.5 * (lo + hi);
        if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
        if (std::fabs(nx - x) < 1e-12 * (1.0 + std::fabs(x)) || hi - lo < 1e-13) {
            x = nx;
            break;
        }
        x = nx;
    }
    return x;
}

}  // namespace pmlsh
