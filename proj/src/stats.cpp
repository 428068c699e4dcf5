#include "isgd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace isgd {

namespace {

double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_continued_fraction(double a, double x) {
    // Modified Lentz evaluation of the continued fraction for Q(a, x).
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace

double regularized_gamma_p(double a, double x) {
    if (!(a > 0)) throw std::invalid_argument("regularized_gamma_p: a must be positive");
    if (x < 0) throw std::invalid_argument("regularized_gamma_p: x must be nonnegative");
    if (x == 0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_continued_fraction(a, x);
}

double chisq_cdf(double x, int dof) {
    if (dof < 1) throw std::invalid_argument("chisq_cdf: dof must be >= 1");
    if (x <= 0) return 0.0;
    return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double kolmogorov_q(double t) {
    if (t <= 0) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * t * t);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

KsResult ks_against_chisq(const std::vector<double>& samples, int dof) {
    if (samples.empty()) throw std::invalid_argument("ks_against_chisq: no samples");
    if (dof < 1) throw std::invalid_argument("ks_against_chisq: dof must be >= 1");

    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());

    KsResult result;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double cdf = chisq_cdf(sorted[i], dof);
        const double upper = (static_cast<double>(i) + 1.0) / n - cdf;
        const double lower = cdf - static_cast<double>(i) / n;
        result.d = std::max({result.d, upper, lower});
    }
    const double sn = std::sqrt(n);
    result.pvalue = kolmogorov_q((sn + 0.12 + 0.11 / sn) * result.d);
    return result;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: no values");
    if (q < 0 || q > 1) throw std::invalid_argument("quantile: q must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * (static_cast<double>(values.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double w = h - static_cast<double>(lo);
    return (1.0 - w) * values[lo] + w * values[hi];
}

} // namespace isgd
