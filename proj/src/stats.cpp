#include "sso/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sso::stats {

namespace {

double pairwise_sum_impl(const double* data, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
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
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return pairwise_sum_impl(values.data(), values.size());
}

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_square_sf(double stat, int df) {
  if (df < 1) throw std::invalid_argument("chi_square_sf: df must be >= 1");
  if (stat <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * stat);
}

double chi_square_uniform_pvalue(std::span<const long long> counts) {
  if (counts.size() < 2) throw std::invalid_argument("chi_square: need >= 2 categories");
  long long total = 0;
  for (long long c : counts) total += c;
  if (total <= 0) throw std::invalid_argument("chi_square: empty sample");
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (long long c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return chi_square_sf(stat, static_cast<int>(counts.size()) - 1);
}

}  // namespace sso::stats
