#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sso::stats {

// Pairwise (cascade) summation; deterministic and better conditioned than a
// running sum for long accumulations.
double pairwise_sum(std::span<const double> values);

inline double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

// Upper regularized incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// Survival function of the chi-square distribution: P(X > stat | df).
double chi_square_sf(double stat, int df);

// Pearson chi-square test of `counts` against a uniform distribution over the
// observed categories. Returns the p-value.
double chi_square_uniform_pvalue(std::span<const long long> counts);

}  // namespace sso::stats
