#pragma once

// Goodness-of-fit statistics used by the validation harness.

#include <cstddef>
#include <functional>
#include <vector>

namespace dcftp {

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::size_t bins = 0;
};

/// Upper tail of chi-square with `dof` degrees of freedom.
double chi_square_sf(double statistic, int dof);

/// Pearson test of counts against probs. Adjacent cells (in the given order) are
/// merged until every expected count reaches min_expected.
ChiSquareResult chi_square_test(const std::vector<long>& counts, const std::vector<double>& probs,
                                double min_expected = 5.0);

/// Same, after regrouping cells along `order` into about n_bins bins of
/// roughly equal expected mass.
ChiSquareResult chi_square_binned(const std::vector<long>& counts, const std::vector<double>& probs,
                                  const std::vector<int>& order, std::size_t n_bins);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Kolmogorov limiting tail Q(t) = 2 sum (-1)^{k-1} exp(-2 k^2 t^2).
double kolmogorov_sf(double t);

/// Asymptotic p-value with the usual small-sample correction.
double ks_p_value(double statistic, double n_effective);

KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace dcftp
