#include "dcftp/stats.hpp"

#include "dcftp/error.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

namespace dcftp {

double chi_square_sf(double statistic, int dof) {
  if (dof < 1) throw InvalidArgument("chi-square needs at least one degree of freedom");
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

namespace {

ChiSquareResult pearson(const std::vector<double>& observed, const std::vector<double>& expected) {
  ChiSquareResult r;
  r.bins = observed.size();
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    r.statistic += d * d / expected[i];
  }
  r.dof = static_cast<int>(observed.size()) - 1;
  r.p_value = r.dof >= 1 ? chi_square_sf(r.statistic, r.dof) : 1.0;
  return r;
}

}  // namespace

ChiSquareResult chi_square_test(const std::vector<long>& counts, const std::vector<double>& probs,
                                double min_expected) {
  if (counts.size() != probs.size()) throw InvalidArgument("counts and probabilities differ in length");
  double total = 0.0;
  for (long c : counts) total += static_cast<double>(c);
  if (total <= 0.0) throw InvalidArgument("no observations");
  // Any observation in a zero-probability cell is decisive, merged or not.
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (probs[i] <= 0.0 && counts[i] > 0) return {INFINITY, static_cast<int>(counts.size()) - 1, 0.0, counts.size()};

  std::vector<double> obs, expd;
  double o = 0.0, e = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    o += static_cast<double>(counts[i]);
    e += probs[i] * total;
    if (e >= min_expected) {
      obs.push_back(o);
      expd.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (expd.empty()) {
      obs.push_back(o);
      expd.push_back(e);
    } else {
      obs.back() += o;
      expd.back() += e;
    }
  }
  return pearson(obs, expd);
}

ChiSquareResult chi_square_binned(const std::vector<long>& counts, const std::vector<double>& probs,
                                  const std::vector<int>& order, std::size_t n_bins) {
  if (counts.size() != probs.size() || order.size() != probs.size())
    throw InvalidArgument("counts, probabilities and order differ in length");
  if (n_bins < 2) throw InvalidArgument("need at least two bins");
  std::vector<long> c;
  std::vector<double> p;
  const double target = 1.0 / static_cast<double>(n_bins);
  long cc = 0;
  double pp = 0.0;
  for (int x : order) {
    cc += counts[x];
    pp += probs[x];
    if (pp >= target) {
      c.push_back(cc);
      p.push_back(pp);
      cc = 0;
      pp = 0.0;
    }
  }
  if (pp > 0.0 || cc > 0) {
    c.push_back(cc);
    p.push_back(pp);
  }
  return chi_square_test(c, p);
}

double kolmogorov_sf(double t) {
  if (t <= 0.0) return 1.0;
  if (t < 0.2) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * t * t);
    sum += term;
    if (std::fabs(term) < 1e-16 * std::fabs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_p_value(double statistic, double n_effective) {
  const double s = std::sqrt(n_effective);
  return kolmogorov_sf((s + 0.12 + 0.11 / s) * statistic);
}

KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw InvalidArgument("no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return {d, ks_p_value(d, n)};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("no samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // Advance through ties together so atoms do not inflate the statistic.
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb))};
}

}  // namespace dcftp
