#pragma once
// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the sampler's own stationary or power routines
// unless stated.

#include "dcftp/chain.hpp"
#include "dcftp/coupling.hpp"
#include "dcftp/drift.hpp"

#include <Eigen/LU>

#include <cmath>
#include <vector>

namespace dcftp::oracle {

/// pi (P - I) = 0, sum pi = 1, by a dense LU solve on the transposed system.
inline Vector solve_stationary(const Matrix& P) {
  const int n = static_cast<int>(P.rows());
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  return A.fullPivLu().solve(rhs);
}

/// P^k by repeated multiplication.
inline Eigen::MatrixXd naive_power(const Matrix& P, long k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  for (long i = 0; i < k; ++i) out = out * P;
  return out;
}

struct DominationCheck {
  long checked = 0;
  long violations = 0;
};

/// The quantile map u -> (1-u)-quantile of P^k(x,.) in V-order is constant on
/// u in [1 - c_i, 1 - c_{i-1}) where c is the V-ordered cdf. The bound
/// z e^{-a} / u is smallest at the right end of each piece, so checking
/// V(y_i) against z e^{-a} / (1 - c_{i-1}) at every piece certifies the bound
/// for every u. Each piece is also probed through the sampler itself just
/// inside its right end.
inline DominationCheck exhaustive_domination(const ChainSpec& chain, const TamingParams& t, double z,
                                             double a, KernelPowers& powers) {
  DominationCheck out;
  const long k = taming_F(z, t);
  const Eigen::MatrixXd Pk = naive_power(chain.P, k);
  const auto& order = chain.v_order();
  for (int x = 0; x < chain.n(); ++x) {
    if (chain.V[x] > z) continue;
    double lower = 0.0;  // c_{i-1}
    for (int i = 0; i < chain.n(); ++i) {
      const double mass = Pk(x, order[i]);
      if (mass <= 0.0) continue;
      const double u_right = 1.0 - lower;
      const double bound = z * std::exp(-a) / u_right;
      ++out.checked;
      if (chain.V[order[i]] > bound * (1 + 1e-12)) ++out.violations;
      BlockUpdate blk;
      blk.z = z;
      blk.k = k;
      blk.u = std::nextafter(u_right, 0.0);
      blk.E = -std::log(blk.u);
      const State y = quantile_block_update(x, blk, t, powers);
      ++out.checked;
      if (chain.V[y] > z * std::exp(blk.E - a) * (1 + 1e-12)) ++out.violations;
      lower += mass;
    }
  }
  return out;
}

}  // namespace dcftp::oracle
