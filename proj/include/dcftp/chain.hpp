#pragma once

// Finite target chains, builtin constructors and the exact oracles used to
// validate the sampler (matrix powers, stationary distributions).

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dcftp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using State = int;
using StateSet = std::vector<State>;  // sorted, unique

struct ChainSpec {
  Matrix P;               // row-stochastic
  std::vector<double> V;  // Lyapunov value per state, V >= 1
  std::string label;

  int n() const { return static_cast<int>(V.size()); }

  /// States sorted by (V, index). Quantile coupling inverts rows in this order.
  const std::vector<State>& v_order() const;

  /// Throws InvalidArgument unless rows sum to 1 within 1e-12, entries are
  /// nonnegative and V >= 1.
  void validate() const;

 private:
  mutable std::vector<State> v_order_;
};

ChainSpec make_chain(Matrix P, std::vector<double> V, std::string label);

// Builtin chains --------------------------------------------------------------

/// Random walk on {0..N} with V(x) = x+1 and jumps of size
/// J(x) = max(1, ceil(x^(1-delta))): down w.p. c_down (floored at 0),
/// up w.p. c_up (capped at N), hold otherwise.
ChainSpec build_poly_rw(int N, double delta, double c_down, double c_up);

/// J(x) used by build_poly_rw.
int poly_rw_jump(int x, double delta);

struct RegenChain {
  ChainSpec chain;
  int m = 1;                 // small-set order expected by construction
  double eps_built = 0.0;    // m-step minorization mass on the low states
  std::vector<double> nu;    // constructed regeneration measure
};

/// Chain on {0..N} (4 <= N <= 64) with two low "sink" states {0,1}. Sinks go
/// to 0, 1 or 2; states x >= 2 fall to the sink of their parity w.p. 1-eta and
/// move up by one w.p. eta.
///  m_mode 1: V = 1.5^x, P = eps_built * 1 nu + (1 - eps_built) * Q with nu
///            uniform on {0,1}.
///  m_mode 2: V = x+1, P = Q; the low set is 2-small but not 1-small.
///            eps_built is reported as the two-step overlap mass.
RegenChain build_regen_chain(int N, double eps_built, int m_mode);

/// The 3-state kernel [[.5,.5,0],[.5,.25,.25],[.5,.5,0]] with V = (1,2,3).
ChainSpec build_three_state();

// Oracles ---------------------------------------------------------------------

struct StationaryResult {
  Vector pi;
  double residual = 0.0;  // ||pi P - pi||_inf
  long iterations = 0;
};

/// Power iteration with periodic Aitken extrapolation until ||pi P - pi||_inf
/// < tol. Throws Error after max_iter iterations.
StationaryResult exact_stationary(const ChainSpec& chain, double tol = 1e-12,
                                  long max_iter = 1'000'000);

/// (P^k)(x, .) in natural state order, by binary powering of the dense kernel.
Vector kernel_power_row(const ChainSpec& chain, int k, State x);

/// Cached kernel powers. Holds P^(2^i) and an LRU of full P^k matrices with
/// their V-ordered cumulative rows. Not thread-safe; use one per worker.
class KernelPowers {
 public:
  explicit KernelPowers(const ChainSpec& chain, std::size_t budget_bytes = 256u << 20);

  const ChainSpec& chain() const { return *chain_; }

  /// Full P^k, k >= 0 (P^0 = I).
  const Matrix& power(long k);

  /// Row of P^k in natural state order.
  Vector row(long k, State x) { return power(k).row(x).transpose(); }

  /// Cumulative row of P^k(x, .) in V-order; last entry is the row sum.
  std::vector<double> cdf_row(long k, State x);

  /// The (1-u)-quantile of P^k(x, .) under the V-order: the first state in
  /// V-order whose cumulative mass reaches 1-u.
  State quantile(long k, State x, double u);

  std::size_t cached_entries() const { return cache_.size(); }

 private:
  struct Entry {
    Matrix power;
    Matrix cdf;  // row x: cumulative of power(x, v_order[i])
  };
  Entry& entry(long k);
  const Matrix& binary_power(int i);

  const ChainSpec* chain_;
  std::size_t budget_bytes_;
  std::vector<Matrix> pow2_;
  std::unordered_map<long, std::pair<std::unique_ptr<Entry>, std::list<long>::iterator>> cache_;
  std::list<long> lru_;
};

/// Inverse CDF over a V-ordered cumulative vector: index i of the first entry
/// with cdf[i] >= t; falls back to the last entry with positive mass.
std::size_t cdf_search(const std::vector<double>& cdf, double t);

// Matrix file I/O ---------------------------------------------------------------

/// Text format: first line n, then n rows of n decimals, then one row of n
/// V-values. Values are written with 17 significant digits.
void write_matrix_file(const std::filesystem::path& path, const ChainSpec& chain);
ChainSpec read_matrix_file(const std::filesystem::path& path);

/// E_x[V(X_k)] for every x.
Vector expected_v(const ChainSpec& chain, const Matrix& Pk);

}  // namespace dcftp
