#include "dcftp/chain.hpp"

#include "dcftp/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace dcftp {

const std::vector<State>& ChainSpec::v_order() const {
  if (static_cast<int>(v_order_.size()) != n()) {
    v_order_.resize(n());
    std::iota(v_order_.begin(), v_order_.end(), 0);
    std::stable_sort(v_order_.begin(), v_order_.end(),
                     [this](State a, State b) { return V[a] < V[b]; });
  }
  return v_order_;
}

void ChainSpec::validate() const {
  if (n() == 0) throw InvalidArgument("empty state space");
  if (P.rows() != n() || P.cols() != n())
    throw InvalidArgument(fmt::format("kernel is {}x{} but V has {} entries", P.rows(), P.cols(), n()));
  for (int x = 0; x < n(); ++x) {
    if (!(V[x] >= 1.0) || !std::isfinite(V[x]))
      throw InvalidArgument(fmt::format("V({}) = {} must be finite and >= 1", x, V[x]));
    double sum = 0.0;
    for (int y = 0; y < n(); ++y) {
      if (!(P(x, y) >= 0.0)) throw InvalidArgument(fmt::format("P({},{}) is negative", x, y));
      sum += P(x, y);
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw InvalidArgument(fmt::format("row {} sums to {:.17g}", x, sum));
  }
}

ChainSpec make_chain(Matrix P, std::vector<double> V, std::string label) {
  ChainSpec c;
  c.P = std::move(P);
  c.V = std::move(V);
  c.label = std::move(label);
  c.validate();
  return c;
}

int poly_rw_jump(int x, double delta) {
  if (x <= 0) return 1;
  return std::max(1, static_cast<int>(std::ceil(std::pow(static_cast<double>(x), 1.0 - delta))));
}

ChainSpec build_poly_rw(int N, double delta, double c_down, double c_up) {
  if (N < 64) throw InvalidArgument("poly_rw requires N >= 64");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("poly_rw requires 0 < delta < 1");
  if (!(c_up > 0.0 && c_down > c_up && c_down + c_up <= 1.0))
    throw InvalidArgument("poly_rw requires c_down > c_up > 0 and c_down + c_up <= 1");
  const int n = N + 1;
  Matrix P = Matrix::Zero(n, n);
  std::vector<double> V(n);
  for (int x = 0; x < n; ++x) {
    V[x] = x + 1.0;
    const int J = poly_rw_jump(x, delta);
    P(x, std::max(x - J, 0)) += c_down;
    P(x, std::min(x + J, N)) += c_up;
    P(x, x) += std::max(0.0, 1.0 - (c_down + c_up));
  }
  return make_chain(std::move(P), std::move(V),
                    fmt::format("poly_rw(N={},delta={},c_down={},c_up={})", N, delta, c_down, c_up));
}

namespace {
// Per-mode shape constants, tuned so that certify_chain succeeds with a
// meaningful C*: mode 1 uses V = 1.5^x and a strong fall to the sinks; mode 2
// uses V = x+1 and a tiny up-move so that h* = d' and F(h*) = 1.
struct RegenShape {
  double eta;    // up-move probability off the sinks
  double rho;    // sink -> sink 1
  double kappa;  // sink -> state 2
  double v_base; // V = v_base^x, or x+1 when 0
};
constexpr RegenShape kRegenMode1{0.2, 0.02, 0.01, 1.5};
constexpr RegenShape kRegenMode2{0.01, 0.02, 0.01, 0.0};
}  // namespace

RegenChain build_regen_chain(int N, double eps_built, int m_mode) {
  if (N < 4 || N > 64) throw InvalidArgument("regen chain requires 4 <= N <= 64");
  if (m_mode != 1 && m_mode != 2) throw InvalidArgument("m_mode must be 1 or 2");
  if (!(eps_built > 0.0 && eps_built < 1.0)) throw InvalidArgument("eps_built must lie in (0,1)");
  const RegenShape& sh = m_mode == 1 ? kRegenMode1 : kRegenMode2;
  const int n = N + 1;
  Matrix Q = Matrix::Zero(n, n);
  for (int x = 0; x < 2; ++x) {
    Q(x, 0) = 1.0 - sh.rho - sh.kappa;
    Q(x, 1) = sh.rho;
    Q(x, 2) += sh.kappa;
  }
  for (int x = 2; x < n; ++x) {
    Q(x, x % 2) += 1.0 - sh.eta;
    Q(x, std::min(x + 1, N)) += sh.eta;
  }
  std::vector<double> V(n);
  for (int x = 0; x < n; ++x) V[x] = sh.v_base > 0.0 ? std::pow(sh.v_base, x) : x + 1.0;

  RegenChain out;
  out.nu.assign(n, 0.0);
  const std::string label = fmt::format("regen_chain(N={},eps_built={},m_mode={})", N, eps_built, m_mode);
  if (m_mode == 1) {
    out.m = 1;
    out.eps_built = eps_built;
    out.nu[0] = out.nu[1] = 0.5;
    Matrix P = (1.0 - eps_built) * Q;
    for (int x = 0; x < n; ++x) {
      P(x, 0) += eps_built * 0.5;
      P(x, 1) += eps_built * 0.5;
    }
    out.chain = make_chain(std::move(P), std::move(V), label);
  } else {
    // Rows of 2 and 3 are disjoint, so no set holding both is 1-small; every
    // state reaches 0 in exactly two steps. The overlap of all two-step rows
    // is the constructed minorization.
    out.m = 2;
    const Matrix Q2 = Q * Q;
    double mass = 0.0;
    for (int y = 0; y < n; ++y) {
      out.nu[y] = Q2.col(y).minCoeff();
      mass += out.nu[y];
    }
    for (double& v : out.nu) v /= mass;
    out.eps_built = mass;
    out.chain = make_chain(std::move(Q), std::move(V), label);
  }
  return out;
}

ChainSpec build_three_state() {
  Matrix P(3, 3);
  P << 0.5, 0.5, 0.0, 0.5, 0.25, 0.25, 0.5, 0.5, 0.0;
  return make_chain(std::move(P), {1.0, 2.0, 3.0}, "three_state");
}

// -----------------------------------------------------------------------------

namespace {

double residual_inf(const Matrix& P, const Vector& pi) {
  const Vector next = P.transpose() * pi;
  return (next - pi).cwiseAbs().maxCoeff();
}

}  // namespace

StationaryResult exact_stationary(const ChainSpec& chain, double tol, long max_iter) {
  chain.validate();
  const int n = chain.n();
  const Matrix Pt = chain.P.transpose();
  Vector x = Vector::Constant(n, 1.0 / n);
  Vector x1, x2;
  for (long it = 0; it < max_iter; it += 3) {
    x1 = Pt * x;
    x2 = Pt * x1;
    Vector x3 = Pt * x2;
    x3 /= x3.sum();
    double r = residual_inf(chain.P, x3);
    // Aitken delta-squared on the last three iterates.
    Vector acc = x3;
    for (int i = 0; i < n; ++i) {
      const double d2 = x3[i] - 2.0 * x2[i] + x1[i];
      if (std::abs(d2) > 1e-300) acc[i] = x3[i] - (x3[i] - x2[i]) * (x3[i] - x2[i]) / d2;
      if (acc[i] < 0.0) acc[i] = 0.0;
    }
    acc /= acc.sum();
    const double ra = residual_inf(chain.P, acc);
    if (ra < r) {
      x3 = acc;
      r = ra;
    }
    if (r < tol) return {x3, r, it + 3};
    x = x3;
  }
  throw Error(fmt::format("power iteration did not converge in {} iterations", max_iter));
}

Vector kernel_power_row(const ChainSpec& chain, int k, State x) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(chain.n());
  v[x] = 1.0;
  Matrix base = chain.P;
  for (int e = k; e > 0; e >>= 1) {
    if (e & 1) v = v * base;
    if (e > 1) base = base * base;
  }
  return v.transpose();
}

Vector expected_v(const ChainSpec& chain, const Matrix& Pk) {
  const Eigen::Map<const Vector> V(chain.V.data(), chain.n());
  return Pk * V;
}

std::size_t cdf_search(const std::vector<double>& cdf, double t) {
  auto it = std::lower_bound(cdf.begin(), cdf.end(), t);
  if (it != cdf.end()) return static_cast<std::size_t>(it - cdf.begin());
  // Rounding left the total just below t: take the last state carrying mass.
  std::size_t i = cdf.size() - 1;
  while (i > 0 && cdf[i] == cdf[i - 1]) --i;
  return i;
}

// KernelPowers ----------------------------------------------------------------

KernelPowers::KernelPowers(const ChainSpec& chain, std::size_t budget_bytes)
    : chain_(&chain), budget_bytes_(budget_bytes) {}

const Matrix& KernelPowers::binary_power(int i) {
  if (pow2_.empty()) pow2_.push_back(chain_->P);
  while (static_cast<int>(pow2_.size()) <= i) {
    const Matrix& last = pow2_.back();
    Matrix sq = last * last;
    pow2_.push_back(std::move(sq));
  }
  return pow2_[i];
}

KernelPowers::Entry& KernelPowers::entry(long k) {
  if (k < 0) throw InvalidArgument("negative kernel power");
  auto found = cache_.find(k);
  if (found != cache_.end()) {
    lru_.splice(lru_.begin(), lru_, found->second.second);
    return *found->second.first;
  }
  const int n = chain_->n();
  auto e = std::make_unique<Entry>();
  bool have = false;
  for (int i = 0; (k >> i) != 0; ++i) {
    if ((k >> i) & 1) {
      if (!have) {
        e->power = binary_power(i);
        have = true;
      } else {
        e->power = e->power * binary_power(i);
      }
    }
  }
  if (!have) e->power = Matrix::Identity(n, n);
  const auto& order = chain_->v_order();
  e->cdf.resize(n, n);
  for (int x = 0; x < n; ++x) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += e->power(x, order[i]);
      e->cdf(x, i) = acc;
    }
  }
  const std::size_t entry_bytes = 2 * sizeof(double) * static_cast<std::size_t>(n) * n;
  const std::size_t max_entries = std::max<std::size_t>(4, budget_bytes_ / std::max<std::size_t>(entry_bytes, 1));
  while (cache_.size() >= max_entries) {
    cache_.erase(lru_.back());
    lru_.pop_back();
  }
  lru_.push_front(k);
  auto [it, inserted] = cache_.emplace(k, std::make_pair(std::move(e), lru_.begin()));
  (void)inserted;
  return *it->second.first;
}

const Matrix& KernelPowers::power(long k) { return entry(k).power; }

std::vector<double> KernelPowers::cdf_row(long k, State x) {
  const Entry& e = entry(k);
  std::vector<double> out(e.cdf.cols());
  for (Eigen::Index i = 0; i < e.cdf.cols(); ++i) out[i] = e.cdf(x, i);
  return out;
}

State KernelPowers::quantile(long k, State x, double u) {
  const Entry& e = entry(k);
  const double* row = e.cdf.data() + static_cast<std::ptrdiff_t>(x) * e.cdf.cols();
  const double t = 1.0 - u;
  const double* end = row + e.cdf.cols();
  // t <= 0 must still skip leading states with no mass.
  const double* it = t > 0.0 ? std::lower_bound(row, end, t) : std::upper_bound(row, end, 0.0);
  std::size_t i;
  if (it != end) {
    i = static_cast<std::size_t>(it - row);
  } else {
    i = static_cast<std::size_t>(e.cdf.cols() - 1);
    while (i > 0 && row[i] == row[i - 1]) --i;
  }
  return chain_->v_order()[i];
}

// Matrix file I/O ---------------------------------------------------------------

void write_matrix_file(const std::filesystem::path& path, const ChainSpec& chain) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  const int n = chain.n();
  out << n << '\n';
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) out << (y ? " " : "") << fmt::format("{:.17g}", chain.P(x, y));
    out << '\n';
  }
  for (int x = 0; x < n; ++x) out << (x ? " " : "") << fmt::format("{:.17g}", chain.V[x]);
  out << '\n';
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

ChainSpec read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::string tok;
  auto next = [&]() -> double {
    if (!(in >> tok)) throw IoError(fmt::format("{}: unexpected end of file", path.string()));
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw IoError(fmt::format("{}: bad number '{}'", path.string(), tok));
    return v;
  };
  const double nd = next();
  if (!(nd >= 1.0) || nd != std::floor(nd)) throw IoError(fmt::format("{}: bad state count", path.string()));
  const int n = static_cast<int>(nd);
  Matrix P(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) P(x, y) = next();
  std::vector<double> V(n);
  for (int x = 0; x < n; ++x) V[x] = next();
  if (in >> tok) throw IoError(fmt::format("{}: trailing data '{}'", path.string(), tok));
  try {
    return make_chain(std::move(P), std::move(V), "file:" + path.filename().string());
  } catch (const InvalidArgument& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace dcftp
