#include "transversal/core.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace tv {

Vec add(const Vec& a, const Vec& b) {
  require_dim(b, a.size(), "add");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Vec sub(const Vec& a, const Vec& b) {
  require_dim(b, a.size(), "sub");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

Vec scale(const Vec& a, double s) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
  return r;
}

double dot(const Vec& a, const Vec& b) {
  require_dim(b, a.size(), "dot");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec zeros(std::size_t d) { return Vec(d, 0.0); }

Vec axpy(const Vec& a, double s, const Vec& b) {
  require_dim(b, a.size(), "axpy");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
  return r;
}

Vec mean_of(const std::vector<Vec>& pts) {
  if (pts.empty()) throw OpError(ErrKind::precondition, "mean_of: empty collection");
  Vec m = zeros(pts[0].size());
  for (const Vec& p : pts) {
    require_dim(p, m.size(), "mean_of");
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += p[i];
  }
  return scale(m, 1.0 / static_cast<double>(pts.size()));
}

void require_dim(const Vec& v, std::size_t d, const char* what) {
  if (v.size() != d)
    throw OpError(ErrKind::precondition,
                  std::string(what) + ": dimension mismatch (" +
                      std::to_string(v.size()) + " vs " + std::to_string(d) + ")");
}

std::optional<Vec> solve_dense(std::vector<Vec> A, Vec b) {
  const std::size_t n = A.size();
  if (n == 0 || b.size() != n) return std::nullopt;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
    if (std::fabs(A[piv][c]) < 1e-12) return std::nullopt;
    std::swap(A[piv], A[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
    x[i] = s / A[i][i];
  }
  return x;
}

std::optional<Vec> least_squares(const std::vector<Vec>& cols, const Vec& r) {
  const std::size_t k = cols.size();
  if (k == 0) return Vec{};
  std::vector<Vec> G(k, Vec(k, 0.0));
  Vec rhs(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) G[i][j] = dot(cols[i], cols[j]);
    rhs[i] = dot(cols[i], r);
  }
  // Tiny ridge keeps nearly dependent direction sets solvable; the residual
  // check downstream guards against a distorted solution.
  for (std::size_t i = 0; i < k; ++i) G[i][i] += 1e-13;
  return solve_dense(std::move(G), std::move(rhs));
}

std::string fmt_g12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// splitmix64 step; stable across platforms.
std::uint64_t Rng::raw() {
  s_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::unit() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

double Rng::uniform(double a, double b) { return a + (b - a) * unit(); }

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw OpError(ErrKind::precondition, "uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(raw() % span);
}

Vec Rng::box_point(const Vec& lo, const Vec& hi) {
  require_dim(hi, lo.size(), "box_point");
  Vec p(lo.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = uniform(lo[i], hi[i]);
  return p;
}

Vec Rng::direction(std::size_t d) {
  Vec v(d);
  double n2 = 0;
  do {
    for (std::size_t i = 0; i < d; ++i) {
      // Box-Muller from two raw uniforms.
      double u1 = unit(), u2 = unit();
      if (u1 < 1e-300) u1 = 1e-300;
      v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    n2 = dot(v, v);
  } while (n2 < 1e-12);
  return scale(v, 1.0 / std::sqrt(n2));
}

int worker_count() {
  static int cached = [] {
    if (const char* env = std::getenv("TRANSVERSAL_THREADS")) {
      const int k = std::atoi(env);
      if (k >= 1) return k;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
  }();
  return cached;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = worker_count();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int used = static_cast<int>(std::min<std::size_t>(n, workers));
  pool.reserve(used);
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mu;
  for (int w = 0; w < used; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!failed.exchange(true)) first_error = e.what();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw OpError(ErrKind::numeric, "parallel_for: " + first_error);
}

}  // namespace tv
