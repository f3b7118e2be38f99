#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tv {

using Vec = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Feasibility slack for constraint checks and memberships.
inline constexpr double kTolFeas = 1e-9;
// Slack for objective-value comparisons between independent solvers.
inline constexpr double kTolObj = 1e-8;
// Set-membership tolerance.
inline constexpr double kTolMember = 1e-9;
// A strict inequality "a < b" is certified as a <= b - kTolStrict.
inline constexpr double kTolStrict = 1e-7;

enum class ErrKind { precondition, unsupported, budget, numeric, io };

struct OpError : std::runtime_error {
  ErrKind kind;
  OpError(ErrKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// --- small vector arithmetic (runtime dimension) ---

Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scale(const Vec& a, double s);
double dot(const Vec& a, const Vec& b);
Vec zeros(std::size_t d);
// a + s*b
Vec axpy(const Vec& a, double s, const Vec& b);
Vec mean_of(const std::vector<Vec>& pts);

void require_dim(const Vec& v, std::size_t d, const char* what);

// Strict-inequality certificate: a < b with margin at least kTolStrict.
inline bool strictly_less(double a, double b) { return a <= b - kTolStrict; }

// Dense Gaussian elimination with partial pivoting; A is row-major n x n.
// Returns nullopt when the system is singular at tolerance.
std::optional<Vec> solve_dense(std::vector<Vec> A, Vec b);

// Least squares min ||B*t - r||_2 via normal equations (columns of B given
// as vectors); small systems only. Returns coefficient vector t.
std::optional<Vec> least_squares(const std::vector<Vec>& cols, const Vec& r);

// %.12g formatting used by every report writer (byte-stable output).
std::string fmt_g12(double x);

// --- deterministic RNG ---
// mt19937_64 with explicit seed; uniforms derived from raw bits so the
// stream is identical across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}
  double unit();                       // [0,1)
  double uniform(double a, double b);  // [a,b)
  int uniform_int(int lo, int hi);     // inclusive
  Vec box_point(const Vec& lo, const Vec& hi);
  // Euclidean-unit direction (rejection-free gaussian via Box-Muller).
  Vec direction(std::size_t d);
  std::uint64_t raw();

 private:
  std::uint64_t s_;
};

// --- bounded parallel map ---
// Runs fn(i) for i in [0,n); worker count capped by TRANSVERSAL_THREADS
// (default: hardware concurrency). Results must be written to pre-sized
// slots so the outcome is independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

int worker_count();

}  // namespace tv
