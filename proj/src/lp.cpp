#include "transversal/lp.hpp"

#include <atomic>
#include <cmath>

namespace tv::geo {

namespace {

constexpr double kPivTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr int kMaxIter = 20000;

std::atomic<std::uint64_t> g_lp_count{0};

struct Tableau {
  // T is m x (ncols+1); last column is the rhs. basis[i] = column basic in row i.
  std::vector<Vec> T;
  std::vector<int> basis;
  std::size_t ncols = 0;

  double& rhs(std::size_t i) { return T[i][ncols]; }

  void pivot(std::size_t pr, std::size_t pc) {
    Vec& prow = T[pr];
    const double pv = prow[pc];
    for (double& v : prow) v /= pv;
    prow[pc] = 1.0;
    for (std::size_t r = 0; r < T.size(); ++r) {
      if (r == pr) continue;
      const double f = T[r][pc];
      if (f == 0.0) continue;
      for (std::size_t k = 0; k <= ncols; ++k) T[r][k] -= f * prow[k];
      T[r][pc] = 0.0;
    }
    basis[pr] = static_cast<int>(pc);
  }
};

// Bland's rule simplex on the current tableau over columns [0, nactive).
// cost[j] applies to column j. Returns {optimal?, iterations}; sets
// *unbounded when a ray is detected.
int run_simplex(Tableau& tb, const Vec& cost, std::size_t nactive, bool* unbounded) {
  const std::size_t m = tb.T.size();
  *unbounded = false;
  std::vector<char> in_basis(tb.ncols, 0);
  for (int b : tb.basis) in_basis[b] = 1;
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    // Reduced costs from scratch for stability: r_j = c_j - sum_i c_B(i) T(i,j).
    Vec cb(m);
    for (std::size_t i = 0; i < m; ++i) cb[i] = cost[tb.basis[i]];
    int enter = -1;
    for (std::size_t j = 0; j < nactive; ++j) {
      if (in_basis[j]) continue;
      double rj = cost[j];
      for (std::size_t i = 0; i < m; ++i)
        if (cb[i] != 0.0) rj -= cb[i] * tb.T[i][j];
      if (rj < -kCostTol) {
        enter = static_cast<int>(j);
        break;  // Bland: lowest eligible index.
      }
    }
    if (enter < 0) return iter;  // optimal
    int leave = -1;
    double best = kInf;
    for (std::size_t i = 0; i < m; ++i) {
      const double piv = tb.T[i][enter];
      if (piv > kPivTol) {
        const double ratio = tb.rhs(i) / piv;
        if (ratio < best - 1e-12 ||
            (ratio < best + 1e-12 && (leave < 0 || tb.basis[i] < tb.basis[leave]))) {
          best = ratio;
          leave = static_cast<int>(i);
        }
      }
    }
    if (leave < 0) {
      *unbounded = true;
      return iter;
    }
    in_basis[tb.basis[leave]] = 0;
    in_basis[enter] = 1;
    tb.pivot(static_cast<std::size_t>(leave), static_cast<std::size_t>(enter));
  }
  throw OpError(ErrKind::budget, "lp_solve: iteration budget exceeded");
}

}  // namespace

void LPProblem::add(const Vec& a, char sense, double b) {
  require_dim(a, nvars, "LPProblem::add");
  rows.push_back({a, b, sense});
}

void LPProblem::set_bounds(const Vec& lower, const Vec& upper) {
  require_dim(lower, nvars, "LPProblem::set_bounds");
  require_dim(upper, nvars, "LPProblem::set_bounds");
  lo = lower;
  hi = upper;
}

LPSolution lp_solve(const LPProblem& p) {
  g_lp_count.fetch_add(1, std::memory_order_relaxed);
  const std::size_t n = p.nvars;
  Vec lo = p.lo.empty() ? Vec(n, -kInf) : p.lo;
  Vec hi = p.hi.empty() ? Vec(n, kInf) : p.hi;
  Vec c = p.c.empty() ? Vec(n, 0.0) : p.c;
  require_dim(c, n, "lp_solve objective");

  // Column mapping to nonnegative variables.
  // kind 0: free split (col, col+1);  1: x = lo + y (col);  2: x = hi - y (col).
  struct ColMap {
    int kind;
    std::size_t col;
    double base;
  };
  std::vector<ColMap> map(n);
  std::size_t ncols = 0;
  std::vector<LPRow> rows = p.rows;
  for (std::size_t j = 0; j < n; ++j) {
    const bool lo_f = std::isfinite(lo[j]), hi_f = std::isfinite(hi[j]);
    if (lo_f) {
      map[j] = {1, ncols++, lo[j]};
      if (hi_f) {
        Vec a = zeros(n);
        a[j] = 1.0;
        rows.push_back({a, hi[j], '<'});
      }
    } else if (hi_f) {
      map[j] = {2, ncols++, hi[j]};
    } else {
      map[j] = {0, ncols, 0.0};
      ncols += 2;
    }
  }

  const std::size_t m = rows.size();
  // Structural + slack/surplus columns first, artificials after.
  std::size_t nslack = 0;
  for (const LPRow& r : rows)
    if (r.sense != '=') ++nslack;

  const std::size_t struct_cols = ncols + nslack;
  // Build rows: coefficients over structural columns, b' adjusted by bases.
  std::vector<Vec> A(m, Vec(struct_cols, 0.0));
  Vec b(m, 0.0);
  Vec cost2(struct_cols, 0.0);
  double obj_offset = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const ColMap& cm = map[j];
    obj_offset += c[j] * cm.base;
    if (cm.kind == 0) {
      cost2[cm.col] += c[j];
      cost2[cm.col + 1] -= c[j];
    } else if (cm.kind == 1) {
      cost2[cm.col] += c[j];
    } else {
      cost2[cm.col] -= c[j];
    }
  }
  {
    std::size_t snext = ncols;
    for (std::size_t i = 0; i < m; ++i) {
      const LPRow& r = rows[i];
      require_dim(r.a, n, "lp row");
      double bi = r.b;
      for (std::size_t j = 0; j < n; ++j) {
        const double aij = r.a[j];
        if (aij == 0.0) continue;
        const ColMap& cm = map[j];
        bi -= aij * cm.base;
        if (cm.kind == 0) {
          A[i][cm.col] += aij;
          A[i][cm.col + 1] -= aij;
        } else if (cm.kind == 1) {
          A[i][cm.col] += aij;
        } else {
          A[i][cm.col] -= aij;
        }
      }
      b[i] = bi;
      if (r.sense == '<') {
        A[i][snext++] = 1.0;
      } else if (r.sense == '>') {
        A[i][snext++] = -1.0;
      }
    }
  }

  // Normalize to b >= 0.
  for (std::size_t i = 0; i < m; ++i) {
    if (b[i] < 0) {
      for (double& v : A[i]) v = -v;
      b[i] = -b[i];
    }
  }

  // Choose initial basis: slack column if it survived normalization with +1,
  // otherwise an artificial.
  Tableau tb;
  std::vector<std::size_t> art_rows;
  {
    std::vector<int> basis(m, -1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t jc = ncols; jc < struct_cols; ++jc) {
        if (A[i][jc] == 1.0) {
          bool only_row = true;
          for (std::size_t r2 = 0; r2 < m; ++r2)
            if (r2 != i && A[r2][jc] != 0.0) only_row = false;
          if (only_row) {
            basis[i] = static_cast<int>(jc);
            break;
          }
        }
      }
      if (basis[i] < 0) art_rows.push_back(i);
    }
    const std::size_t total = struct_cols + art_rows.size();
    tb.ncols = total;
    tb.T.assign(m, Vec(total + 1, 0.0));
    tb.basis.assign(m, -1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t jc = 0; jc < struct_cols; ++jc) tb.T[i][jc] = A[i][jc];
      tb.T[i][total] = b[i];
      tb.basis[i] = basis[i];
    }
    for (std::size_t k = 0; k < art_rows.size(); ++k) {
      tb.T[art_rows[k]][struct_cols + k] = 1.0;
      tb.basis[art_rows[k]] = static_cast<int>(struct_cols + k);
    }
  }

  LPSolution sol;
  bool unbounded = false;
  int iters = 0;

  // Phase 1.
  if (!art_rows.empty()) {
    Vec phase1_cost(tb.ncols, 0.0);
    for (std::size_t k = 0; k < art_rows.size(); ++k) phase1_cost[struct_cols + k] = 1.0;
    iters += run_simplex(tb, phase1_cost, tb.ncols, &unbounded);
    double p1 = 0;
    for (std::size_t i = 0; i < tb.T.size(); ++i)
      if (tb.basis[i] >= static_cast<int>(struct_cols)) p1 += tb.rhs(i);
    sol.phase1 = p1;
    if (p1 > 1e-7) {
      sol.status = LPSolution::Status::infeasible;
      sol.iterations = iters;
      return sol;
    }
    // Pivot remaining artificials out where possible.
    for (std::size_t i = 0; i < tb.T.size(); ++i) {
      if (tb.basis[i] < static_cast<int>(struct_cols)) continue;
      std::size_t pc = struct_cols;
      for (std::size_t j = 0; j < struct_cols; ++j)
        if (std::fabs(tb.T[i][j]) > kPivTol) {
          pc = j;
          break;
        }
      if (pc < struct_cols) tb.pivot(i, pc);
      // Otherwise the row is redundant; its artificial stays basic at zero and
      // phase 2 never selects artificial columns, so it is harmless.
    }
  }

  // Phase 2 over structural columns only.
  Vec phase2_cost(tb.ncols, 0.0);
  for (std::size_t j = 0; j < struct_cols; ++j) phase2_cost[j] = j < cost2.size() ? cost2[j] : 0.0;
  iters += run_simplex(tb, phase2_cost, struct_cols, &unbounded);
  sol.iterations = iters;
  if (unbounded) {
    sol.status = LPSolution::Status::unbounded;
    return sol;
  }

  Vec y(struct_cols, 0.0);
  for (std::size_t i = 0; i < tb.T.size(); ++i)
    if (tb.basis[i] >= 0 && tb.basis[i] < static_cast<int>(struct_cols))
      y[tb.basis[i]] = tb.rhs(i);

  sol.x.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const ColMap& cm = map[j];
    if (cm.kind == 0)
      sol.x[j] = y[cm.col] - y[cm.col + 1];
    else if (cm.kind == 1)
      sol.x[j] = cm.base + y[cm.col];
    else
      sol.x[j] = cm.base - y[cm.col];
  }
  sol.value = dot(c, sol.x);
  (void)obj_offset;
  sol.status = LPSolution::Status::optimal;
  return sol;
}

std::uint64_t lp_solve_count() { return g_lp_count.load(std::memory_order_relaxed); }
void lp_reset_counters() { g_lp_count.store(0, std::memory_order_relaxed); }

}  // namespace tv::geo
