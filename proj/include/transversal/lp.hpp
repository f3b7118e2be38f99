#pragma once

#include "transversal/core.hpp"

namespace tv::geo {

// Dense linear programming: minimize c.x subject to row constraints and
// variable bounds. Two-phase simplex with Bland's rule throughout, so runs
// are deterministic and cycle-free. Intended for the small programs this
// library generates (tens of variables).

struct LPRow {
  Vec a;
  double b = 0;
  char sense = '<';  // '<' (<=), '=', '>' (>=)
};

struct LPProblem {
  std::size_t nvars = 0;
  Vec c;                    // empty means feasibility-only (c = 0)
  std::vector<LPRow> rows;
  Vec lo, hi;               // empty means all free; else size nvars (+-inf allowed)

  explicit LPProblem(std::size_t n) : nvars(n), c(n, 0.0) {}
  void add(const Vec& a, char sense, double b);
  void add_le(const Vec& a, double b) { add(a, '<', b); }
  void add_ge(const Vec& a, double b) { add(a, '>', b); }
  void add_eq(const Vec& a, double b) { add(a, '=', b); }
  void set_bounds(const Vec& lower, const Vec& upper);
};

struct LPSolution {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::infeasible;
  Vec x;              // meaningful when status == optimal
  double value = 0;   // objective at x
  double phase1 = 0;  // residual infeasibility measure from phase 1
  int iterations = 0;
};

LPSolution lp_solve(const LPProblem& p);

// Global deterministic work counter (reported by the CLI).
std::uint64_t lp_solve_count();
void lp_reset_counters();

}  // namespace tv::geo
