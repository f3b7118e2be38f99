#include "transversal/multiset.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace tv::geo {

namespace {

double euclid(const Vec& v) { return std::sqrt(dot(v, v)); }

// Circumball of a small affinely independent boundary set.
std::pair<Vec, double> ball_of(const std::vector<Vec>& r, std::size_t d) {
  if (r.empty()) return {zeros(d), -1.0};
  if (r.size() == 1) return {r[0], 0.0};
  std::vector<Vec> dirs;
  Vec rhs;
  for (std::size_t i = 1; i < r.size(); ++i) {
    dirs.push_back(sub(r[i], r[0]));
    rhs.push_back(0.5 * dot(dirs.back(), dirs.back()));
  }
  // Solve 2 (p_i - p_0) . (c - p_0) = ||p_i - p_0||^2 in the affine hull:
  // Gram system G s = rhs with c = p0 + sum s_i dirs_i.
  std::vector<Vec> g(dirs.size(), zeros(dirs.size()));
  for (std::size_t i = 0; i < dirs.size(); ++i)
    for (std::size_t j = 0; j < dirs.size(); ++j) g[i][j] = dot(dirs[i], dirs[j]);
  auto s = solve_dense(g, rhs);
  if (!s) return {zeros(d), -1.0};  // degenerate boundary set
  Vec c = r[0];
  for (std::size_t i = 0; i < dirs.size(); ++i) c = axpy(c, (*s)[i], dirs[i]);
  double rad = 0;
  for (const Vec& p : r) rad = std::max(rad, euclid(sub(c, p)));
  return {std::move(c), rad};
}

bool in_ball(const std::pair<Vec, double>& b, const Vec& p) {
  if (b.second < 0) return false;
  return euclid(sub(p, b.first)) <= b.second * (1 + 1e-12) + 1e-12;
}

std::pair<Vec, double> welzl(std::vector<Vec>& pts, std::size_t k, std::vector<Vec>& boundary,
                             std::size_t d) {
  if (k == 0 || boundary.size() == d + 1) return ball_of(boundary, d);
  auto b = welzl(pts, k - 1, boundary, d);
  if (in_ball(b, pts[k - 1])) return b;
  boundary.push_back(pts[k - 1]);
  auto r = welzl(pts, k - 1, boundary, d);
  boundary.pop_back();
  return r;
}

}  // namespace

std::pair<Vec, double> min_enclosing_ball(const std::vector<Vec>& pts) {
  if (pts.empty()) throw OpError(ErrKind::precondition, "min_enclosing_ball: no points");
  const std::size_t d = pts[0].size();
  std::vector<Vec> shuffled = pts;
  Rng rng(0xC0FFEE);  // deterministic permutation keeps expected cost linear
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.uniform_int(0, static_cast<int>(i) - 1)]);
  std::vector<Vec> boundary;
  auto b = welzl(shuffled, shuffled.size(), boundary, d);
  if (b.second < 0) b = {pts[0], 0.0};
  // Tighten the radius to the exact farthest distance.
  double rad = 0;
  for (const Vec& p : pts) rad = std::max(rad, euclid(sub(b.first, p)));
  return {b.first, rad};
}

Vec chebyshev_center(const std::vector<Vec>& pts, const NormSpec& n) {
  if (pts.empty()) throw OpError(ErrKind::precondition, "chebyshev_center: no points");
  const std::size_t d = pts[0].size();
  if (pts.size() == 1) return pts[0];
  if (n.kind == NormSpec::Kind::euclidean) return min_enclosing_ball(pts).first;
  if (polyhedral_norm(n)) {
    LPBuilder lp;
    const std::size_t xo = lp.vars(d), t = lp.vars(1);
    for (const Vec& p : pts) emit_norm_le(lp, n, d, xo, SIZE_MAX, &p, t);
    LinExpr obj;
    obj.add(t, 1.0);
    lp.set_objective(obj);
    auto sol = lp_solve(lp.build());
    if (sol.status != LPSolution::Status::optimal)
      throw OpError(ErrKind::numeric, "chebyshev_center: unexpected LP status");
    return Vec(sol.x.begin(), sol.x.begin() + d);
  }
  throw OpError(ErrKind::unsupported, "chebyshev_center: general p-norm unsupported");
}

double d1_points(const std::vector<Vec>& pts, const NormSpec& n) {
  if (pts.size() < 2) throw OpError(ErrKind::precondition, "d1_points: need at least 2 points");
  double v = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    v = std::max(v, norm(sub(pts[i], pts.back()), n));
  return v;
}

DistanceReport d2_points(const std::vector<Vec>& pts, const NormSpec& n) {
  if (pts.size() < 2) throw OpError(ErrKind::precondition, "d2_points: need at least 2 points");
  DistanceReport r;
  r.minimizers = pts;
  if (pts.size() == 2) {
    r.center = scale(add(pts[0], pts[1]), 0.5);
    r.value = 0.5 * norm(sub(pts[0], pts[1]), n);
    r.lo = r.hi = r.value;
    return r;
  }
  if (n.kind == NormSpec::Kind::euclidean) {
    auto [c, rad] = min_enclosing_ball(pts);
    r.center = std::move(c);
    r.value = rad;
    r.lo = r.hi = rad;
    return r;
  }
  const Vec c = chebyshev_center(pts, n);
  double v = 0;
  for (const Vec& p : pts) v = std::max(v, norm(sub(p, c), n));
  r.center = c;
  r.value = v;
  r.lo = r.hi = v;
  return r;
}

double d3_points(const std::vector<Vec>& pts, const NormSpec& n) {
  if (pts.empty()) throw OpError(ErrKind::precondition, "d3_points: no points");
  const Vec m = mean_of(pts);
  double v = 0;
  for (const Vec& p : pts) v = std::max(v, norm(sub(p, m), n));
  return v;
}

// ---------- set versions ----------

namespace {

struct LeafSystems {
  std::vector<std::vector<ConvexLeaf>> per_set;
  std::size_t count = 1;
  bool all_polyhedral = true;
};

LeafSystems leaf_systems(const std::vector<SetPtr>& sets, std::size_t cap) {
  LeafSystems ls;
  for (const auto& s : sets) {
    ls.per_set.push_back(convex_leaves(*s));
    if (ls.per_set.back().empty())
      throw OpError(ErrKind::precondition, "multiset distance: empty set");
    for (const auto& l : ls.per_set.back())
      if (!polyhedral_leaf(l)) ls.all_polyhedral = false;
    ls.count *= ls.per_set.back().size();
    if (ls.count > cap) {
      ls.all_polyhedral = false;
      ls.count = cap + 1;
      return ls;
    }
  }
  return ls;
}

std::vector<std::size_t> system_choice(const LeafSystems& ls, std::size_t sys) {
  std::vector<std::size_t> choice(ls.per_set.size());
  for (std::size_t j = 0; j < ls.per_set.size(); ++j) {
    choice[j] = sys % ls.per_set[j].size();
    sys /= ls.per_set[j].size();
  }
  return choice;
}

// Deterministic seed points for alternating schemes: leaf anchors of every
// set plus their centroid, capped at 16.
std::vector<Vec> seed_points(const LeafSystems& ls, std::size_t d) {
  std::vector<Vec> seeds;
  for (const auto& leaves : ls.per_set)
    for (const auto& l : leaves) {
      if (seeds.size() >= 15) break;
      try {
        seeds.push_back(leaf_anchor(l));
      } catch (const OpError&) {
      }
    }
  if (seeds.empty()) seeds.push_back(zeros(d));
  seeds.push_back(mean_of(seeds));
  return seeds;
}

DistanceReport d1_sets_lp(const std::vector<SetPtr>& sets, const NormSpec& n,
                          const LeafSystems& ls) {
  const std::size_t nn = sets.size();
  const std::size_t d = sets[0]->dim;
  DistanceReport best;
  best.value = kInf;
  for (std::size_t sys = 0; sys < ls.count; ++sys) {
    const auto choice = system_choice(ls, sys);
    LPBuilder lp;
    const std::size_t vo = lp.vars(d);  // the last-set point
    const std::size_t t = lp.vars(1);
    emit_leaf_membership(lp, vo, ls.per_set[nn - 1][choice[nn - 1]]);
    for (std::size_t i = 0; i + 1 < nn; ++i) {
      const std::size_t yo = lp.vars(d);
      emit_leaf_membership(lp, yo, ls.per_set[i][choice[i]]);
      emit_norm_le(lp, n, d, yo, vo, nullptr, t);
    }
    LinExpr obj;
    obj.add(t, 1.0);
    lp.set_objective(obj);
    auto sol = lp_solve(lp.build());
    if (sol.status == LPSolution::Status::infeasible) continue;  // empty leaf
    if (sol.status != LPSolution::Status::optimal)
      throw OpError(ErrKind::numeric, "d1_sets: unexpected LP status");
    if (sol.x[d] < best.value) {
      best.value = std::max(0.0, sol.x[d]);
      best.center = Vec(sol.x.begin(), sol.x.begin() + d);
    }
  }
  if (best.value == kInf) throw OpError(ErrKind::precondition, "d1_sets: empty set");
  best.method = "exact-lp";
  best.lo = best.hi = best.value;
  return best;
}

}  // namespace

DistanceReport d1_sets(const std::vector<SetPtr>& sets, const NormSpec& n) {
  if (sets.size() < 2) throw OpError(ErrKind::precondition, "d1_sets: need at least 2 sets");
  const std::size_t d = sets[0]->dim;
  for (const auto& s : sets)
    if (s->dim != d) throw OpError(ErrKind::precondition, "d1_sets: dimension mismatch");
  const std::size_t nn = sets.size();

  if (nn == 2) {
    auto r = dist_set_set(*sets[0], *sets[1], n);
    DistanceReport out;
    out.value = r.value;
    if (r.pa && r.pb) {
      out.minimizers = {*r.pa, *r.pb};
      out.center = *r.pb;
    }
    out.method = r.method;
    out.lo = r.lo;
    out.hi = r.hi;
    return out;
  }

  auto ls = leaf_systems(sets, 4096);

  // Finite last set: enumerate its candidate points.
  {
    bool finite_last = true;
    for (const auto& l : ls.per_set[nn - 1])
      if (!l.point) finite_last = false;
    if (finite_last) {
      DistanceReport best;
      best.value = kInf;
      std::string method = "exact-lp";
      for (const auto& l : ls.per_set[nn - 1]) {
        const Vec v = add(*l.point, l.shift);
        double val = 0, lo = 0, hi = 0;
        std::vector<Vec> mins;
        for (std::size_t i = 0; i + 1 < nn; ++i) {
          auto r = dist_point_set(v, *sets[i], n);
          val = std::max(val, r.value);
          lo = std::max(lo, r.lo);
          hi = std::max(hi, r.hi);
          if (r.method != "exact-lp") method = r.method;
          mins.push_back(r.nearest.value_or(v));
        }
        if (val < best.value) {
          best.value = val;
          best.lo = lo;
          best.hi = hi;
          best.center = v;
          mins.push_back(v);
          best.minimizers = std::move(mins);
        }
      }
      best.method = method;
      return best;
    }
  }

  if (ls.all_polyhedral && polyhedral_norm(n)) return d1_sets_lp(sets, n, ls);

  if (n.kind != NormSpec::Kind::euclidean)
    throw OpError(ErrKind::unsupported, "d1_sets: unsupported class/norm combination");

  // Alternating scheme: project the enclosing-ball center of the partner
  // points back onto the last set.
  const auto seeds = seed_points(ls, d);
  struct Cand {
    double value = kInf;
    Vec v;
    std::vector<Vec> mins;
  };
  std::vector<Cand> cands(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t si) {
    Vec v = project(seeds[si], *sets[nn - 1], n);
    Cand c;
    for (int it = 0; it < 100; ++it) {
      std::vector<Vec> omega;
      double g = 0;
      for (std::size_t i = 0; i + 1 < nn; ++i) {
        auto r = dist_point_set(v, *sets[i], n);
        g = std::max(g, r.value);
        omega.push_back(r.nearest.value_or(v));
      }
      if (g < c.value - 1e-13) {
        c.value = g;
        c.v = v;
        c.mins = omega;
        c.mins.push_back(v);
      } else if (it > 2)
        break;
      Vec center = chebyshev_center(omega, n);
      v = project(center, *sets[nn - 1], n);
    }
    cands[si] = std::move(c);
  });
  std::size_t best_i = 0;
  for (std::size_t i = 1; i < cands.size(); ++i)
    if (cands[i].value < cands[best_i].value - 1e-15) best_i = i;

  DistanceReport out;
  out.value = cands[best_i].value;
  out.center = cands[best_i].v;
  out.minimizers = cands[best_i].mins;
  out.method = "alternating";
  double lb = 0;  // d1 dominates each pairwise distance to the last set
  for (std::size_t i = 0; i + 1 < nn; ++i)
    lb = std::max(lb, dist_set_set(*sets[i], *sets[nn - 1], n).lo);
  out.lo = std::min(lb, out.value);
  out.hi = out.value;
  return out;
}

DistanceReport d2_sets(const std::vector<SetPtr>& sets, const NormSpec& n) {
  if (sets.empty()) throw OpError(ErrKind::precondition, "d2_sets: no sets");
  const std::size_t d = sets[0]->dim;
  std::vector<SetPtr> extended = sets;
  extended.push_back(whole_space(d));
  DistanceReport r = d1_sets(extended, n);
  if (r.method != "exact-lp") {
    // Sharper sound lower bound: 2 d2 >= pairwise set distances.
    double lb = 0;
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (std::size_t j = i + 1; j < sets.size(); ++j)
        lb = std::max(lb, dist_set_set(*sets[i], *sets[j], n).lo / 2.0);
    r.lo = std::min(std::max(r.lo, lb), r.value);
  }
  if (!r.minimizers.empty()) r.minimizers.pop_back();  // drop the whole-space point
  return r;
}

DistanceReport d3_sets(const std::vector<SetPtr>& sets, const NormSpec& n) {
  if (sets.empty()) throw OpError(ErrKind::precondition, "d3_sets: no sets");
  const std::size_t d = sets[0]->dim;
  const std::size_t nn = sets.size();
  for (const auto& s : sets)
    if (s->dim != d) throw OpError(ErrKind::precondition, "d3_sets: dimension mismatch");

  auto ls = leaf_systems(sets, 4096);

  if (ls.all_polyhedral && polyhedral_norm(n)) {
    DistanceReport best;
    best.value = kInf;
    for (std::size_t sys = 0; sys < ls.count; ++sys) {
      const auto choice = system_choice(ls, sys);
      LPBuilder lp;
      const std::size_t mo = lp.vars(d);  // mean
      const std::size_t t = lp.vars(1);
      std::vector<std::size_t> offs;
      for (std::size_t i = 0; i < nn; ++i) {
        const std::size_t yo = lp.vars(d);
        offs.push_back(yo);
        emit_leaf_membership(lp, yo, ls.per_set[i][choice[i]]);
        emit_norm_le(lp, n, d, yo, mo, nullptr, t);
      }
      for (std::size_t j = 0; j < d; ++j) {
        LinExpr e;  // n * mean_j = sum_i omega_ij
        e.add(mo + j, static_cast<double>(nn));
        for (std::size_t i = 0; i < nn; ++i) e.add(offs[i] + j, -1.0);
        lp.add(e, '=', 0.0);
      }
      LinExpr obj;
      obj.add(t, 1.0);
      lp.set_objective(obj);
      auto sol = lp_solve(lp.build());
      if (sol.status == LPSolution::Status::infeasible) continue;
      if (sol.status != LPSolution::Status::optimal)
        throw OpError(ErrKind::numeric, "d3_sets: unexpected LP status");
      if (sol.x[d] < best.value) {
        best.value = std::max(0.0, sol.x[d]);
        best.center = Vec(sol.x.begin(), sol.x.begin() + d);
        best.minimizers.clear();
        for (std::size_t i = 0; i < nn; ++i)
          best.minimizers.emplace_back(sol.x.begin() + offs[i], sol.x.begin() + offs[i] + d);
      }
    }
    if (best.value == kInf) throw OpError(ErrKind::precondition, "d3_sets: empty set");
    best.method = "exact-lp";
    best.lo = best.hi = best.value;
    return best;
  }

  if (n.kind != NormSpec::Kind::euclidean)
    throw OpError(ErrKind::unsupported, "d3_sets: unsupported class/norm combination");

  const auto seeds = seed_points(ls, d);
  struct Cand {
    double value = kInf;
    std::vector<Vec> omega;
  };
  std::vector<Cand> cands(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t si) {
    std::vector<Vec> omega;
    for (std::size_t i = 0; i < nn; ++i) omega.push_back(project(seeds[si], *sets[i], n));
    Cand c;
    for (int it = 0; it < 100; ++it) {
      const Vec m = mean_of(omega);
      double g = 0;
      for (std::size_t i = 0; i < nn; ++i) g = std::max(g, norm(sub(omega[i], m), n));
      if (g < c.value - 1e-13) {
        c.value = g;
        c.omega = omega;
      } else if (it > 2)
        break;
      for (std::size_t i = 0; i < nn; ++i) omega[i] = project(m, *sets[i], n);
    }
    cands[si] = std::move(c);
  });
  std::size_t best_i = 0;
  for (std::size_t i = 1; i < cands.size(); ++i)
    if (cands[i].value < cands[best_i].value - 1e-15) best_i = i;

  DistanceReport out;
  out.value = cands[best_i].value;
  out.minimizers = cands[best_i].omega;
  out.center = mean_of(cands[best_i].omega);
  out.method = "alternating";
  double lb = 0;  // d3 >= d2 >= half the pairwise set distances
  for (std::size_t i = 0; i < nn; ++i)
    for (std::size_t j = i + 1; j < nn; ++j)
      lb = std::max(lb, dist_set_set(*sets[i], *sets[j], n).lo / 2.0);
  out.lo = std::min(lb, out.value);
  out.hi = out.value;
  return out;
}

DistanceReport localized_distance(const std::vector<SetPtr>& sets, const SetPtr& anchor,
                                  const NormSpec& n) {
  if (!anchor) throw OpError(ErrKind::precondition, "localized_distance: null anchor");
  std::vector<SetPtr> extended = sets;
  extended.push_back(anchor);
  return d1_sets(extended, n);
}

// ---------- inequality chains ----------

namespace {

std::vector<ChainCheck> build_chain(double d1v, double d2v, double d3v, bool pair_case,
                                    double tol) {
  std::vector<ChainCheck> out;
  auto push = [&](const char* name, double lhs, double rhs) {
    out.push_back({name, lhs <= rhs + tol, rhs - lhs});
  };
  push("d2 <= d1", d2v, d1v);
  push("d1 <= 2 d2", d1v, 2 * d2v);
  push("d2 <= d3", d2v, d3v);
  push("d3 <= 2 d2", d3v, 2 * d2v);
  if (pair_case) {
    out.push_back({"d1 == 2 d2", std::fabs(d1v - 2 * d2v) <= tol, -std::fabs(d1v - 2 * d2v)});
    out.push_back({"d2 == d3", std::fabs(d2v - d3v) <= tol, -std::fabs(d2v - d3v)});
  }
  return out;
}

}  // namespace

std::vector<ChainCheck> check_distance_inequalities(const std::vector<Vec>& pts,
                                                    const NormSpec& n) {
  const double d1v = d1_points(pts, n);
  const double d2v = d2_points(pts, n).value;
  const double d3v = d3_points(pts, n);
  return build_chain(d1v, d2v, d3v, pts.size() == 2, kTolObj);
}

std::vector<ChainCheck> check_distance_inequalities(const std::vector<SetPtr>& sets,
                                                    const NormSpec& n) {
  auto r1 = d1_sets(sets, n);
  auto r2 = d2_sets(sets, n);
  auto r3 = d3_sets(sets, n);
  std::vector<ChainCheck> out;
  // Conservative comparisons through brackets: an inequality is flagged
  // only when the brackets certify a violation.
  auto push = [&](const char* name, double lhs_lo, double rhs_hi) {
    out.push_back({name, lhs_lo <= rhs_hi + kTolObj, rhs_hi - lhs_lo});
  };
  push("d2 <= d1", r2.lo, r1.hi);
  push("d1 <= 2 d2", r1.lo, 2 * r2.hi);
  push("d2 <= d3", r2.lo, r3.hi);
  push("d3 <= 2 d2", r3.lo, 2 * r2.hi);
  if (sets.size() == 2) {
    const bool eq = r1.lo <= 2 * r2.hi + kTolObj && 2 * r2.lo <= r1.hi + kTolObj;
    out.push_back({"d1 == 2 d2", eq, -(std::fabs(r1.value - 2 * r2.value))});
  }
  return out;
}

}  // namespace tv::geo
