#include "transversal/setdist.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace tv::geo {

namespace {

std::atomic<std::uint64_t> g_grid_points{0};

double euclid(const Vec& v) { return std::sqrt(dot(v, v)); }

}  // namespace

Vec leaf_anchor(const ConvexLeaf& leaf) {
  // Some point of the leaf, used as an iteration anchor.
  if (leaf.point) return add(*leaf.point, leaf.shift);
  if (leaf.ball) return add(leaf.ball->center, leaf.shift);
  if (leaf.affine) return add(leaf.affine->base, leaf.shift);
  if (leaf.poly) {
    LPProblem p(leaf.dim());
    for (std::size_t i = 0; i < leaf.poly->rows.size(); ++i)
      p.add_le(leaf.poly->rows[i], leaf.poly->rhs[i]);
    auto sol = lp_solve(p);
    if (sol.status != LPSolution::Status::optimal)
      throw OpError(ErrKind::precondition, "polyhedron is empty");
    return add(sol.x, leaf.shift);
  }
  throw OpError(ErrKind::numeric, "leaf_anchor: empty leaf");
}

Vec l1_ball_project(const Vec& v, double r) {
  double s = 0;
  for (double x : v) s += std::fabs(x);
  if (s <= r || r < 0) return v;
  if (r == 0) return zeros(v.size());
  Vec a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::fabs(v[i]);
  std::sort(a.begin(), a.end(), std::greater<double>());
  double csum = 0, lam = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    csum += a[k];
    const double t = (csum - r) / static_cast<double>(k + 1);
    if (k + 1 == a.size() || t >= a[k + 1]) {
      lam = t;
      break;
    }
  }
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = std::fabs(v[i]) - lam;
    out[i] = m > 0 ? (v[i] < 0 ? -m : m) : 0.0;
  }
  return out;
}

std::vector<ProjPiece> leaf_pieces(const ConvexLeaf& leaf) {
  std::vector<ProjPiece> out;
  const Vec shift = leaf.shift;
  if (leaf.point) {
    Vec p = add(*leaf.point, shift);
    out.push_back({[p](const Vec&) { return p; }});
    return out;
  }
  if (leaf.poly) {
    for (std::size_t i = 0; i < leaf.poly->rows.size(); ++i) {
      Vec a = leaf.poly->rows[i];
      const double b = leaf.poly->rhs[i] + dot(a, shift);
      const double nn = dot(a, a);
      if (nn < 1e-20) continue;
      out.push_back({[a, b, nn](const Vec& x) {
        const double viol = dot(a, x) - b;
        if (viol <= 0) return x;
        return axpy(x, -viol / nn, a);
      }});
    }
    return out;
  }
  if (leaf.affine) {
    const AffineRep a = *leaf.affine;
    const Vec base = add(a.base, shift);
    out.push_back({[a, base](const Vec& x) {
      if (a.directions.empty()) return base;
      const Vec r = sub(x, base);
      auto t = least_squares(a.directions, r);
      Vec y = base;
      if (t)
        for (std::size_t k = 0; k < a.directions.size(); ++k)
          y = axpy(y, (*t)[k], a.directions[k]);
      return y;
    }});
    return out;
  }
  if (leaf.ball) {
    const BallRep b = *leaf.ball;
    if (b.radius == kInf) {
      out.push_back({[](const Vec& x) { return x; }});
      return out;
    }
    const Vec c = add(b.center, shift);
    if (b.norm.kind == NormSpec::Kind::euclidean) {
      out.push_back({[c, b](const Vec& x) {
        const Vec w = sub(x, c);
        const double nw = euclid(w);
        if (nw <= b.radius) return x;
        return axpy(c, b.radius / nw, w);
      }});
      return out;
    }
    if (b.norm.kind == NormSpec::Kind::maximum) {
      out.push_back({[c, b](const Vec& x) {
        Vec y = x;
        for (std::size_t j = 0; j < y.size(); ++j)
          y[j] = std::clamp(y[j], c[j] - b.radius, c[j] + b.radius);
        return y;
      }});
      return out;
    }
    if (b.norm.kind == NormSpec::Kind::pnorm && b.norm.p == 1.0) {
      out.push_back({[c, b](const Vec& x) { return add(c, l1_ball_project(sub(x, c), b.radius)); }});
      return out;
    }
    throw OpError(ErrKind::unsupported, "euclidean projection onto general p-ball unsupported");
  }
  throw OpError(ErrKind::numeric, "leaf_pieces: empty leaf");
}

std::optional<Vec> dykstra_project(const Vec& x0, const std::vector<ProjPiece>& pieces,
                                   int max_sweeps) {
  if (pieces.empty()) return x0;
  Vec x = x0;
  std::vector<Vec> corr(pieces.size(), zeros(x0.size()));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const Vec z = add(x, corr[i]);
      const Vec y = pieces[i].proj(z);
      corr[i] = sub(z, y);
      for (std::size_t j = 0; j < x.size(); ++j) moved = std::max(moved, std::fabs(y[j] - x[j]));
      x = y;
    }
    if (moved < 1e-13) return x;
  }
  return x;  // best effort; caller checks memberships
}

// ---------- point-to-leaf distance ----------

namespace {

DistResult exact(double v, Vec nearest) {
  DistResult r;
  r.value = v;
  r.nearest = std::move(nearest);
  r.method = "exact-lp";
  r.lo = r.hi = v;
  return r;
}

// LP: min t s.t. y in leaf, norm(y - x) <= t.
DistResult dist_leaf_lp(const Vec& x, const ConvexLeaf& leaf, const NormSpec& n) {
  LPBuilder lp;
  const std::size_t d = x.size();
  const std::size_t yoff = lp.vars(d);
  const std::size_t t = lp.vars(1);
  emit_leaf_membership(lp, yoff, leaf);
  emit_norm_le(lp, n, d, yoff, SIZE_MAX, &x, t);
  LinExpr obj;
  obj.add(t, 1.0);
  lp.set_objective(obj);
  auto sol = lp_solve(lp.build());
  if (sol.status == LPSolution::Status::infeasible) {
    DistResult r;
    r.method = "exact-lp";
    return r;  // empty leaf
  }
  if (sol.status != LPSolution::Status::optimal)
    throw OpError(ErrKind::numeric, "dist_leaf_lp: unexpected LP status");
  Vec y(sol.x.begin(), sol.x.begin() + d);
  return exact(std::max(0.0, sol.x[d]), std::move(y));
}

// max-norm or 1-norm distance to a euclidean ball via bisection on t;
// feasibility check is a closed-form projection.
DistResult dist_ball2_poly_ambient(const Vec& x, const Vec& c, double r, const NormSpec& n) {
  const Vec w = sub(c, x);
  auto nearest_in_tball = [&](double t) {
    // point of the ambient-norm ball B_n(x,t) nearest (euclid) to c
    if (n.kind == NormSpec::Kind::maximum) {
      Vec y = x;
      for (std::size_t j = 0; j < y.size(); ++j) y[j] = std::clamp(c[j], x[j] - t, x[j] + t);
      return y;
    }
    return add(x, l1_ball_project(w, t));
  };
  const double d0 = euclid(w);
  if (d0 <= r) return exact(0.0, x);
  double lo = 0, hi = norm(w, n);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vec q = nearest_in_tball(mid);
    (euclid(sub(q, c)) <= r ? hi : lo) = mid;
  }
  Vec q = nearest_in_tball(hi);
  // Pull q to the ball surface along c->q to get a point of the ball itself.
  const Vec v = sub(q, c);
  const double nv = euclid(v);
  Vec y = nv > 0 ? axpy(c, r / nv, v) : q;
  const double val = norm(sub(y, x), n);
  return exact(val, std::move(y));
}

DistResult dist_point_leaf(const Vec& x, const ConvexLeaf& leaf, const NormSpec& n) {
  const std::size_t d = x.size();
  if (leaf.point) {
    Vec p = add(*leaf.point, leaf.shift);
    const double val = norm(sub(x, p), n);
    return exact(val, std::move(p));
  }
  if (leaf.ball && leaf.ball->radius == kInf) return exact(0.0, x);
  if (leaf_member(x, leaf)) return exact(0.0, x);

  const bool amb_poly = polyhedral_norm(n);
  const bool amb_euclid = n.kind == NormSpec::Kind::euclidean;

  if (leaf.ball) {
    const BallRep& b = *leaf.ball;
    const Vec c = add(b.center, leaf.shift);
    if (n == b.norm &&
        (amb_euclid || amb_poly)) {
      // same-norm projection: radial / clamp / l1-shrink
      const Vec w = sub(x, c);
      const double nw = norm(w, n);
      Vec y;
      if (amb_euclid)
        y = axpy(c, b.radius / nw, w);
      else if (n.kind == NormSpec::Kind::maximum) {
        y = x;
        for (std::size_t j = 0; j < d; ++j) y[j] = std::clamp(y[j], c[j] - b.radius, c[j] + b.radius);
      } else
        y = add(c, l1_ball_project(w, b.radius));
      const double val = norm(sub(x, y), n);
      return exact(val, std::move(y));
    }
    if (amb_euclid && polyhedral_norm(b.norm)) {
      // euclidean projection onto box / l1 ball: closed forms
      const Vec w = sub(x, c);
      Vec y;
      if (b.norm.kind == NormSpec::Kind::maximum) {
        y = x;
        for (std::size_t j = 0; j < d; ++j) y[j] = std::clamp(y[j], c[j] - b.radius, c[j] + b.radius);
      } else
        y = add(c, l1_ball_project(w, b.radius));
      const double val = euclid(sub(x, y));
      return exact(val, std::move(y));
    }
    if (amb_poly && b.norm.kind == NormSpec::Kind::euclidean)
      return dist_ball2_poly_ambient(x, c, b.radius, n);
    if (amb_poly && polyhedral_norm(b.norm)) return dist_leaf_lp(x, leaf, n);
    throw OpError(ErrKind::unsupported,
                  "dist_point_set: unsupported ambient norm / ball norm combination");
  }
  if (leaf.affine) {
    if (amb_euclid) {
      const AffineRep& a = *leaf.affine;
      const Vec base = add(a.base, leaf.shift);
      const Vec r = sub(x, base);
      Vec y = base;
      if (!a.directions.empty()) {
        auto t = least_squares(a.directions, r);
        if (t)
          for (std::size_t k = 0; k < a.directions.size(); ++k)
            y = axpy(y, (*t)[k], a.directions[k]);
      }
      const double val = euclid(sub(x, y));
      return exact(val, std::move(y));
    }
    if (amb_poly) return dist_leaf_lp(x, leaf, n);
    throw OpError(ErrKind::unsupported, "dist_point_set: general p-norm ambient unsupported");
  }
  if (leaf.poly) {
    if (amb_poly) return dist_leaf_lp(x, leaf, n);
    if (amb_euclid) {
      auto y = dykstra_project(x, leaf_pieces(leaf));
      if (!y || !leaf_member(*y, leaf, 1e-7)) {
        // Dykstra stalled (or empty polyhedron): settle it by LP feasibility.
        LPProblem p(d);
        for (std::size_t i = 0; i < leaf.poly->rows.size(); ++i)
          p.add_le(leaf.poly->rows[i], leaf.poly->rhs[i] + dot(leaf.poly->rows[i], leaf.shift));
        if (lp_solve(p).status == LPSolution::Status::infeasible) {
          DistResult r;
          r.method = "exact-lp";
          return r;
        }
        throw OpError(ErrKind::numeric, "dist_point_set: projection did not converge");
      }
      DistResult r;
      r.value = euclid(sub(x, *y));
      r.nearest = *y;
      r.method = "alternating";
      r.lo = std::max(0.0, r.value - 1e-9);
      r.hi = r.value;
      return r;
    }
    throw OpError(ErrKind::unsupported, "dist_point_set: general p-norm ambient unsupported");
  }
  throw OpError(ErrKind::numeric, "dist_point_leaf: empty leaf");
}

}  // namespace

DistResult dist_point_set(const Vec& x, const SetRep& s, const NormSpec& n) {
  require_dim(x, s.dim, "dist_point_set");
  auto leaves = convex_leaves(s);
  if (leaves.empty()) {
    DistResult r;
    r.method = "exact-lp";
    return r;  // empty union filtered to nothing: +inf sentinel
  }
  DistResult best;
  bool first = true;
  for (const auto& leaf : leaves) {
    DistResult r = dist_point_leaf(x, leaf, n);
    if (first || r.value < best.value - 1e-15) {
      best = r;
      first = false;
    }
    if (best.value == 0) break;
  }
  return best;
}

Vec project(const Vec& x, const SetRep& s, const NormSpec& n) {
  auto r = dist_point_set(x, s, n);
  if (!r.nearest)
    throw OpError(ErrKind::precondition, "project: set is empty");
  return *r.nearest;
}

// ---------- set-to-set distance ----------

namespace {

SetDistResult dist_leaf_pair(const ConvexLeaf& la, const ConvexLeaf& lb, const NormSpec& n) {
  SetDistResult out;
  const std::size_t d = la.dim();
  auto from_points = [&](double v, Vec a, Vec b, const char* method, double pad) {
    out.value = v;
    out.pa = std::move(a);
    out.pb = std::move(b);
    out.method = method;
    out.lo = std::max(0.0, v - pad);
    out.hi = v;
  };

  // Point leaves reduce to point-set distance.
  if (la.point) {
    const Vec p = add(*la.point, la.shift);
    DistResult r = dist_point_leaf(p, lb, n);
    if (!r.nearest) return out;
    from_points(r.value, p, *r.nearest, r.method.c_str(), r.value - r.lo);
    return out;
  }
  if (lb.point) {
    auto swapped = dist_leaf_pair(lb, la, n);
    std::swap(swapped.pa, swapped.pb);
    return swapped;
  }
  if ((la.ball && la.ball->radius == kInf) || (lb.ball && lb.ball->radius == kInf)) {
    const Vec p = leaf_anchor(la.ball && la.ball->radius == kInf ? lb : la);
    from_points(0.0, p, p, "exact-lp", 0.0);
    return out;
  }

  const bool amb_poly = polyhedral_norm(n);
  if (amb_poly && polyhedral_leaf(la) && polyhedral_leaf(lb)) {
    LPBuilder lp;
    const std::size_t xo = lp.vars(d), yo = lp.vars(d), t = lp.vars(1);
    emit_leaf_membership(lp, xo, la);
    emit_leaf_membership(lp, yo, lb);
    emit_norm_le(lp, n, d, xo, yo, nullptr, t);
    LinExpr obj;
    obj.add(t, 1.0);
    lp.set_objective(obj);
    auto sol = lp_solve(lp.build());
    if (sol.status == LPSolution::Status::infeasible) return out;  // an empty leaf
    if (sol.status != LPSolution::Status::optimal)
      throw OpError(ErrKind::numeric, "dist_set_set: unexpected LP status");
    from_points(std::max(0.0, sol.x[2 * d]), Vec(sol.x.begin(), sol.x.begin() + d),
                Vec(sol.x.begin() + d, sol.x.begin() + 2 * d), "exact-lp", 0.0);
    return out;
  }

  if (n.kind == NormSpec::Kind::euclidean) {
    if (la.affine && lb.affine) {
      // min || (a0 + Da s) - (b0 + Db t) ||_2 by joint least squares.
      std::vector<Vec> cols = la.affine->directions;
      for (const Vec& w : lb.affine->directions) cols.push_back(scale(w, -1.0));
      const Vec a0 = add(la.affine->base, la.shift), b0 = add(lb.affine->base, lb.shift);
      const Vec r = sub(b0, a0);
      Vec pa = a0, pb = b0;
      if (!cols.empty()) {
        auto t = least_squares(cols, r);
        if (t) {
          for (std::size_t k = 0; k < la.affine->directions.size(); ++k)
            pa = axpy(pa, (*t)[k], la.affine->directions[k]);
          for (std::size_t k = 0; k < lb.affine->directions.size(); ++k)
            pb = axpy(pb, (*t)[la.affine->directions.size() + k], lb.affine->directions[k]);
        }
      }
      const double val = euclid(sub(pa, pb));
      from_points(val, std::move(pa), std::move(pb), "exact-lp", 0.0);
      return out;
    }
    // Alternating projections between two convex leaves; deterministic seeds,
    // merge by (value, seed index).
    const auto pa_pieces = leaf_pieces(la), pb_pieces = leaf_pieces(lb);
    auto proj_a = [&](const Vec& v) { return dykstra_project(v, pa_pieces).value_or(v); };
    auto proj_b = [&](const Vec& v) { return dykstra_project(v, pb_pieces).value_or(v); };
    Vec sa, sb;
    try {
      sa = leaf_anchor(la);
      sb = leaf_anchor(lb);
    } catch (const OpError&) {
      return out;  // empty polyhedron leaf
    }
    std::vector<Vec> seeds = {sa, sb, scale(add(sa, sb), 0.5)};
    double best = kInf, best_gap = 0;
    Vec bx, by;
    for (const Vec& s0 : seeds) {
      Vec x = proj_a(s0), y = proj_b(x);
      double prev = kInf;
      for (int it = 0; it < 4000; ++it) {
        x = proj_a(y);
        y = proj_b(x);
        const double cur = euclid(sub(x, y));
        if (prev - cur < 1e-14 * (1 + cur)) {
          best_gap = std::max(0.0, prev - cur);
          break;
        }
        prev = cur;
      }
      const double v = euclid(sub(x, y));
      if (v < best - 1e-15) {
        best = v;
        bx = x;
        by = y;
      }
    }
    if (!leaf_member(bx, la, 1e-7) || !leaf_member(by, lb, 1e-7))
      throw OpError(ErrKind::numeric, "dist_set_set: alternating projections failed memberships");
    from_points(best, std::move(bx), std::move(by), "alternating", std::max(1e-9, 10 * best_gap));
    return out;
  }
  throw OpError(ErrKind::unsupported,
                "dist_set_set: unsupported leaf/norm combination");
}

}  // namespace

SetDistResult dist_set_set(const SetRep& a, const SetRep& b, const NormSpec& n) {
  if (a.dim != b.dim) throw OpError(ErrKind::precondition, "dist_set_set: dimension mismatch");
  auto la = convex_leaves(a), lb = convex_leaves(b);
  SetDistResult best;
  bool first = true;
  for (const auto& pa : la)
    for (const auto& pb : lb) {
      SetDistResult r = dist_leaf_pair(pa, pb, n);
      if (!r.pa) continue;  // empty leaf
      if (first || r.value < best.value - 1e-15) {
        best = r;
        first = false;
      }
      if (!first && best.value == 0) return best;
    }
  return best;
}

// ---------- intersections ----------

Factor translated_factor(SetPtr set, const Vec& minus_shift) {
  Factor f;
  f.set = std::move(set);
  f.shift = scale(minus_shift, -1.0);
  return f;
}

bool factor_member(const Vec& x, const Factor& f, double tol) {
  const Vec z = sub(x, f.shift);
  if (!member(z, *f.set, tol)) return false;
  if (f.local) {
    const double r = norm(sub(z, f.local->center), f.local->norm);
    if (f.local_open) return r < f.local->radius - kTolStrict;
    return r <= f.local->radius + tol;
  }
  return true;
}

namespace {

struct FLeaf {
  ConvexLeaf leaf;                 // shift already includes the factor shift
  std::optional<BallRep> ball;     // ambient coordinates
  bool ball_open = false;
};

std::vector<FLeaf> factor_leaves(const Factor& f) {
  std::vector<FLeaf> out;
  for (ConvexLeaf l : convex_leaves(*f.set)) {
    l.shift = add(l.shift, f.shift);
    FLeaf fl;
    fl.leaf = std::move(l);
    if (f.local) {
      BallRep b = *f.local;
      b.center = add(b.center, f.shift);
      fl.ball = b;
      fl.ball_open = f.local_open;
    }
    out.push_back(std::move(fl));
  }
  return out;
}

bool fleaf_member_closed(const Vec& x, const FLeaf& fl, double tol = kTolMember) {
  if (!leaf_member(x, fl.leaf, tol)) return false;
  if (fl.ball) return norm(sub(x, fl.ball->center), fl.ball->norm) <= fl.ball->radius + tol;
  return true;
}

// Interior slack of open balls at x: max over open balls of (norm - radius).
// Negative means strictly inside.
double open_slack(const Vec& x, const FLeaf& fl) {
  if (!fl.ball || !fl.ball_open) return -kInf;
  return norm(sub(x, fl.ball->center), fl.ball->norm) - fl.ball->radius;
}

double fleaf_euclid_lb(const Vec& x, const FLeaf& fl) {
  double lb = euclid_lb_dist(x, fl.leaf);
  if (fl.ball) {
    ConvexLeaf bl;
    bl.ball = &*fl.ball;
    bl.shift = zeros(x.size());
    lb = std::max(lb, euclid_lb_dist(x, bl));
  }
  return lb;
}

bool fleaf_polyhedral(const FLeaf& fl) {
  if (!polyhedral_leaf(fl.leaf)) return false;
  if (fl.ball && !polyhedral_norm(fl.ball->norm)) return false;
  return true;
}

void emit_fleaf(LPBuilder& lp, std::size_t xoff, const FLeaf& fl,
                std::optional<std::size_t> open_slack_var) {
  emit_leaf_membership(lp, xoff, fl.leaf);
  if (fl.ball) {
    const std::size_t d = fl.leaf.dim();
    const std::size_t t = lp.vars(1);
    emit_norm_le(lp, fl.ball->norm, d, xoff, SIZE_MAX, &fl.ball->center, t);
    if (fl.ball_open && open_slack_var) {
      LinExpr e;  // t <= radius + s
      e.add(t, 1.0).add(*open_slack_var, -1.0);
      lp.add(e, '<', fl.ball->radius);
    } else {
      LinExpr e;
      e.add(t, 1.0);
      lp.add(e, '<', fl.ball->radius);
    }
  }
}

struct GridSpec {
  Vec lo, hi;
  double h;
  std::vector<std::size_t> counts;
};

std::optional<Box> fleaf_box(const FLeaf& fl) {
  std::optional<Box> atom_box;
  const ConvexLeaf& l = fl.leaf;
  if (l.point)
    atom_box = Box{add(*l.point, l.shift), add(*l.point, l.shift)};
  else if (l.poly) {
    SetRep s;
    s.dim = l.dim();
    s.v = *l.poly;
    auto b = bounding_box(s);
    if (b) atom_box = Box{add(b->lo, l.shift), add(b->hi, l.shift)};
  } else if (l.ball && l.ball->radius < kInf) {
    Vec c = add(l.ball->center, l.shift);
    atom_box = Box{Vec(c.size()), Vec(c.size())};
    for (std::size_t j = 0; j < c.size(); ++j) {
      atom_box->lo[j] = c[j] - l.ball->radius;
      atom_box->hi[j] = c[j] + l.ball->radius;
    }
  }
  std::optional<Box> ball_box;
  if (fl.ball) {
    ball_box = Box{Vec(fl.ball->center.size()), Vec(fl.ball->center.size())};
    for (std::size_t j = 0; j < fl.ball->center.size(); ++j) {
      ball_box->lo[j] = fl.ball->center[j] - fl.ball->radius;
      ball_box->hi[j] = fl.ball->center[j] + fl.ball->radius;
    }
  }
  if (atom_box && ball_box) {
    Box b = *atom_box;
    for (std::size_t j = 0; j < b.lo.size(); ++j) {
      b.lo[j] = std::max(b.lo[j], ball_box->lo[j]);
      b.hi[j] = std::min(b.hi[j], ball_box->hi[j]);
    }
    return b;
  }
  return atom_box ? atom_box : ball_box;
}

}  // namespace

EmptinessResult intersection_empty_grid(const IntersectionQuery& q, double h_override) {
  EmptinessResult res;
  res.method = "grid";
  const std::size_t d = q.factors.empty() ? 0 : q.factors[0].set->dim;
  if (q.factors.empty()) throw OpError(ErrKind::precondition, "intersection: empty collection");
  if (d > 3) throw OpError(ErrKind::unsupported, "grid emptiness supports dimension <= 3");

  std::vector<std::vector<FLeaf>> fls;
  for (const Factor& f : q.factors) fls.push_back(factor_leaves(f));

  // Region: intersection of available factor boxes (hull over that factor's leaves).
  std::optional<Box> region;
  double min_local_radius = kInf;
  for (const auto& leaves : fls) {
    std::optional<Box> fbox;
    bool all_have = true;
    for (const auto& fl : leaves) {
      auto b = fleaf_box(fl);
      if (!b) {
        all_have = false;
        break;
      }
      if (!fbox)
        fbox = b;
      else
        for (std::size_t j = 0; j < d; ++j) {
          fbox->lo[j] = std::min(fbox->lo[j], b->lo[j]);
          fbox->hi[j] = std::max(fbox->hi[j], b->hi[j]);
        }
      if (fl.ball) min_local_radius = std::min(min_local_radius, fl.ball->radius);
    }
    if (!all_have || !fbox) continue;
    if (!region)
      region = fbox;
    else
      for (std::size_t j = 0; j < d; ++j) {
        region->lo[j] = std::max(region->lo[j], fbox->lo[j]);
        region->hi[j] = std::min(region->hi[j], fbox->hi[j]);
      }
  }
  if (!region) throw OpError(ErrKind::precondition, "grid emptiness: region unbounded");
  double diam = 0, gap = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double side = region->hi[j] - region->lo[j];
    diam = std::max(diam, side);
    gap = std::max(gap, -side);
  }
  if (gap > 0) {  // empty region: bounding boxes certify disjointness
    res.verdict = EmptinessResult::Verdict::empty;
    res.margin = gap;
    return res;
  }
  double h = h_override > 0 ? h_override
                            : (min_local_radius < kInf ? min_local_radius / 64.0 : diam / 64.0);
  if (h <= 0) h = std::max(diam / 64.0, 1e-9);
  std::vector<std::size_t> counts(d);
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) {
    counts[j] = static_cast<std::size_t>(std::floor((region->hi[j] - region->lo[j]) / h)) + 1;
    total *= counts[j];
    if (total > 4000000) throw OpError(ErrKind::budget, "grid emptiness: node budget exceeded");
  }

  const double band = kTolFeas + h;
  bool any_band = false;
  double best_maxlb = kInf;
  Vec node(d);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    for (std::size_t j = 0; j < d; ++j) {
      idx[j] = rem % counts[j];
      rem /= counts[j];
      node[j] = region->lo[j] + static_cast<double>(idx[j]) * h;
    }
    g_grid_points.fetch_add(1, std::memory_order_relaxed);
    double maxlb = 0;
    bool in_band = true;
    for (const auto& leaves : fls) {
      double f_lb = kInf;
      for (const auto& fl : leaves) f_lb = std::min(f_lb, fleaf_euclid_lb(node, fl));
      maxlb = std::max(maxlb, f_lb);
      if (f_lb > band) {
        in_band = false;
        break;
      }
    }
    best_maxlb = std::min(best_maxlb, maxlb);
    if (!in_band) continue;
    any_band = true;
    // Exact membership check including strictness for open balls.
    bool witness = true;
    for (const auto& leaves : fls) {
      bool ok = false;
      for (const auto& fl : leaves)
        if (fleaf_member_closed(node, fl) && open_slack(node, fl) < -kTolStrict) ok = true;
      if (!ok) {
        witness = false;
        break;
      }
    }
    if (witness) {
      res.verdict = EmptinessResult::Verdict::nonempty;
      res.witness = node;
      res.margin = band - best_maxlb;
      return res;
    }
  }
  if (!any_band) {
    res.verdict = EmptinessResult::Verdict::empty;
    res.margin = best_maxlb - band;
    return res;
  }
  res.verdict = EmptinessResult::Verdict::inconclusive;
  res.margin = 0;
  return res;
}

EmptinessResult intersection_empty(const IntersectionQuery& q) {
  if (q.factors.empty()) throw OpError(ErrKind::precondition, "intersection: empty collection");
  const std::size_t d = q.factors[0].set->dim;
  for (const auto& f : q.factors)
    if (f.set->dim != d) throw OpError(ErrKind::precondition, "intersection: dimension mismatch");

  std::vector<std::vector<FLeaf>> fls;
  for (const Factor& f : q.factors) fls.push_back(factor_leaves(f));

  // Tier 1: enumeration over a finite factor.
  for (std::size_t k = 0; k < fls.size(); ++k) {
    bool all_points = true;
    for (const auto& fl : fls[k])
      if (!fl.leaf.point) all_points = false;
    if (!all_points) continue;
    EmptinessResult res;
    res.method = "enumeration";
    double best_viol = kInf;
    for (const auto& fl : fls[k]) {
      const Vec cand = add(*fl.leaf.point, fl.leaf.shift);
      if (fl.ball) {
        const double r = norm(sub(cand, fl.ball->center), fl.ball->norm);
        if (fl.ball_open ? r >= fl.ball->radius - kTolStrict : r > fl.ball->radius + kTolMember)
          continue;
      }
      double viol = 0;
      bool ok = true;
      for (std::size_t j = 0; j < fls.size(); ++j) {
        if (j == k) continue;
        bool member_any = false;
        double f_lb = kInf;
        for (const auto& ofl : fls[j]) {
          f_lb = std::min(f_lb, fleaf_euclid_lb(cand, ofl));
          if (fleaf_member_closed(cand, ofl) && open_slack(cand, ofl) < -kTolStrict)
            member_any = true;
        }
        if (!member_any) {
          ok = false;
          viol = std::max(viol, f_lb);
        }
      }
      if (ok) {
        res.verdict = EmptinessResult::Verdict::nonempty;
        res.witness = cand;
        res.margin = 0;
        return res;
      }
      best_viol = std::min(best_viol, viol);
    }
    res.verdict = EmptinessResult::Verdict::empty;
    res.margin = best_viol;
    return res;
  }

  // Tier 2: LP over the cartesian product of polyhedral leaf choices.
  {
    bool all_poly = true;
    std::size_t systems = 1;
    for (const auto& leaves : fls) {
      for (const auto& fl : leaves)
        if (!fleaf_polyhedral(fl)) all_poly = false;
      systems *= std::max<std::size_t>(1, leaves.size());
      if (systems > 4096) all_poly = false;
    }
    if (all_poly) {
      EmptinessResult res;
      res.method = "lp-infeasible";
      double worst_margin = kInf;
      std::vector<std::size_t> choice(fls.size(), 0);
      for (std::size_t sys = 0; sys < systems; ++sys) {
        std::size_t rem = sys;
        for (std::size_t j = 0; j < fls.size(); ++j) {
          choice[j] = rem % fls[j].size();
          rem /= fls[j].size();
        }
        LPBuilder lp;
        const std::size_t xo = lp.vars(d);
        bool has_open = false;
        for (std::size_t j = 0; j < fls.size(); ++j)
          if (fls[j][choice[j]].ball_open) has_open = true;
        std::optional<std::size_t> svar;
        if (has_open) svar = lp.vars(1);
        for (std::size_t j = 0; j < fls.size(); ++j) emit_fleaf(lp, xo, fls[j][choice[j]], svar);
        if (svar) {
          LinExpr obj;
          obj.add(*svar, 1.0);
          lp.set_objective(obj);
        }
        auto sol = lp_solve(lp.build());
        if (sol.status == LPSolution::Status::infeasible) {
          worst_margin = std::min(worst_margin, sol.phase1);
          continue;
        }
        if (sol.status == LPSolution::Status::unbounded && svar) {
          // re-solve with the slack bounded below to recover a concrete witness
          LPBuilder lp2;
          const std::size_t xo2 = lp2.vars(d);
          std::optional<std::size_t> svar2 = lp2.vars(1);
          for (std::size_t j = 0; j < fls.size(); ++j) emit_fleaf(lp2, xo2, fls[j][choice[j]], svar2);
          lp2.lower_bound(*svar2, -1.0);
          LinExpr obj;
          obj.add(*svar2, 1.0);
          lp2.set_objective(obj);
          auto sol2 = lp_solve(lp2.build());
          if (sol2.status != LPSolution::Status::optimal)
            throw OpError(ErrKind::numeric, "intersection_empty: slack LP failed");
          sol = sol2;
        }
        if (sol.status != LPSolution::Status::optimal)
          throw OpError(ErrKind::numeric, "intersection_empty: unexpected LP status");
        const double s_slack = svar ? sol.x[d] : -kInf;
        if (!svar || s_slack < -kTolStrict) {
          res.verdict = EmptinessResult::Verdict::nonempty;
          res.witness = Vec(sol.x.begin(), sol.x.begin() + d);
          res.margin = svar ? -s_slack : 0;
          return res;
        }
        // feasible closed but boundary-only for the open balls
        worst_margin = std::min(worst_margin, std::max(0.0, s_slack));
      }
      res.verdict = EmptinessResult::Verdict::empty;
      res.margin = worst_margin == kInf ? 0 : worst_margin;
      return res;
    }
  }

  // Tier 3: Dykstra witness search over leaf choices (euclidean geometry).
  {
    std::size_t systems = 1;
    bool ok = true;
    for (const auto& leaves : fls) {
      systems *= std::max<std::size_t>(1, leaves.size());
      if (systems > 1024) ok = false;
    }
    if (ok) {
      std::vector<std::size_t> choice(fls.size(), 0);
      for (std::size_t sys = 0; sys < systems && ok; ++sys) {
        std::size_t rem = sys;
        for (std::size_t j = 0; j < fls.size(); ++j) {
          choice[j] = rem % fls[j].size();
          rem /= fls[j].size();
        }
        std::vector<ProjPiece> pieces;
        bool supported = true;
        Vec seed = zeros(d);
        int seeds_n = 0;
        for (std::size_t j = 0; j < fls.size(); ++j) {
          const FLeaf& fl = fls[j][choice[j]];
          try {
            auto pp = leaf_pieces(fl.leaf);
            pieces.insert(pieces.end(), pp.begin(), pp.end());
            seed = add(seed, leaf_anchor(fl.leaf));
            ++seeds_n;
          } catch (const OpError&) {
            supported = false;
            break;
          }
          if (fl.ball) {
            ConvexLeaf bl;
            bl.ball = &*fl.ball;
            bl.shift = zeros(d);
            try {
              auto pp = leaf_pieces(bl);
              pieces.insert(pieces.end(), pp.begin(), pp.end());
            } catch (const OpError&) {
              supported = false;
              break;
            }
          }
        }
        if (!supported) continue;
        seed = scale(seed, seeds_n ? 1.0 / seeds_n : 1.0);
        auto w = dykstra_project(seed, pieces);
        if (!w) continue;
        bool all_member = true;
        for (std::size_t j = 0; j < fls.size(); ++j) {
          const FLeaf& fl = fls[j][choice[j]];
          if (!fleaf_member_closed(*w, fl, 1e-8) || open_slack(*w, fl) >= -kTolStrict)
            all_member = false;
        }
        if (all_member) {
          EmptinessResult res;
          res.method = "dykstra";
          res.verdict = EmptinessResult::Verdict::nonempty;
          res.witness = *w;
          return res;
        }
      }
    }
  }

  // Tier 4: grid (d <= 3), else inconclusive.
  if (d <= 3) {
    try {
      return intersection_empty_grid(q);
    } catch (const OpError&) {
      // fall through to inconclusive
    }
  }
  EmptinessResult res;
  res.method = "none";
  res.verdict = EmptinessResult::Verdict::inconclusive;
  return res;
}

DistResult dist_point_intersection(const Vec& x, const IntersectionQuery& q) {
  if (q.factors.empty()) throw OpError(ErrKind::precondition, "intersection: empty collection");
  const std::size_t d = q.factors[0].set->dim;
  require_dim(x, d, "dist_point_intersection");
  for (const auto& f : q.factors)
    if (f.local_open)
      throw OpError(ErrKind::unsupported, "dist_point_intersection: open balls unsupported");

  std::vector<std::vector<FLeaf>> fls;
  for (const Factor& f : q.factors) fls.push_back(factor_leaves(f));

  // Enumeration tier.
  for (std::size_t k = 0; k < fls.size(); ++k) {
    bool all_points = true;
    for (const auto& fl : fls[k])
      if (!fl.leaf.point) all_points = false;
    if (!all_points) continue;
    DistResult best;
    best.method = "exact-lp";
    for (const auto& fl : fls[k]) {
      const Vec cand = add(*fl.leaf.point, fl.leaf.shift);
      if (fl.ball &&
          norm(sub(cand, fl.ball->center), fl.ball->norm) > fl.ball->radius + kTolMember)
        continue;
      bool ok = true;
      for (std::size_t j = 0; j < fls.size() && ok; ++j) {
        if (j == k) continue;
        bool m = false;
        for (const auto& ofl : fls[j])
          if (fleaf_member_closed(cand, ofl)) m = true;
        ok = m;
      }
      if (!ok) continue;
      const double v = norm(sub(x, cand), q.ambient);
      if (v < best.value) {
        best.value = v;
        best.nearest = cand;
        best.lo = best.hi = v;
      }
    }
    return best;
  }

  const bool amb_poly = polyhedral_norm(q.ambient);
  bool all_poly = true;
  std::size_t systems = 1;
  for (const auto& leaves : fls) {
    for (const auto& fl : leaves)
      if (!fleaf_polyhedral(fl)) all_poly = false;
    systems *= std::max<std::size_t>(1, leaves.size());
    if (systems > 4096) all_poly = false;
  }
  if (amb_poly && all_poly) {
    DistResult best;
    best.method = "exact-lp";
    std::vector<std::size_t> choice(fls.size(), 0);
    for (std::size_t sys = 0; sys < systems; ++sys) {
      std::size_t rem = sys;
      for (std::size_t j = 0; j < fls.size(); ++j) {
        choice[j] = rem % fls[j].size();
        rem /= fls[j].size();
      }
      LPBuilder lp;
      const std::size_t yo = lp.vars(d), t = lp.vars(1);
      for (std::size_t j = 0; j < fls.size(); ++j) emit_fleaf(lp, yo, fls[j][choice[j]], std::nullopt);
      emit_norm_le(lp, q.ambient, d, yo, SIZE_MAX, &x, t);
      LinExpr obj;
      obj.add(t, 1.0);
      lp.set_objective(obj);
      auto sol = lp_solve(lp.build());
      if (sol.status == LPSolution::Status::infeasible) continue;
      if (sol.status != LPSolution::Status::optimal)
        throw OpError(ErrKind::numeric, "dist_point_intersection: unexpected LP status");
      if (sol.x[d] < best.value) {
        best.value = std::max(0.0, sol.x[d]);
        best.nearest = Vec(sol.x.begin(), sol.x.begin() + d);
        best.lo = best.hi = best.value;
      }
    }
    return best;
  }

  if (q.ambient.kind == NormSpec::Kind::euclidean) {
    DistResult best;
    best.method = "alternating";
    std::vector<std::size_t> choice(fls.size(), 0);
    std::size_t sys_total = 1;
    for (const auto& leaves : fls) sys_total *= std::max<std::size_t>(1, leaves.size());
    if (sys_total > 1024)
      throw OpError(ErrKind::budget, "dist_point_intersection: too many leaf systems");
    for (std::size_t sys = 0; sys < sys_total; ++sys) {
      std::size_t rem = sys;
      std::vector<ProjPiece> pieces;
      double lb = 0;
      bool supported = true;
      for (std::size_t j = 0; j < fls.size(); ++j) {
        choice[j] = rem % fls[j].size();
        rem /= fls[j].size();
        const FLeaf& fl = fls[j][choice[j]];
        lb = std::max(lb, fleaf_euclid_lb(x, fl));
        try {
          auto pp = leaf_pieces(fl.leaf);
          pieces.insert(pieces.end(), pp.begin(), pp.end());
          if (fl.ball) {
            ConvexLeaf bl;
            bl.ball = &*fl.ball;
            bl.shift = zeros(d);
            auto bp = leaf_pieces(bl);
            pieces.insert(pieces.end(), bp.begin(), bp.end());
          }
        } catch (const OpError&) {
          supported = false;
        }
      }
      if (!supported) continue;
      auto w = dykstra_project(x, pieces);
      if (!w) continue;
      bool all_member = true;
      for (std::size_t j = 0; j < fls.size(); ++j)
        if (!fleaf_member_closed(*w, fls[j][choice[j]], 1e-8)) all_member = false;
      if (!all_member) continue;  // this leaf system is (likely) empty
      const double v = euclid(sub(x, *w));
      if (v < best.value) {
        best.value = v;
        best.nearest = *w;
        best.lo = std::max(lb, v - 1e-8);
        best.hi = v;
      }
    }
    return best;  // +inf when every system failed => treated as empty upstream
  }

  throw OpError(ErrKind::unsupported, "dist_point_intersection: unsupported configuration");
}

std::uint64_t grid_points_count() { return g_grid_points.load(std::memory_order_relaxed); }

}  // namespace tv::geo
