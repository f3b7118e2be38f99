#include "transversal/sets.hpp"

#include <cmath>

namespace tv::geo {

namespace {

std::size_t checked_dim(const std::vector<Vec>& vv, std::size_t d, const char* what) {
  for (const Vec& v : vv) require_dim(v, d, what);
  return d;
}

}  // namespace

SetPtr make_cloud(std::vector<Vec> pts) {
  if (pts.empty()) throw OpError(ErrKind::precondition, "point_cloud: empty collection");
  const std::size_t d = pts[0].size();
  checked_dim(pts, d, "point_cloud");
  auto s = std::make_shared<SetRep>();
  s->dim = d;
  s->v = PointCloud{std::move(pts)};
  return s;
}

SetPtr make_point(Vec p) { return make_cloud({std::move(p)}); }

SetPtr make_poly(std::vector<Vec> rows, Vec rhs) {
  if (rows.empty()) throw OpError(ErrKind::precondition, "h_polyhedron: empty row system");
  if (rows.size() != rhs.size())
    throw OpError(ErrKind::precondition, "h_polyhedron: rows/rhs size mismatch");
  const std::size_t d = rows[0].size();
  checked_dim(rows, d, "h_polyhedron");
  auto s = std::make_shared<SetRep>();
  s->dim = d;
  s->v = HPolyhedron{std::move(rows), std::move(rhs)};
  return s;
}

SetPtr make_ball(Vec center, double radius, NormSpec n) {
  if (!(radius >= 0)) throw OpError(ErrKind::precondition, "ball: negative radius");
  auto s = std::make_shared<SetRep>();
  s->dim = center.size();
  s->v = BallRep{std::move(center), radius, n};
  return s;
}

SetPtr make_affine(Vec base, std::vector<Vec> directions) {
  const std::size_t d = base.size();
  checked_dim(directions, d, "affine_subspace");
  auto s = std::make_shared<SetRep>();
  s->dim = d;
  s->v = AffineRep{std::move(base), std::move(directions)};
  return s;
}

SetPtr make_shift(SetPtr inner, Vec offset) {
  if (!inner) throw OpError(ErrKind::precondition, "shifted: null inner set");
  require_dim(offset, inner->dim, "shifted");
  bool all_zero = true;
  for (double x : offset)
    if (x != 0) all_zero = false;
  if (all_zero) return inner;
  if (const auto* sh = std::get_if<ShiftedRep>(&inner->v))
    return make_shift(sh->inner, add(sh->offset, offset));
  auto s = std::make_shared<SetRep>();
  s->dim = inner->dim;
  s->v = ShiftedRep{std::move(inner), std::move(offset)};
  return s;
}

SetPtr make_union(std::vector<SetPtr> parts) {
  if (parts.empty()) throw OpError(ErrKind::precondition, "finite_union: empty collection");
  const std::size_t d = parts[0]->dim;
  for (const auto& p : parts)
    if (!p || p->dim != d) throw OpError(ErrKind::precondition, "finite_union: dimension mismatch");
  auto s = std::make_shared<SetRep>();
  s->dim = d;
  s->v = UnionRep{std::move(parts)};
  return s;
}

SetPtr whole_space(std::size_t d) { return make_ball(zeros(d), kInf, NormSpec::euclidean()); }

SetPtr make_box(const Vec& lo, const Vec& hi) {
  const std::size_t d = lo.size();
  require_dim(hi, d, "box");
  std::vector<Vec> rows;
  Vec rhs;
  for (std::size_t j = 0; j < d; ++j) {
    Vec r = zeros(d);
    r[j] = 1.0;
    rows.push_back(r);
    rhs.push_back(hi[j]);
    r[j] = -1.0;
    rows.push_back(r);
    rhs.push_back(-lo[j]);
  }
  return make_poly(std::move(rows), std::move(rhs));
}

bool is_whole_space(const SetRep& s) {
  if (const auto* b = std::get_if<BallRep>(&s.v)) return b->radius == kInf;
  if (const auto* sh = std::get_if<ShiftedRep>(&s.v)) return is_whole_space(*sh->inner);
  return false;
}

bool member(const Vec& x, const SetRep& s, double tol) {
  require_dim(x, s.dim, "member");
  struct V {
    const Vec& x;
    double tol;
    bool operator()(const PointCloud& c) const {
      for (const Vec& p : c.points) {
        double m = 0;
        for (std::size_t i = 0; i < p.size(); ++i) m = std::max(m, std::fabs(p[i] - x[i]));
        if (m <= tol) return true;
      }
      return false;
    }
    bool operator()(const HPolyhedron& h) const {
      for (std::size_t i = 0; i < h.rows.size(); ++i) {
        const double scale = 1.0 + std::sqrt(dot(h.rows[i], h.rows[i]));
        if (dot(h.rows[i], x) - h.rhs[i] > tol * scale) return false;
      }
      return true;
    }
    bool operator()(const BallRep& b) const {
      if (b.radius == kInf) return true;
      return norm(sub(x, b.center), b.norm) <= b.radius + tol;
    }
    bool operator()(const AffineRep& a) const {
      if (a.directions.empty()) {
        double m = 0;
        for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(x[i] - a.base[i]));
        return m <= tol;
      }
      const Vec r = sub(x, a.base);
      auto t = least_squares(a.directions, r);
      if (!t) return false;
      Vec res = r;
      for (std::size_t k = 0; k < a.directions.size(); ++k)
        res = axpy(res, -(*t)[k], a.directions[k]);
      return std::sqrt(dot(res, res)) <= tol;
    }
    bool operator()(const ShiftedRep& sh) const {
      return member(sub(x, sh.offset), *sh.inner, tol);
    }
    bool operator()(const UnionRep& u) const {
      for (const auto& p : u.parts)
        if (member(x, *p, tol)) return true;
      return false;
    }
  };
  return std::visit(V{x, tol}, s.v);
}

std::optional<Box> bounding_box(const SetRep& s) {
  struct V {
    std::size_t d;
    std::optional<Box> operator()(const PointCloud& c) const {
      Box b{c.points[0], c.points[0]};
      for (const Vec& p : c.points)
        for (std::size_t j = 0; j < d; ++j) {
          b.lo[j] = std::min(b.lo[j], p[j]);
          b.hi[j] = std::max(b.hi[j], p[j]);
        }
      return b;
    }
    std::optional<Box> operator()(const HPolyhedron& h) const {
      Box b{Vec(d), Vec(d)};
      for (std::size_t j = 0; j < d; ++j) {
        for (int dir = 0; dir < 2; ++dir) {
          LPProblem p(d);
          p.c = zeros(d);
          p.c[j] = dir == 0 ? 1.0 : -1.0;
          for (std::size_t i = 0; i < h.rows.size(); ++i) p.add_le(h.rows[i], h.rhs[i]);
          auto sol = lp_solve(p);
          if (sol.status != LPSolution::Status::optimal) return std::nullopt;
          (dir == 0 ? b.lo[j] : b.hi[j]) = (dir == 0 ? sol.value : -sol.value);
        }
      }
      return b;
    }
    std::optional<Box> operator()(const BallRep& b) const {
      if (b.radius == kInf) return std::nullopt;
      // The norm ball is contained in the max-norm box of the same radius
      // scaled by the norm's coordinate reach; the max-box always contains it.
      double reach = b.radius;
      Box box{Vec(d), Vec(d)};
      for (std::size_t j = 0; j < d; ++j) {
        box.lo[j] = b.center[j] - reach;
        box.hi[j] = b.center[j] + reach;
      }
      return box;
    }
    std::optional<Box> operator()(const AffineRep& a) const {
      bool nontrivial = false;
      for (const Vec& dir : a.directions)
        if (dot(dir, dir) > 1e-20) nontrivial = true;
      if (nontrivial) return std::nullopt;
      return Box{a.base, a.base};
    }
    std::optional<Box> operator()(const ShiftedRep& sh) const {
      auto inner = bounding_box(*sh.inner);
      if (!inner) return std::nullopt;
      return Box{add(inner->lo, sh.offset), add(inner->hi, sh.offset)};
    }
    std::optional<Box> operator()(const UnionRep& u) const {
      std::optional<Box> acc;
      for (const auto& p : u.parts) {
        auto b = bounding_box(*p);
        if (!b) return std::nullopt;
        if (!acc)
          acc = b;
        else
          for (std::size_t j = 0; j < d; ++j) {
            acc->lo[j] = std::min(acc->lo[j], b->lo[j]);
            acc->hi[j] = std::max(acc->hi[j], b->hi[j]);
          }
      }
      return acc;
    }
  };
  return std::visit(V{s.dim}, s.v);
}

std::size_t ConvexLeaf::dim() const { return shift.size(); }

namespace {

void collect_leaves(const SetPtr& s, Vec shift, std::vector<ConvexLeaf>& out) {
  struct V {
    const SetPtr& s;
    Vec& shift;
    std::vector<ConvexLeaf>& out;
    void operator()(const PointCloud& c) const {
      for (const Vec& p : c.points) {
        ConvexLeaf l;
        l.point = p;
        l.shift = shift;
        l.keepalive = s;
        out.push_back(std::move(l));
      }
    }
    void operator()(const HPolyhedron& h) const {
      ConvexLeaf l;
      l.poly = &h;
      l.shift = shift;
      l.keepalive = s;
      out.push_back(std::move(l));
    }
    void operator()(const BallRep& b) const {
      ConvexLeaf l;
      l.ball = &b;
      l.shift = shift;
      l.keepalive = s;
      out.push_back(std::move(l));
    }
    void operator()(const AffineRep& a) const {
      ConvexLeaf l;
      l.affine = &a;
      l.shift = shift;
      l.keepalive = s;
      out.push_back(std::move(l));
    }
    void operator()(const ShiftedRep& sh) const {
      collect_leaves(sh.inner, add(shift, sh.offset), out);
    }
    void operator()(const UnionRep& u) const {
      for (const auto& p : u.parts) collect_leaves(p, shift, out);
    }
  };
  std::visit(V{s, shift, out}, s->v);
}

}  // namespace

std::vector<ConvexLeaf> convex_leaves(const SetRep& s) {
  // Wrap in a shared_ptr alias so leaves can keep the tree alive.
  auto alias = std::make_shared<SetRep>(s);
  std::vector<ConvexLeaf> out;
  collect_leaves(alias, zeros(s.dim), out);
  return out;
}

bool leaf_member(const Vec& x, const ConvexLeaf& leaf, double tol) {
  const Vec z = sub(x, leaf.shift);
  if (leaf.point) {
    double m = 0;
    for (std::size_t i = 0; i < z.size(); ++i) m = std::max(m, std::fabs(z[i] - (*leaf.point)[i]));
    return m <= tol;
  }
  if (leaf.poly) {
    for (std::size_t i = 0; i < leaf.poly->rows.size(); ++i) {
      const double scale = 1.0 + std::sqrt(dot(leaf.poly->rows[i], leaf.poly->rows[i]));
      if (dot(leaf.poly->rows[i], z) - leaf.poly->rhs[i] > tol * scale) return false;
    }
    return true;
  }
  if (leaf.ball) {
    if (leaf.ball->radius == kInf) return true;
    return norm(sub(z, leaf.ball->center), leaf.ball->norm) <= leaf.ball->radius + tol;
  }
  if (leaf.affine) {
    const AffineRep& a = *leaf.affine;
    const Vec r = sub(z, a.base);
    if (a.directions.empty()) return std::sqrt(dot(r, r)) <= tol;
    auto t = least_squares(a.directions, r);
    if (!t) return false;
    Vec res = r;
    for (std::size_t k = 0; k < a.directions.size(); ++k)
      res = axpy(res, -(*t)[k], a.directions[k]);
    return std::sqrt(dot(res, res)) <= tol;
  }
  throw OpError(ErrKind::numeric, "leaf_member: empty leaf");
}

double euclid_lb_dist(const Vec& x, const ConvexLeaf& leaf) {
  const Vec z = sub(x, leaf.shift);
  if (leaf.point) return std::sqrt(dot(sub(z, *leaf.point), sub(z, *leaf.point)));
  if (leaf.poly) {
    double lb = 0;
    for (std::size_t i = 0; i < leaf.poly->rows.size(); ++i) {
      const double nr = std::sqrt(dot(leaf.poly->rows[i], leaf.poly->rows[i]));
      if (nr < 1e-15) continue;
      lb = std::max(lb, (dot(leaf.poly->rows[i], z) - leaf.poly->rhs[i]) / nr);
    }
    return std::max(0.0, lb);
  }
  if (leaf.ball) {
    const BallRep& b = *leaf.ball;
    if (b.radius == kInf) return 0;
    const Vec w = sub(z, b.center);
    const double excess = norm(w, b.norm) - b.radius;
    if (excess <= 0) return 0;
    // Convert the excess in the ball's norm to a euclidean lower bound.
    switch (b.norm.kind) {
      case NormSpec::Kind::euclidean:
        return excess;
      case NormSpec::Kind::maximum:
        return excess;  // ||v||_2 >= ||v||_inf
      case NormSpec::Kind::pnorm:
        if (b.norm.p == 1.0) return excess / std::sqrt(static_cast<double>(z.size()));
        return excess / std::pow(static_cast<double>(z.size()), 1.0 / b.norm.p);
    }
  }
  if (leaf.affine) {
    const AffineRep& a = *leaf.affine;
    const Vec r = sub(z, a.base);
    if (a.directions.empty()) return std::sqrt(dot(r, r));
    auto t = least_squares(a.directions, r);
    if (!t) return 0;
    Vec res = r;
    for (std::size_t k = 0; k < a.directions.size(); ++k)
      res = axpy(res, -(*t)[k], a.directions[k]);
    return std::sqrt(dot(res, res));
  }
  throw OpError(ErrKind::numeric, "euclid_lb_dist: empty leaf");
}

void LPBuilder::lower_bound(std::size_t var, double b) {
  LinExpr e;
  e.add(var, 1.0);
  add(e, '>', b);
}

LPProblem LPBuilder::build() const {
  LPProblem p(nv_);
  for (const auto& [var, coef] : obj_.terms) p.c[var] += coef;
  for (const Row& r : rows_) {
    Vec a = zeros(nv_);
    for (const auto& [var, coef] : r.e.terms) a[var] += coef;
    p.add(a, r.sense, r.rhs - r.e.cst);
  }
  return p;
}

bool polyhedral_norm(const NormSpec& n) {
  return n.kind == NormSpec::Kind::maximum ||
         (n.kind == NormSpec::Kind::pnorm && n.p == 1.0);
}

bool polyhedral_leaf(const ConvexLeaf& leaf) {
  if (leaf.point || leaf.poly || leaf.affine) return true;
  if (leaf.ball) return leaf.ball->radius == kInf || polyhedral_norm(leaf.ball->norm);
  return false;
}

void emit_leaf_membership(LPBuilder& lp, std::size_t xoff, const ConvexLeaf& leaf) {
  const std::size_t d = leaf.dim();
  if (leaf.point) {
    for (std::size_t j = 0; j < d; ++j) {
      LinExpr e;
      e.add(xoff + j, 1.0);
      lp.add(e, '=', (*leaf.point)[j] + leaf.shift[j]);
    }
    return;
  }
  if (leaf.poly) {
    for (std::size_t i = 0; i < leaf.poly->rows.size(); ++i) {
      LinExpr e;
      double off = 0;
      for (std::size_t j = 0; j < d; ++j) {
        e.add(xoff + j, leaf.poly->rows[i][j]);
        off += leaf.poly->rows[i][j] * leaf.shift[j];
      }
      lp.add(e, '<', leaf.poly->rhs[i] + off);
    }
    return;
  }
  if (leaf.affine) {
    const AffineRep& a = *leaf.affine;
    const std::size_t toff = lp.vars(a.directions.size());
    for (std::size_t j = 0; j < d; ++j) {
      LinExpr e;
      e.add(xoff + j, 1.0);
      for (std::size_t k = 0; k < a.directions.size(); ++k) e.add(toff + k, -a.directions[k][j]);
      lp.add(e, '=', a.base[j] + leaf.shift[j]);
    }
    return;
  }
  if (leaf.ball) {
    const BallRep& b = *leaf.ball;
    if (b.radius == kInf) return;
    const Vec c = add(b.center, leaf.shift);
    if (b.norm.kind == NormSpec::Kind::maximum) {
      for (std::size_t j = 0; j < d; ++j) {
        LinExpr e1;
        e1.add(xoff + j, 1.0);
        lp.add(e1, '<', c[j] + b.radius);
        LinExpr e2;
        e2.add(xoff + j, -1.0);
        lp.add(e2, '<', -c[j] + b.radius);
      }
      return;
    }
    if (b.norm.kind == NormSpec::Kind::pnorm && b.norm.p == 1.0) {
      // x - c = u - w, u,w >= 0, sum(u+w) <= r.
      const std::size_t uoff = lp.vars(d), woff = lp.vars(d);
      LinExpr total;
      for (std::size_t j = 0; j < d; ++j) {
        lp.lower_bound(uoff + j, 0.0);
        lp.lower_bound(woff + j, 0.0);
        LinExpr e;
        e.add(xoff + j, 1.0).add(uoff + j, -1.0).add(woff + j, 1.0);
        lp.add(e, '=', c[j]);
        total.add(uoff + j, 1.0).add(woff + j, 1.0);
      }
      lp.add(total, '<', b.radius);
      return;
    }
    throw OpError(ErrKind::unsupported, "emit_leaf_membership: non-polyhedral ball");
  }
  throw OpError(ErrKind::numeric, "emit_leaf_membership: empty leaf");
}

void emit_norm_le(LPBuilder& lp, const NormSpec& n, std::size_t d, std::size_t xoff,
                  std::size_t yoff, const Vec* ypt, std::size_t tvar) {
  auto ycoef = [&](LinExpr& e, std::size_t j, double sgn) {
    if (ypt)
      e.cst += sgn * (*ypt)[j];
    else
      e.add(yoff + j, sgn);
  };
  if (n.kind == NormSpec::Kind::maximum) {
    for (std::size_t j = 0; j < d; ++j) {
      LinExpr e1;
      e1.add(xoff + j, 1.0).add(tvar, -1.0);
      ycoef(e1, j, -1.0);
      lp.add(e1, '<', 0.0);
      LinExpr e2;
      e2.add(xoff + j, -1.0).add(tvar, -1.0);
      ycoef(e2, j, 1.0);
      lp.add(e2, '<', 0.0);
    }
    return;
  }
  if (n.kind == NormSpec::Kind::pnorm && n.p == 1.0) {
    const std::size_t soff = lp.vars(d);
    LinExpr total;
    for (std::size_t j = 0; j < d; ++j) {
      lp.lower_bound(soff + j, 0.0);
      LinExpr e1;
      e1.add(xoff + j, 1.0).add(soff + j, -1.0);
      ycoef(e1, j, -1.0);
      lp.add(e1, '<', 0.0);
      LinExpr e2;
      e2.add(xoff + j, -1.0).add(soff + j, -1.0);
      ycoef(e2, j, 1.0);
      lp.add(e2, '<', 0.0);
      total.add(soff + j, 1.0);
    }
    total.add(tvar, -1.0);
    lp.add(total, '<', 0.0);
    return;
  }
  throw OpError(ErrKind::unsupported, "emit_norm_le: norm not LP-representable");
}

}  // namespace tv::geo
