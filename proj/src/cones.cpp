#include "transversal/cones.hpp"

#include <algorithm>
#include <cmath>

namespace tv::geo {

namespace {

double euclid(const Vec& v) { return std::sqrt(dot(v, v)); }

Vec unit_or_zero(const Vec& v) {
  const double n = euclid(v);
  return n > 1e-14 ? scale(v, 1.0 / n) : zeros(v.size());
}

}  // namespace

std::vector<Vec> orthonormal_basis(const std::vector<Vec>& vectors, double tol) {
  std::vector<Vec> q;
  for (Vec v : vectors) {
    for (int pass = 0; pass < 2; ++pass)  // re-orthogonalize for stability
      for (const Vec& u : q) v = axpy(v, -dot(u, v), u);
    const double n = euclid(v);
    if (n > tol) q.push_back(scale(v, 1.0 / n));
  }
  return q;
}

std::vector<Vec> null_space(const std::vector<Vec>& rows, std::size_t dim, double tol) {
  // Gaussian elimination with partial pivoting on a copy of the rows.
  std::vector<Vec> m = rows;
  std::vector<std::size_t> pivot_cols;
  std::size_t r = 0;
  for (std::size_t c = 0; c < dim && r < m.size(); ++c) {
    std::size_t best = r;
    for (std::size_t i = r + 1; i < m.size(); ++i)
      if (std::fabs(m[i][c]) > std::fabs(m[best][c])) best = i;
    if (std::fabs(m[best][c]) <= tol) continue;
    std::swap(m[r], m[best]);
    const double piv = m[r][c];
    for (std::size_t j = 0; j < dim; ++j) m[r][j] /= piv;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (i == r) continue;
      const double f = m[i][c];
      if (f != 0)
        for (std::size_t j = 0; j < dim; ++j) m[i][j] -= f * m[r][j];
    }
    pivot_cols.push_back(c);
    ++r;
  }
  std::vector<Vec> basis;
  for (std::size_t c = 0; c < dim; ++c) {
    if (std::find(pivot_cols.begin(), pivot_cols.end(), c) != pivot_cols.end()) continue;
    Vec v = zeros(dim);
    v[c] = 1.0;
    for (std::size_t i = 0; i < pivot_cols.size(); ++i) v[pivot_cols[i]] = -m[i][c];
    basis.push_back(std::move(v));
  }
  return basis;
}

// ---------- normal cones ----------

namespace {

ConeRep whole_cone(std::size_t d) {
  ConeRep k;
  k.dim = d;
  k.whole = true;
  return k;
}

ConeRep trivial_cone(std::size_t d) {
  ConeRep k;
  k.dim = d;
  return k;
}

// Normal cone of a single convex leaf at omega (coordinates already global).
ConeRep leaf_normal_cone(const ConvexLeaf& leaf, const Vec& omega, double active_tol) {
  const std::size_t d = leaf.dim();
  const Vec w = sub(omega, leaf.shift);
  if (leaf.point) return whole_cone(d);  // isolated point
  if (leaf.poly) {
    ConeRep k = trivial_cone(d);
    for (std::size_t i = 0; i < leaf.poly->rows.size(); ++i) {
      const Vec& a = leaf.poly->rows[i];
      const double s = 1.0 + euclid(a);
      if (std::fabs(dot(a, w) - leaf.poly->rhs[i]) <= active_tol * s) k.rays.push_back(a);
    }
    return k;
  }
  if (leaf.affine) {
    ConeRep k = trivial_cone(d);
    auto q = orthonormal_basis(leaf.affine->directions);
    // Complete q to a basis; the complement spans the annihilator.
    std::vector<Vec> full = q;
    for (std::size_t j = 0; j < d; ++j) {
      Vec e = zeros(d);
      e[j] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (const Vec& u : full) e = axpy(e, -dot(u, e), u);
      if (euclid(e) > 1e-10) full.push_back(unit_or_zero(e));
    }
    for (std::size_t i = q.size(); i < full.size(); ++i) k.lines.push_back(full[i]);
    return k;
  }
  if (leaf.ball) {
    const BallRep& b = *leaf.ball;
    if (b.radius == kInf) return trivial_cone(d);  // whole space: N = {0}
    const Vec v = sub(w, b.center);
    const double r = norm(v, b.norm);
    if (r < b.radius - active_tol * (1.0 + b.radius)) return trivial_cone(d);  // interior
    switch (b.norm.kind) {
      case NormSpec::Kind::euclidean: {
        ConeRep k = trivial_cone(d);
        k.rays.push_back(unit_or_zero(v));
        return k;
      }
      case NormSpec::Kind::maximum: {
        ConeRep k = trivial_cone(d);
        for (std::size_t j = 0; j < d; ++j) {
          if (v[j] >= b.radius - active_tol * (1.0 + b.radius)) {
            Vec e = zeros(d);
            e[j] = 1.0;
            k.rays.push_back(std::move(e));
          }
          if (v[j] <= -b.radius + active_tol * (1.0 + b.radius)) {
            Vec e = zeros(d);
            e[j] = -1.0;
            k.rays.push_back(std::move(e));
          }
        }
        return k;
      }
      case NormSpec::Kind::pnorm: {
        if (b.norm.p == 1.0) {
          // Facet normals are sign vectors; free signs on zero coordinates.
          std::vector<std::size_t> zero_coords;
          Vec base(d);
          for (std::size_t j = 0; j < d; ++j) {
            if (std::fabs(v[j]) <= active_tol * (1.0 + b.radius)) {
              zero_coords.push_back(j);
              base[j] = 1.0;
            } else
              base[j] = v[j] > 0 ? 1.0 : -1.0;
          }
          if (zero_coords.size() > 12)
            throw OpError(ErrKind::unsupported, "normal cone of 1-norm ball: too many flat coords");
          ConeRep k = trivial_cone(d);
          const std::size_t m = std::size_t{1} << zero_coords.size();
          for (std::size_t mask = 0; mask < m; ++mask) {
            Vec s = base;
            for (std::size_t t = 0; t < zero_coords.size(); ++t)
              s[zero_coords[t]] = (mask >> t) & 1 ? -1.0 : 1.0;
            k.rays.push_back(std::move(s));
          }
          return k;
        }
        // Smooth boundary: gradient ray sign(v_j) |v_j|^{p-1}.
        ConeRep k = trivial_cone(d);
        Vec g(d);
        for (std::size_t j = 0; j < d; ++j) {
          const double a = std::pow(std::fabs(v[j]), b.norm.p - 1.0);
          g[j] = v[j] >= 0 ? a : -a;
        }
        k.rays.push_back(unit_or_zero(g));
        return k;
      }
    }
  }
  throw OpError(ErrKind::numeric, "leaf_normal_cone: empty leaf");
}

bool cone_is_subspace(const ConeRep& k) { return k.rays.empty() && !k.whole; }

bool same_subspace(const ConeRep& a, const ConeRep& b) {
  auto qa = orthonormal_basis(a.lines), qb = orthonormal_basis(b.lines);
  if (qa.size() != qb.size()) return false;
  for (const Vec& v : qa) {
    Vec r = v;
    for (const Vec& u : qb) r = axpy(r, -dot(u, r), u);
    if (euclid(r) > 1e-9) return false;
  }
  return true;
}

}  // namespace

ConeRep normal_cone(const SetRep& s, const Vec& omega, ConeKind kind, double active_tol) {
  require_dim(omega, s.dim, "normal_cone");
  auto leaves = convex_leaves(s);
  std::vector<ConeRep> active;
  for (const auto& leaf : leaves)
    if (leaf_member(omega, leaf, active_tol)) active.push_back(leaf_normal_cone(leaf, omega, active_tol));
  if (active.empty()) throw OpError(ErrKind::precondition, "normal_cone: point not in set");
  if (active.size() == 1) return active[0];

  // Several branches meet at omega.
  bool all_same = true;
  for (std::size_t i = 1; i < active.size(); ++i) {
    if (!cone_is_subspace(active[i]) || !cone_is_subspace(active[0]) ||
        !same_subspace(active[i], active[0]))
      all_same = false;
  }
  if (all_same) return active[0];  // duplicate branches

  if (kind == ConeKind::clarke) return whole_cone(s.dim);
  if (kind == ConeKind::convex)
    throw OpError(ErrKind::unsupported, "normal_cone: convex kind on a branching union");

  // Frechet: intersection of the branch cones; supported when all branches
  // are subspaces (affine atoms), computed as a joint null space.
  std::vector<Vec> constraint_rows;
  for (const auto& k : active) {
    if (!cone_is_subspace(k))
      throw OpError(ErrKind::unsupported, "normal_cone: union branch with curved or conic normal");
    auto q = orthonormal_basis(k.lines);
    // v in span(q)  <=>  (I - QQ^T) v = 0: add rows e_j - sum_u u_j u.
    for (std::size_t j = 0; j < s.dim; ++j) {
      Vec row = zeros(s.dim);
      row[j] = 1.0;
      for (const Vec& u : q) row = axpy(row, -u[j], u);
      constraint_rows.push_back(std::move(row));
    }
  }
  ConeRep out = trivial_cone(s.dim);
  out.lines = null_space(constraint_rows, s.dim);
  return out;
}

// ---------- cone distance ----------

Vec nnls(const std::vector<Vec>& cols, const Vec& z, double tol) {
  const std::size_t m = cols.size();
  Vec c = zeros(m);
  if (m == 0) return c;
  std::vector<bool> passive(m, false);
  Vec resid = z;
  const int max_outer = 3 * static_cast<int>(m) + 30;
  for (int outer = 0; outer < max_outer; ++outer) {
    // gradient w = A^T resid
    std::size_t best = m;
    double bestw = tol;
    for (std::size_t i = 0; i < m; ++i) {
      if (passive[i]) continue;
      const double w = dot(cols[i], resid);
      if (w > bestw) {
        bestw = w;
        best = i;
      }
    }
    if (best == m) break;
    passive[best] = true;
    for (int inner = 0; inner < max_outer; ++inner) {
      std::vector<Vec> sub_cols;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < m; ++i)
        if (passive[i]) {
          sub_cols.push_back(cols[i]);
          idx.push_back(i);
        }
      auto sol = least_squares(sub_cols, z);
      if (!sol) {
        passive[best] = false;
        break;
      }
      bool all_pos = true;
      for (double v : *sol)
        if (v <= 0) all_pos = false;
      if (all_pos) {
        c = zeros(m);
        for (std::size_t t = 0; t < idx.size(); ++t) c[idx[t]] = (*sol)[t];
        break;
      }
      double alpha = 1.0;
      for (std::size_t t = 0; t < idx.size(); ++t)
        if ((*sol)[t] <= 0) {
          const double ci = c[idx[t]];
          const double den = ci - (*sol)[t];
          if (den > 1e-300) alpha = std::min(alpha, ci / den);
        }
      for (std::size_t t = 0; t < idx.size(); ++t) {
        c[idx[t]] += alpha * ((*sol)[t] - c[idx[t]]);
        if (c[idx[t]] <= tol) {
          c[idx[t]] = 0;
          passive[idx[t]] = false;
        }
      }
    }
    resid = z;
    for (std::size_t i = 0; i < m; ++i)
      if (c[i] != 0) resid = axpy(resid, -c[i], cols[i]);
  }
  return c;
}

ConeDistResult dist_to_cone(const Vec& z, const ConeRep& k, const NormSpec& n) {
  ConeDistResult out;
  const std::size_t d = z.size();
  if (k.dim != d) throw OpError(ErrKind::precondition, "dist_to_cone: dimension mismatch");
  if (k.whole) {
    out.value = 0;
    out.nearest = z;
    return out;
  }
  if (k.is_trivial()) {
    out.value = norm(z, n);
    out.nearest = zeros(d);
    return out;
  }
  if (n.kind == NormSpec::Kind::euclidean) {
    // Project out the lineality space, then NNLS on the projected rays.
    auto q = orthonormal_basis(k.lines);
    auto proj_perp = [&](Vec v) {
      for (const Vec& u : q) v = axpy(v, -dot(u, v), u);
      return v;
    };
    const Vec pz = proj_perp(z);
    std::vector<Vec> pr;
    pr.reserve(k.rays.size());
    for (const Vec& r : k.rays) pr.push_back(proj_perp(r));
    const Vec c = nnls(pr, pz);
    Vec resid = pz;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] != 0) resid = axpy(resid, -c[i], pr[i]);
    out.value = euclid(resid);
    out.nearest = sub(z, resid);
    return out;
  }
  if (polyhedral_norm(n)) {
    LPBuilder lp;
    const std::size_t yo = lp.vars(d);  // cone point
    const std::size_t co = k.rays.empty() ? 0 : lp.vars(k.rays.size());
    const std::size_t to = k.lines.empty() ? 0 : lp.vars(k.lines.size());
    const std::size_t u = lp.vars(1);
    for (std::size_t i = 0; i < k.rays.size(); ++i) lp.lower_bound(co + i, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      LinExpr e;
      e.add(yo + j, 1.0);
      for (std::size_t i = 0; i < k.rays.size(); ++i) e.add(co + i, -k.rays[i][j]);
      for (std::size_t i = 0; i < k.lines.size(); ++i) e.add(to + i, -k.lines[i][j]);
      lp.add(e, '=', 0.0);
    }
    emit_norm_le(lp, n, d, yo, SIZE_MAX, &z, u);
    LinExpr obj;
    obj.add(u, 1.0);
    lp.set_objective(obj);
    auto sol = lp_solve(lp.build());
    if (sol.status != LPSolution::Status::optimal)
      throw OpError(ErrKind::numeric, "dist_to_cone: unexpected LP status");
    out.value = std::max(0.0, sol.x[u]);
    out.nearest = Vec(sol.x.begin() + yo, sol.x.begin() + yo + d);
    return out;
  }
  throw OpError(ErrKind::unsupported, "dist_to_cone: general p-norm measure unsupported");
}

bool cone_member(const Vec& z, const ConeRep& k, double tol) {
  if (k.whole) return true;
  return dist_to_cone(z, k, NormSpec::euclidean()).value <= tol;
}

void emit_cone_membership(LPBuilder& lp, std::size_t xoff, const ConeRep& k) {
  if (k.whole) return;
  const std::size_t d = k.dim;
  if (k.is_trivial()) {
    for (std::size_t j = 0; j < d; ++j) {
      LinExpr e;
      e.add(xoff + j, 1.0);
      lp.add(e, '=', 0.0);
    }
    return;
  }
  const std::size_t co = k.rays.empty() ? 0 : lp.vars(k.rays.size());
  const std::size_t to = k.lines.empty() ? 0 : lp.vars(k.lines.size());
  for (std::size_t i = 0; i < k.rays.size(); ++i) lp.lower_bound(co + i, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    LinExpr e;
    e.add(xoff + j, 1.0);
    for (std::size_t i = 0; i < k.rays.size(); ++i) e.add(co + i, -k.rays[i][j]);
    for (std::size_t i = 0; i < k.lines.size(); ++i) e.add(to + i, -k.lines[i][j]);
    lp.add(e, '=', 0.0);
  }
}

}  // namespace tv::geo
