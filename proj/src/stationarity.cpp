#include "transversal/stationarity.hpp"

#include "transversal/multiset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>

namespace tv::lab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Search budgets. Tuple grids beyond the cap are stride-subsampled; pattern
// products beyond the cap shrink the per-block direction families.
constexpr std::size_t kTupleCap = 2048;
constexpr std::size_t kPatternCapSampled = 256;
constexpr std::size_t kPatternCapExact = 65536;
constexpr std::size_t kOmegaCap = 400;

using geo::ConeRep;
using geo::ConvexLeaf;
using geo::LinExpr;
using geo::LPBuilder;
using geo::LPSolution;
using geo::SetRep;

std::vector<Vec> circle_dirs(std::size_t m) {
  std::vector<Vec> out;
  out.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double t = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(m);
    out.push_back({std::cos(t), std::sin(t)});
  }
  return out;
}

std::vector<Vec> fibonacci_dirs(std::size_t m) {
  std::vector<Vec> out;
  out.reserve(m);
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(m);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double t = 2.0 * kPi * static_cast<double>(k) / golden;
    out.push_back({r * std::cos(t), r * std::sin(t), z});
  }
  return out;
}

std::vector<Vec> sphere_dirs(std::size_t d, std::size_t m) {
  if (d == 1) return {{1.0}, {-1.0}};
  if (d == 2) return circle_dirs(m);
  if (d == 3) return fibonacci_dirs(m);
  // Higher dimensions: axes plus a deterministic random fill.
  std::vector<Vec> out;
  for (std::size_t j = 0; j < d; ++j) {
    Vec e = zeros(d);
    e[j] = 1.0;
    out.push_back(e);
    e[j] = -1.0;
    out.push_back(e);
  }
  Rng rng(0x5d1e5u);
  while (out.size() < m) out.push_back(rng.direction(d));
  return out;
}

void dedupe_points(std::vector<Vec>& pts, double tol) {
  std::vector<Vec> keep;
  for (const Vec& p : pts) {
    bool fresh = true;
    for (const Vec& q : keep) {
      double dd = 0;
      for (std::size_t j = 0; j < p.size(); ++j) dd = std::max(dd, std::fabs(p[j] - q[j]));
      if (dd <= tol) {
        fresh = false;
        break;
      }
    }
    if (fresh) keep.push_back(p);
  }
  pts.swap(keep);
}

// Support directions for the dual norm: ambient-unit vectors u with
// <u, z> <= ||z||_dual for every z, attaining equality up to the factor.
// factor == 1 means the family is attainment-exact (maximum and 1-norm
// ambient families, and every norm in dimension one).
struct DirFamily {
  std::vector<Vec> dirs;
  double factor = 1.0;
};

DirFamily support_directions(const NormSpec& ambient, std::size_t d, std::size_t budget) {
  DirFamily fam;
  if (d == 1) {
    fam.dirs = {{1.0}, {-1.0}};
    return fam;
  }
  if (ambient.kind == NormSpec::Kind::maximum) {
    const std::size_t count = std::size_t{1} << d;
    for (std::size_t mask = 0; mask < count; ++mask) {
      Vec s(d, 1.0);
      for (std::size_t j = 0; j < d; ++j)
        if (mask & (std::size_t{1} << j)) s[j] = -1.0;
      fam.dirs.push_back(std::move(s));
    }
    return fam;
  }
  if (ambient.kind == NormSpec::Kind::pnorm && ambient.p == 1.0) {
    for (std::size_t j = 0; j < d; ++j) {
      Vec e = zeros(d);
      e[j] = 1.0;
      fam.dirs.push_back(e);
      e[j] = -1.0;
      fam.dirs.push_back(std::move(e));
    }
    return fam;
  }
  const std::size_t m = std::max<std::size_t>(8, std::min<std::size_t>(budget, 64));
  std::vector<Vec> raw = sphere_dirs(d, m);
  for (Vec& u : raw) {
    const double nu = geo::norm(u, ambient);
    if (nu <= 1e-15) continue;
    u = scale(u, (1.0 - 1e-12) / nu);
    fam.dirs.push_back(u);
  }
  if (ambient.kind == NormSpec::Kind::euclidean && d == 2) {
    fam.factor = std::cos(kPi / static_cast<double>(fam.dirs.size()));
    return fam;
  }
  // Attainment factor estimated by sampling; the safety multiplier keeps
  // the reported floor conservative.
  const NormSpec dn = geo::dual(ambient);
  Rng rng(0xfac704u);
  double c = 1.0;
  for (int s = 0; s < 512; ++s) {
    const Vec z = rng.direction(d);
    const double nz = geo::norm(z, dn);
    if (nz <= 1e-15) continue;
    double best = 0;
    for (const Vec& u : fam.dirs) best = std::max(best, dot(u, z));
    c = std::min(c, best / nz);
  }
  fam.factor = std::max(0.0, c * 0.9);
  return fam;
}

SetPtr leaf_to_set(const ConvexLeaf& leaf) {
  if (leaf.point) return geo::make_point(add(*leaf.point, leaf.shift));
  if (leaf.poly) return geo::make_shift(geo::make_poly(leaf.poly->rows, leaf.poly->rhs), leaf.shift);
  if (leaf.ball) return geo::make_ball(add(leaf.ball->center, leaf.shift), leaf.ball->radius, leaf.ball->norm);
  if (leaf.affine) return geo::make_affine(add(leaf.affine->base, leaf.shift), leaf.affine->directions);
  throw OpError(ErrKind::unsupported, "stationarity: unsupported leaf class");
}

// Candidate base points of one set inside the open radius-ball around xbar,
// one representative per stratum of the normal-cone structure. exact means
// the stratification is exhaustive (polyhedral classes); curved boundaries
// are sampled angularly and clear the flag.
struct OmegaGrid {
  std::vector<Vec> pts;
  bool exact = true;
};

bool in_open_ball(const Vec& p, const Vec& xbar, double radius, const NormSpec& nm) {
  return geo::dist(p, xbar, nm) < radius * (1.0 - 1e-9);
}

// Nearest point of {rows_S x = rhs_S} to xbar (euclidean); nullopt when the
// subsystem is singular or inconsistent.
std::optional<Vec> equality_projection(const std::vector<Vec>& rows, const Vec& rhs, const Vec& xbar) {
  const std::size_t s = rows.size();
  std::vector<Vec> gram(s, zeros(s));
  Vec g(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) gram[i][j] = dot(rows[i], rows[j]);
    g[i] = rhs[i] - dot(rows[i], xbar);
  }
  auto mu = solve_dense(gram, g);
  if (!mu) return std::nullopt;
  Vec q = xbar;
  for (std::size_t i = 0; i < s; ++i) q = axpy(q, (*mu)[i], rows[i]);
  return q;
}

// Feasibility fallback for one polyhedron face: any point with the face
// rows tight, the others satisfied, inside an inner box of the ball.
std::optional<Vec> face_point_lp(const geo::HPolyhedron& poly, const Vec& shift,
                                 const std::vector<std::size_t>& face, const Vec& xbar,
                                 double radius, const NormSpec& nm) {
  const std::size_t d = xbar.size();
  LPBuilder lp;
  const std::size_t q = lp.vars(d);
  for (std::size_t i = 0; i < poly.rows.size(); ++i) {
    LinExpr e;
    double off = 0;
    for (std::size_t j = 0; j < d; ++j) {
      e.add(q + j, poly.rows[i][j]);
      off += poly.rows[i][j] * shift[j];
    }
    const bool tight = std::find(face.begin(), face.end(), i) != face.end();
    lp.add(e, tight ? '=' : '<', poly.rhs[i] + off);
  }
  double box = radius * (1.0 - 1e-9);
  if (!geo::polyhedral_norm(nm))
    box = radius * (1.0 - 1e-9) / std::pow(static_cast<double>(d), 1.0 / std::max(nm.p, 1.0));
  if (geo::polyhedral_norm(nm)) {
    const std::size_t t = lp.vars(1);
    geo::emit_norm_le(lp, nm, d, q, SIZE_MAX, &xbar, t);
    LinExpr cap;
    cap.add(t, 1.0);
    lp.add(cap, '<', box);
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      LinExpr e1;
      e1.add(q + j, 1.0);
      lp.add(e1, '<', xbar[j] + box);
      LinExpr e2;
      e2.add(q + j, -1.0);
      lp.add(e2, '<', -(xbar[j] - box));
    }
  }
  const LPSolution sol = geo::lp_solve(lp.build());
  if (sol.status != LPSolution::Status::optimal) return std::nullopt;
  return Vec(sol.x.begin(), sol.x.begin() + static_cast<long>(d));
}

OmegaGrid omega_candidates(const SetRep& s, const Vec& xbar, double radius, const NormSpec& nm) {
  OmegaGrid grid;
  const std::size_t d = xbar.size();
  if (geo::member(xbar, s)) grid.pts.push_back(xbar);
  for (const ConvexLeaf& leaf : geo::convex_leaves(s)) {
    if (leaf.point) {
      const Vec p = add(*leaf.point, leaf.shift);
      if (in_open_ball(p, xbar, radius, nm)) grid.pts.push_back(p);
      continue;
    }
    if (leaf.affine) {
      const SetPtr lf = leaf_to_set(leaf);
      Vec q;
      try {
        q = geo::project(xbar, *lf, nm);
      } catch (const OpError&) {
        q = geo::project(xbar, *lf, NormSpec::euclidean());
      }
      if (in_open_ball(q, xbar, radius, nm)) grid.pts.push_back(q);
      continue;
    }
    if (leaf.poly) {
      const geo::HPolyhedron& poly = *leaf.poly;
      const std::size_t m = poly.rows.size();
      const SetPtr lf = leaf_to_set(leaf);
      try {
        const Vec q = geo::project(xbar, *lf, nm);
        if (in_open_ball(q, xbar, radius, nm)) grid.pts.push_back(q);
      } catch (const OpError&) {
        grid.exact = false;
      }
      if (m > 14) grid.exact = false;
      std::vector<std::vector<std::size_t>> faces;
      std::vector<std::size_t> idx;
      // All active-row subsets of size 1..d.
      std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t need) {
        if (need == 0) {
          faces.push_back(idx);
          return;
        }
        for (std::size_t i = start; i + need <= m; ++i) {
          idx.push_back(i);
          rec(i + 1, need - 1);
          idx.pop_back();
        }
      };
      for (std::size_t k = 1; k <= std::min(d, m) && faces.size() < 600; ++k) rec(0, k);
      for (const auto& face : faces) {
        std::vector<Vec> rows;
        Vec rhs;
        for (std::size_t i : face) {
          rows.push_back(poly.rows[i]);
          rhs.push_back(poly.rhs[i] + dot(poly.rows[i], leaf.shift));
        }
        std::optional<Vec> q = equality_projection(rows, rhs, xbar);
        bool ok = false;
        if (q) {
          ok = true;
          for (std::size_t i = 0; i < m; ++i) {
            const double slack = poly.rhs[i] + dot(poly.rows[i], leaf.shift) - dot(poly.rows[i], *q);
            if (slack < -1e-9 * (1.0 + std::fabs(poly.rhs[i]))) {
              ok = false;
              break;
            }
          }
          if (ok && !in_open_ball(*q, xbar, radius, nm)) ok = false;
        }
        if (!ok) {
          q = face_point_lp(poly, leaf.shift, face, xbar, radius, nm);
          if (q && !geo::polyhedral_norm(nm) && !in_open_ball(*q, xbar, radius, nm)) q.reset();
          ok = q.has_value();
          if (!ok && !geo::polyhedral_norm(nm)) grid.exact = false;
        }
        if (ok) grid.pts.push_back(*q);
      }
      continue;
    }
    if (leaf.ball) {
      const geo::BallRep& b = *leaf.ball;
      if (b.radius == kInf) continue;  // whole space: xbar already added
      grid.exact = false;
      const Vec c = add(b.center, leaf.shift);
      const std::size_t m = d == 3 ? 256 : 64;
      for (const Vec& u : sphere_dirs(d, m)) {
        const double nu = geo::norm(u, b.norm);
        if (nu <= 1e-15) continue;
        const Vec p = axpy(c, b.radius / nu, u);
        if (in_open_ball(p, xbar, radius, nm)) grid.pts.push_back(p);
      }
      const Vec v = sub(xbar, c);
      const double nv = geo::norm(v, b.norm);
      if (nv > 1e-12) {
        const Vec p = axpy(c, b.radius / nv, v);
        if (in_open_ball(p, xbar, radius, nm)) grid.pts.push_back(p);
      }
      continue;
    }
    throw OpError(ErrKind::unsupported, "stationarity: unsupported leaf class");
  }
  // Keep only certified members (projections are numeric).
  std::vector<Vec> ok;
  for (Vec& p : grid.pts)
    if (geo::member(p, s, 1e-7)) ok.push_back(std::move(p));
  grid.pts.swap(ok);
  double sc = 1.0;
  for (double v : xbar) sc = std::max(sc, std::fabs(v));
  dedupe_points(grid.pts, 1e-9 * sc);
  if (grid.pts.size() > kOmegaCap) {
    std::vector<Vec> sub;
    const std::size_t stride = (grid.pts.size() + kOmegaCap - 1) / kOmegaCap;
    for (std::size_t i = 0; i < grid.pts.size(); i += stride) sub.push_back(grid.pts[i]);
    grid.pts.swap(sub);
    grid.exact = false;
  }
  return grid;
}

Vec align_dir(const Vec& g, const NormSpec& ambient) {
  Vec u = geo::dual_align(g, ambient);
  return scale(u, 1.0 - 1e-12);
}

// One dual-family optimization at fixed cones. The normalization
// sum ||x*_i|| = 1 over the requested block is handled by enumerating
// support-direction patterns; each pattern yields one LP whose solution is
// renormalized exactly and re-measured with exact norms and cone distances,
// so `value` is always attained by `xstar`. lp_floor scales the smallest LP
// value by the family's attainment factor and lower-bounds the true
// infimum when the pattern family was not trimmed.
struct FamilyQuery {
  const std::vector<ConeRep>* cones = nullptr;
  bool zero_sum = false;               // pin sum x* = 0, objective = cone distances
  std::vector<double> weights;         // per-set objective weights (zero_sum)
  bool head_normalization = false;     // normalize the first n-1 blocks only
  const std::vector<Vec>* pair_refs = nullptr;
  double pair_rhs = 0;                 // strict pairing floor (exact gate)
  NormSpec ambient;
};

struct FamilyBest {
  bool feasible = false;
  double value = kInf;
  double lp_floor = kInf;
  std::vector<Vec> xstar;
  double sum_res = kInf;
  std::vector<double> cone_dist;
  double pairing = 0;
  double factor = 1.0;
  bool exact_patterns = true;
};

void emit_dual_norm_epigraph(LPBuilder& lp, const NormSpec& dn, const std::vector<Vec>& dirs,
                             std::size_t d, std::size_t xoff, std::size_t yoff, const Vec* ypt,
                             std::size_t tvar) {
  if (geo::polyhedral_norm(dn)) {
    geo::emit_norm_le(lp, dn, d, xoff, yoff, ypt, tvar);
    return;
  }
  for (const Vec& u : dirs) {
    LinExpr e;
    for (std::size_t j = 0; j < d; ++j) {
      e.add(xoff + j, u[j]);
      if (ypt)
        e.cst -= u[j] * (*ypt)[j];
      else
        e.add(yoff + j, -u[j]);
    }
    e.add(tvar, -1.0);
    lp.add(e, '<', 0.0);
  }
}

FamilyBest best_family(const FamilyQuery& q) {
  const std::vector<ConeRep>& cones = *q.cones;
  const std::size_t n = cones.size();
  const std::size_t d = cones.empty() ? 0 : cones[0].dim;
  const NormSpec dn = geo::dual(q.ambient);
  const std::size_t block = q.head_normalization ? n - 1 : n;

  FamilyBest out;
  std::vector<char> pinned(n, 0);
  if (!q.zero_sum)
    for (std::size_t i = 0; i < n; ++i)
      if (cones[i].is_trivial()) pinned[i] = 1;

  // Per-block pattern families; collapsed where the cone pins the support
  // direction (single ray or single line).
  std::vector<std::vector<Vec>> U(n);
  std::size_t patterned = 0;
  for (std::size_t i = 0; i < block; ++i) {
    if (pinned[i]) continue;
    ++patterned;
  }
  if (patterned == 0) return out;  // normalization impossible

  DirFamily base = support_directions(q.ambient, d, 32);
  const bool exact_family = base.factor == 1.0;
  if (!exact_family) {
    // Shrink the sampled family so the pattern product stays within cap.
    std::size_t m = base.dirs.size();
    while (m > 4) {
      double prod = 1;
      for (std::size_t i = 0; i < patterned && prod <= 2.0 * kPatternCapSampled; ++i) prod *= static_cast<double>(m);
      if (prod <= static_cast<double>(kPatternCapSampled)) break;
      m -= 2;
    }
    if (m < base.dirs.size()) base = support_directions(q.ambient, d, m);
  }
  out.factor = base.factor;

  auto gens_of = [&](const ConeRep& k) {
    std::vector<Vec> g;
    for (const Vec& r : k.rays)
      if (geo::norm(r, dn) > 1e-12) g.push_back(align_dir(r, q.ambient));
    for (const Vec& l : k.lines)
      if (geo::norm(l, dn) > 1e-12) {
        g.push_back(align_dir(l, q.ambient));
        g.push_back(align_dir(scale(l, -1.0), q.ambient));
      }
    return g;
  };

  for (std::size_t i = 0; i < block; ++i) {
    if (pinned[i]) continue;
    const ConeRep& k = cones[i];
    if (!q.zero_sum && !k.whole && k.rays.size() == 1 && k.lines.empty()) {
      U[i] = {align_dir(k.rays[0], q.ambient)};
    } else if (!q.zero_sum && !k.whole && k.rays.empty() && k.lines.size() == 1) {
      U[i] = {align_dir(k.lines[0], q.ambient), align_dir(scale(k.lines[0], -1.0), q.ambient)};
    } else if (!q.zero_sum && !k.whole) {
      U[i] = base.dirs;
      for (Vec& g : gens_of(k)) U[i].push_back(std::move(g));
      dedupe_points(U[i], 1e-9);
    } else if (q.zero_sum && !k.whole && !k.is_trivial()) {
      U[i] = base.dirs;
      for (Vec& g : gens_of(k)) U[i].push_back(std::move(g));
      dedupe_points(U[i], 1e-9);
    } else {
      U[i] = base.dirs;
    }
  }

  // Pattern product with cap.
  double prod = 1;
  for (std::size_t i = 0; i < block; ++i)
    if (!pinned[i]) prod *= static_cast<double>(U[i].size());
  const double cap = exact_family ? static_cast<double>(kPatternCapExact)
                                  : static_cast<double>(kPatternCapSampled);
  if (prod > cap) {
    if (exact_family) throw OpError(ErrKind::budget, "normalization pattern budget exceeded");
    for (std::size_t i = 0; i < block; ++i) {
      if (pinned[i] || U[i].size() <= 4) continue;
      std::vector<Vec> sub;
      const std::size_t stride = (U[i].size() + 3) / 4;
      for (std::size_t j = 0; j < U[i].size(); j += stride) sub.push_back(U[i][j]);
      U[i].swap(sub);
    }
    out.exact_patterns = false;
  }

  std::vector<std::size_t> radix;
  std::vector<std::size_t> pat_blocks;
  for (std::size_t i = 0; i < block; ++i) {
    if (pinned[i]) continue;
    pat_blocks.push_back(i);
    radix.push_back(U[i].size());
  }
  std::size_t total = 1;
  for (std::size_t r : radix) total *= r;

  double lp_floor_raw = kInf;
  std::size_t best_pattern = 0;
  for (std::size_t p = 0; p < total; ++p) {
    // Decode the pattern.
    std::vector<const Vec*> u(n, nullptr);
    std::size_t rem = p;
    for (std::size_t bi = 0; bi < pat_blocks.size(); ++bi) {
      u[pat_blocks[bi]] = &U[pat_blocks[bi]][rem % radix[bi]];
      rem /= radix[bi];
    }

    LPBuilder lp;
    const std::size_t xoff = lp.vars(n * d);
    LinExpr obj;
    if (!q.zero_sum) {
      for (std::size_t i = 0; i < n; ++i) geo::emit_cone_membership(lp, xoff + i * d, cones[i]);
      const std::size_t soff = lp.vars(d);
      for (std::size_t j = 0; j < d; ++j) {
        LinExpr e;
        e.add(soff + j, 1.0);
        for (std::size_t i = 0; i < n; ++i) e.add(xoff + i * d + j, -1.0);
        lp.add(e, '=', 0.0);
      }
      const std::size_t t = lp.vars(1);
      lp.lower_bound(t, 0.0);
      Vec zero(d, 0.0);
      emit_dual_norm_epigraph(lp, dn, base.dirs, d, soff, SIZE_MAX, &zero, t);
      obj.add(t, 1.0);
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        LinExpr e;
        for (std::size_t i = 0; i < n; ++i) e.add(xoff + i * d + j, 1.0);
        lp.add(e, '=', 0.0);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t yoff = lp.vars(d);
        geo::emit_cone_membership(lp, yoff, cones[i]);
        const std::size_t t = lp.vars(1);
        lp.lower_bound(t, 0.0);
        emit_dual_norm_epigraph(lp, dn, base.dirs, d, xoff + i * d, yoff, nullptr, t);
        obj.add(t, q.weights.empty() ? 1.0 : q.weights[i]);
      }
    }
    LinExpr norm_row;
    for (std::size_t i : pat_blocks)
      for (std::size_t j = 0; j < d; ++j) norm_row.add(xoff + i * d + j, (*u[i])[j]);
    lp.add(norm_row, '=', 1.0);
    if (q.pair_refs) {
      LinExpr pe;
      for (std::size_t i = 0; i + 1 < n && i < q.pair_refs->size(); ++i)
        for (std::size_t j = 0; j < d; ++j) pe.add(xoff + i * d + j, (*q.pair_refs)[i][j]);
      lp.add(pe, '>', q.pair_rhs + 1e-9 * (1.0 + std::fabs(q.pair_rhs)));
    }
    lp.set_objective(obj);

    const LPSolution sol = geo::lp_solve(lp.build());
    if (sol.status != LPSolution::Status::optimal) continue;
    lp_floor_raw = std::min(lp_floor_raw, std::max(0.0, sol.value));

    std::vector<Vec> xs(n, zeros(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) xs[i][j] = sol.x[xoff + i * d + j];
    double block_sum = 0;
    for (std::size_t i = 0; i < block; ++i) block_sum += geo::norm(xs[i], dn);
    if (block_sum <= 1e-9) continue;
    for (Vec& x : xs) x = scale(x, 1.0 / block_sum);

    Vec sum = zeros(d);
    for (const Vec& x : xs) sum = add(sum, x);
    const double sum_res = geo::norm(sum, dn);
    std::vector<double> cd(n, 0.0);
    double cd_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cd[i] = cones[i].whole ? 0.0 : geo::dist_to_cone(xs[i], cones[i], dn).value;
      cd_total += cd[i];
    }
    if (!q.zero_sum && cd_total > 1e-7) continue;  // solver noise guard
    if (q.zero_sum && sum_res > 1e-8) continue;

    double pairing = 0;
    if (q.pair_refs) {
      for (std::size_t i = 0; i + 1 < n && i < q.pair_refs->size(); ++i)
        pairing += dot(xs[i], (*q.pair_refs)[i]);
      if (!(pairing > q.pair_rhs)) continue;
    }

    double value;
    if (!q.zero_sum) {
      value = sum_res;
    } else {
      value = 0;
      for (std::size_t i = 0; i < n; ++i) value += (q.weights.empty() ? 1.0 : q.weights[i]) * cd[i];
    }
    if (!out.feasible || value < out.value ||
        (value == out.value && p < best_pattern)) {
      out.feasible = true;
      out.value = value;
      out.xstar = xs;
      out.sum_res = sum_res;
      out.cone_dist = cd;
      out.pairing = pairing;
      best_pattern = p;
    }
  }
  if (lp_floor_raw < kInf) out.lp_floor = lp_floor_raw * base.factor;
  if (out.feasible) out.lp_floor = std::min(out.lp_floor, out.value);
  return out;
}

// Shared tuple-grid plan: candidate points and their normal cones for each
// set, and the (possibly strided) list of tuple indices to visit.
struct GridPlan {
  std::vector<OmegaGrid> grids;
  std::vector<std::vector<ConeRep>> cones;
  std::vector<std::size_t> radix;
  std::vector<std::size_t> tuple_ids;
  bool exact = true;
  bool empty = false;
};

GridPlan plan_grids(const std::vector<SetPtr>& sets, const Vec& xbar,
                    const std::vector<double>& radii, ConeKind kind, const NormSpec& nm,
                    const std::vector<Vec>* extra_tail = nullptr) {
  GridPlan plan;
  const std::size_t n = sets.size();
  plan.grids.resize(n);
  plan.cones.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plan.grids[i] = omega_candidates(*sets[i], xbar, radii[i], nm);
    if (extra_tail && i + 1 == n) {
      for (const Vec& p : *extra_tail)
        if (geo::member(p, *sets[i], 1e-7) && in_open_ball(p, xbar, radii[i], nm))
          plan.grids[i].pts.push_back(p);
      double sc = 1.0;
      for (double v : xbar) sc = std::max(sc, std::fabs(v));
      dedupe_points(plan.grids[i].pts, 1e-9 * sc);
    }
    plan.exact = plan.exact && plan.grids[i].exact;
    if (plan.grids[i].pts.empty()) plan.empty = true;
  }
  if (plan.empty) return plan;
  for (std::size_t i = 0; i < n; ++i) {
    plan.cones[i].reserve(plan.grids[i].pts.size());
    for (const Vec& w : plan.grids[i].pts)
      plan.cones[i].push_back(geo::normal_cone(*sets[i], w, kind));
    plan.radix.push_back(plan.grids[i].pts.size());
  }
  double total = 1;
  for (std::size_t r : plan.radix) total *= static_cast<double>(r);
  std::size_t stride = 1;
  if (total > static_cast<double>(kTupleCap)) {
    stride = static_cast<std::size_t>(std::ceil(total / static_cast<double>(kTupleCap)));
    plan.exact = false;
  }
  const std::size_t total_i = static_cast<std::size_t>(total);
  for (std::size_t t = 0; t < total_i; t += stride) plan.tuple_ids.push_back(t);
  return plan;
}

std::vector<std::size_t> decode_tuple(std::size_t t, const std::vector<std::size_t>& radix) {
  std::vector<std::size_t> idx(radix.size());
  for (std::size_t i = 0; i < radix.size(); ++i) {
    idx[i] = t % radix[i];
    t /= radix[i];
  }
  return idx;
}

void require_members(const std::vector<SetPtr>& sets, const Vec& xbar, const char* what) {
  for (const SetPtr& s : sets)
    if (!geo::member(xbar, *s, 1e-7))
      throw OpError(ErrKind::precondition, std::string(what) + ": reference point must lie in every set");
}

CertBundle make_bundle(const GridPlan& plan, const std::vector<std::size_t>& idx,
                       const FamilyBest& fb, bool head, ConeKind kind) {
  CertBundle b;
  for (std::size_t i = 0; i < idx.size(); ++i) b.omega.push_back(plan.grids[i].pts[idx[i]]);
  b.xstar = fb.xstar;
  b.normalization = head ? "sum-(n-1)" : "sum-n";
  b.sum_residual = fb.sum_res;
  b.cone_residual = 0;
  for (double v : fb.cone_dist) b.cone_residual += v;
  b.pairing = fb.pairing;
  b.kind = kind;
  return b;
}

}  // namespace

std::string to_string(DualForm f) {
  switch (f) {
    case DualForm::d1: return "D1";
    case DualForm::d2: return "D2";
    case DualForm::d3: return "D3";
    case DualForm::d4: return "D4";
    case DualForm::d5: return "D5";
    case DualForm::d6: return "D6";
  }
  return "D?";
}

DualForm dual_form_from(const std::string& s) {
  if (s == "D1" || s == "d1") return DualForm::d1;
  if (s == "D2" || s == "d2") return DualForm::d2;
  if (s == "D3" || s == "d3") return DualForm::d3;
  if (s == "D4" || s == "d4") return DualForm::d4;
  if (s == "D5" || s == "d5") return DualForm::d5;
  if (s == "D6" || s == "d6") return DualForm::d6;
  throw OpError(ErrKind::precondition, "unknown certificate form: " + s);
}

double pairing_value(const std::vector<Vec>& xstar, const std::vector<Vec>& refs) {
  double p = 0;
  for (std::size_t i = 0; i < std::min(xstar.size(), refs.size()); ++i) p += dot(xstar[i], refs[i]);
  return p;
}

BundleCheck reverify(const CertBundle& b, const std::vector<SetPtr>& sets, const NormSpec& norm) {
  BundleCheck c;
  if (b.omega.size() != sets.size() || b.xstar.size() != sets.size()) {
    c.why = "bundle size does not match the set family";
    return c;
  }
  const NormSpec dn = geo::dual(norm);
  const std::size_t n = sets.size();
  const std::size_t block = b.normalization == "sum-(n-1)" ? n - 1 : n;
  double bs = 0;
  for (std::size_t i = 0; i < block; ++i) bs += geo::norm(b.xstar[i], dn);
  c.normalization_gap = std::fabs(bs - 1.0);
  Vec sum = zeros(b.omega[0].size());
  for (const Vec& x : b.xstar) sum = add(sum, x);
  c.sum_gap = std::fabs(geo::norm(sum, dn) - b.sum_residual);
  double cd = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ConeRep k = geo::normal_cone(*sets[i], b.omega[i], b.kind);
    cd += k.whole ? 0.0 : geo::dist_to_cone(b.xstar[i], k, dn).value;
  }
  c.cone_gap = std::fabs(cd - b.cone_residual);
  const double tol = 1e-7;
  c.ok = c.normalization_gap <= tol && c.sum_gap <= tol && c.cone_gap <= tol;
  if (!c.ok) c.why = "stored residuals differ from recomputation";
  return c;
}

AlphaSup dual_alpha_sup(const std::vector<SetPtr>& sets, const Vec& xbar, double epsilon,
                        SupForm form, const NormSpec& norm, ConeKind kind) {
  if (sets.size() < 2) throw OpError(ErrKind::precondition, "dual_alpha_sup: need at least two sets");
  if (!(epsilon > 0)) throw OpError(ErrKind::precondition, "dual_alpha_sup: epsilon must be positive");
  const std::vector<double> radii(sets.size(), epsilon);
  const GridPlan plan = plan_grids(sets, xbar, radii, kind, norm);
  AlphaSup out;
  out.exact = plan.exact;
  if (plan.empty) {
    out.lo = out.hi = kInf;
    out.method = "vacuous";
    return out;
  }
  out.tuples = plan.tuple_ids.size();

  std::vector<FamilyBest> slots(plan.tuple_ids.size());
  parallel_for(plan.tuple_ids.size(), [&](std::size_t s) {
    const auto idx = decode_tuple(plan.tuple_ids[s], plan.radix);
    std::vector<ConeRep> cones;
    for (std::size_t i = 0; i < idx.size(); ++i) cones.push_back(plan.cones[i][idx[i]]);
    FamilyQuery q;
    q.cones = &cones;
    q.zero_sum = form == SupForm::zero_sum;
    q.ambient = norm;
    slots[s] = best_family(q);
  });

  double floor_min = kInf;
  std::size_t best = SIZE_MAX;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].lp_floor < kInf) floor_min = std::min(floor_min, slots[s].lp_floor);
    if (!slots[s].feasible) continue;
    if (best == SIZE_MAX || slots[s].value < slots[best].value) best = s;
    out.exact = out.exact && slots[s].exact_patterns && slots[s].factor == 1.0;
  }
  if (best == SIZE_MAX) {
    out.lo = out.hi = kInf;
    out.method = "vacuous";
    return out;
  }
  out.hi = slots[best].value;
  out.lo = out.exact ? out.hi : std::min(out.hi, std::max(0.0, floor_min));
  out.method = out.exact ? "stratified-lp" : "sampled-lp";
  const auto idx = decode_tuple(plan.tuple_ids[best], plan.radix);
  out.argmin = make_bundle(plan, idx, slots[best], false, kind);
  return out;
}

CertSearchResult dual_certificate_search(const std::vector<SetPtr>& sets, const Vec& xbar,
                                         double epsilon, double alpha, DualForm form,
                                         ConeKind kind, const NormSpec& norm) {
  if (sets.size() < 2)
    throw OpError(ErrKind::precondition, "dual_certificate_search: need at least two sets");
  if (!(epsilon > 0))
    throw OpError(ErrKind::precondition, "dual_certificate_search: epsilon must be positive");
  require_members(sets, xbar, "dual_certificate_search");
  const bool eps_threshold = form == DualForm::d1 || form == DualForm::d2;
  if (!eps_threshold && !(alpha > 0))
    throw OpError(ErrKind::precondition, "dual_certificate_search: alpha must be positive");
  const bool zero_sum = form == DualForm::d2 || form == DualForm::d4 || form == DualForm::d6;
  const bool head = form == DualForm::d5 || form == DualForm::d6;

  CertSearchResult res;
  res.threshold = eps_threshold ? epsilon : alpha;
  const std::vector<double> radii(sets.size(), epsilon);
  const GridPlan plan = plan_grids(sets, xbar, radii, kind, norm);
  if (plan.empty) {
    res.note = "infeasible-at-grid";
    return res;
  }
  res.tuples = plan.tuple_ids.size();

  std::vector<FamilyBest> slots(plan.tuple_ids.size());
  parallel_for(plan.tuple_ids.size(), [&](std::size_t s) {
    const auto idx = decode_tuple(plan.tuple_ids[s], plan.radix);
    std::vector<ConeRep> cones;
    for (std::size_t i = 0; i < idx.size(); ++i) cones.push_back(plan.cones[i][idx[i]]);
    FamilyQuery q;
    q.cones = &cones;
    q.zero_sum = zero_sum;
    q.head_normalization = head;
    q.ambient = norm;
    slots[s] = best_family(q);
  });

  std::size_t best = SIZE_MAX;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!slots[s].feasible) continue;
    if (best == SIZE_MAX || slots[s].value < slots[best].value) best = s;
  }
  if (best == SIZE_MAX) {
    res.note = "infeasible-at-grid";
    return res;
  }
  res.best = slots[best].value;
  if (strictly_less(res.best, res.threshold)) {
    const auto idx = decode_tuple(plan.tuple_ids[best], plan.radix);
    res.bundle = make_bundle(plan, idx, slots[best], head, kind);
    res.note = "found";
  } else {
    res.note = "infeasible-at-grid";
  }
  return res;
}

ModulusReport transversality_modulus(const std::vector<SetPtr>& sets, const Vec& xbar,
                                     double epsilon, std::size_t samples, std::uint64_t seed,
                                     const NormSpec& norm) {
  if (sets.size() < 2)
    throw OpError(ErrKind::precondition, "transversality_modulus: need at least two sets");
  if (!(epsilon > 0))
    throw OpError(ErrKind::precondition, "transversality_modulus: epsilon must be positive");
  require_members(sets, xbar, "transversality_modulus");
  const std::size_t n = sets.size();
  const std::size_t d = xbar.size();

  ModulusReport rep;
  rep.seed = seed;
  rep.samples = samples;

  // Deterministic sample list generated up front; evaluation is parallel.
  struct Sample {
    Vec x;
    std::vector<Vec> a;
  };
  Rng rng(seed);
  std::vector<Sample> draws(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    Sample& sm = draws[s];
    if (s % 2 == 0) {
      sm.x = xbar;
    } else {
      Vec u = rng.direction(d);
      const double nu = geo::norm(u, norm);
      sm.x = nu > 1e-15 ? axpy(xbar, epsilon * rng.unit() * (1.0 - 1e-9) / nu, u) : xbar;
    }
    for (std::size_t i = 0; i < n; ++i) {
      Vec u = rng.direction(d);
      const double nu = geo::norm(u, norm);
      const double r = epsilon * rng.unit() * (1.0 - 1e-9);
      sm.a.push_back(nu > 1e-15 ? scale(u, r / nu) : zeros(d));
    }
  }

  struct Eval {
    double ratio = kInf;
    bool emptied = false;
    bool skipped = false;
  };
  std::vector<Eval> evals(samples);
  const double den_tol = 1e-9;
  parallel_for(samples, [&](std::size_t s) {
    const Sample& sm = draws[s];
    double num_hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const SetPtr shifted = geo::make_shift(sets[i], scale(sm.a[i], -1.0));
      num_hi = std::max(num_hi, geo::dist_point_set(sm.x, *shifted, norm).hi);
    }
    geo::IntersectionQuery iq;
    iq.ambient = norm;
    for (std::size_t i = 0; i < n; ++i) iq.factors.push_back(geo::translated_factor(sets[i], sm.a[i]));
    const geo::DistResult den = geo::dist_point_intersection(sm.x, iq);
    if (den.value == kInf) {
      evals[s].emptied = true;
      evals[s].ratio = 0;
      return;
    }
    if (den.lo <= den_tol) {
      evals[s].skipped = true;
      return;
    }
    evals[s].ratio = num_hi / den.lo;
  });

  std::size_t worst = SIZE_MAX;
  for (std::size_t s = 0; s < samples; ++s) {
    if (evals[s].skipped) {
      ++rep.skipped;
      continue;
    }
    if (worst == SIZE_MAX || evals[s].ratio < evals[worst].ratio) worst = s;
  }
  if (worst != SIZE_MAX) {
    rep.upper = evals[worst].ratio;
    tr::TranslationSet ts;
    ts.a = draws[worst].a;
    double mn = 0;
    for (const Vec& a : ts.a) mn = std::max(mn, geo::norm(a, norm));
    ts.max_norm = mn;
    ts.witness = draws[worst].x;
    rep.worst = ts;
    rep.worst_x = draws[worst].x;
  }

  const AlphaSup sup = dual_alpha_sup(sets, xbar, epsilon, SupForm::members, norm, ConeKind::frechet);
  rep.lower = std::min(sup.lo, rep.upper);
  rep.lower_certified = sup.exact;
  return rep;
}

StationarityResult alpha_stationarity_test(const std::vector<SetPtr>& sets, const Vec& xbar,
                                           double alpha, double epsilon, std::size_t budget,
                                           const NormSpec& norm) {
  if (sets.size() < 2)
    throw OpError(ErrKind::precondition, "alpha_stationarity_test: need at least two sets");
  if (!(alpha > 0) || !(epsilon > 0))
    throw OpError(ErrKind::precondition, "alpha_stationarity_test: alpha and epsilon must be positive");
  require_members(sets, xbar, "alpha_stationarity_test");
  const std::size_t n = sets.size();
  const std::size_t d = xbar.size();

  StationarityResult out;

  auto attempt = [&](const std::vector<Vec>& dirs, double r) -> bool {
    if (out.evaluated >= budget) return false;
    tr::TranslationSet ts;
    double mx = 0, total = 0;
    for (const Vec& u : dirs) {
      ts.a.push_back(scale(u, r));
      mx = std::max(mx, geo::norm(ts.a.back(), norm));
      total += geo::norm(u, norm);
    }
    if (total <= 1e-12) return false;
    ts.max_norm = mx;
    tr::PrimalData data;
    data.sets = sets;
    data.xbar = xbar;
    data.tr = ts;
    data.params.epsilon = epsilon;
    data.params.alpha = alpha;
    data.norm = norm;
    const tr::PrimalCheckResult res = tr::check_primal_condition("P9", data);
    ++out.evaluated;
    if (res.ok()) {
      out.found = true;
      out.witness = ts;
      out.check = res;
      return true;
    }
    return false;
  };

  const std::vector<double> ladder = {1.0, 0.5, 0.25, 0.125};
  const double base_r = epsilon * (1.0 - 1e-6);

  // Dual-guided pull: align each translation with a small-sum normal family
  // at xbar, the direction the reversal construction uses.
  {
    std::vector<ConeRep> cones;
    for (const SetPtr& s : sets) cones.push_back(geo::normal_cone(*s, xbar, ConeKind::frechet));
    FamilyQuery q;
    q.cones = &cones;
    q.ambient = norm;
    const FamilyBest fb = best_family(q);
    if (fb.feasible) {
      std::vector<Vec> dirs;
      for (const Vec& x : fb.xstar) {
        const double nx = geo::norm(x, geo::dual(norm));
        dirs.push_back(nx > 1e-12 ? geo::dual_align(x, norm) : zeros(d));
      }
      for (double f : ladder)
        if (attempt(dirs, base_r * f)) return out;
    }
  }

  // Axis grid: shared direction, last flipped, and alternating signs.
  std::vector<Vec> axes;
  for (std::size_t j = 0; j < d; ++j) {
    Vec e = zeros(d);
    e[j] = 1.0;
    axes.push_back(e);
    e[j] = -1.0;
    axes.push_back(e);
  }
  if (d == 2)
    for (const Vec& u : circle_dirs(8)) axes.push_back(u);
  for (const Vec& v : axes) {
    Vec vu = v;
    const double nv = geo::norm(vu, norm);
    if (nv <= 1e-15) continue;
    vu = scale(vu, 1.0 / nv);
    std::vector<std::vector<Vec>> patterns;
    patterns.push_back(std::vector<Vec>(n, vu));
    auto flipped = std::vector<Vec>(n, vu);
    flipped[n - 1] = scale(vu, -1.0);
    patterns.push_back(flipped);
    std::vector<Vec> alt;
    for (std::size_t i = 0; i < n; ++i) alt.push_back(i % 2 ? scale(vu, -1.0) : vu);
    patterns.push_back(alt);
    for (const auto& pat : patterns)
      for (double f : ladder)
        if (attempt(pat, base_r * f)) return out;
    if (out.evaluated >= budget) break;
  }

  // Random refinement until the budget runs out.
  Rng rng(0x57a710ULL ^ static_cast<std::uint64_t>(n));
  while (out.evaluated < budget) {
    std::vector<Vec> dirs;
    for (std::size_t i = 0; i < n; ++i) {
      Vec u = rng.direction(d);
      const double nu = geo::norm(u, norm);
      dirs.push_back(nu > 1e-15 ? scale(u, 1.0 / nu) : zeros(d));
    }
    const double f = ladder[static_cast<std::size_t>(rng.uniform_int(0, 3))];
    if (attempt(dirs, base_r * f)) return out;
  }
  return out;
}

CertBundle certificate_convert(const std::vector<SetPtr>& sets, const CertBundle& in,
                               ConvertDirection dir, const NormSpec& norm) {
  const std::size_t n = sets.size();
  if (in.omega.size() != n || in.xstar.size() != n)
    throw OpError(ErrKind::precondition, "certificate_convert: bundle size mismatch");
  if (n < 2) throw OpError(ErrKind::precondition, "certificate_convert: need at least two sets");
  const NormSpec dn = geo::dual(norm);
  const bool head = dir == ConvertDirection::d5_to_d6 || dir == ConvertDirection::d6_to_d5;
  const std::size_t block = head ? n - 1 : n;

  std::vector<ConeRep> cones;
  for (std::size_t i = 0; i < n; ++i) cones.push_back(geo::normal_cone(*sets[i], in.omega[i], in.kind));

  double bs = 0;
  for (std::size_t i = 0; i < block; ++i) bs += geo::norm(in.xstar[i], dn);
  if (std::fabs(bs - 1.0) > 1e-7)
    throw OpError(ErrKind::precondition, "certificate_convert: input family is not normalized");
  Vec sum = zeros(in.omega[0].size());
  for (const Vec& x : in.xstar) sum = add(sum, x);
  const double sum_res = geo::norm(sum, dn);
  std::vector<double> cd(n, 0.0);
  double cd_total = 0;
  std::vector<Vec> nearest(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cones[i].whole) {
      nearest[i] = in.xstar[i];
      continue;
    }
    const geo::ConeDistResult r = geo::dist_to_cone(in.xstar[i], cones[i], dn);
    cd[i] = r.value;
    cd_total += r.value;
    nearest[i] = r.nearest;
  }

  const bool to_zero = dir == ConvertDirection::d1_to_d2 || dir == ConvertDirection::d5_to_d6;
  if (to_zero && cd_total > 1e-7)
    throw OpError(ErrKind::precondition, "certificate_convert: input family must lie in the normal cones");
  if (!to_zero && sum_res > 1e-7)
    throw OpError(ErrKind::precondition, "certificate_convert: input family must have zero sum");

  // Exactify the input clause before measuring the residual: snap to the
  // cones (member forms) or rebalance the sum away (zero-sum forms), then
  // renormalize the block exactly. The downstream maps require their exact
  // clause to machine precision.
  std::vector<Vec> xs = in.xstar;
  if (to_zero) {
    for (std::size_t i = 0; i < n; ++i)
      if (!cones[i].whole) xs[i] = nearest[i];
  } else {
    double total = 0;
    for (const Vec& x : xs) total += geo::norm(x, dn);
    if (total <= 1e-9)
      throw OpError(ErrKind::numeric, "certificate_convert: degenerate family");
    for (std::size_t i = 0; i < n; ++i)
      xs[i] = sub(xs[i], scale(sum, geo::norm(in.xstar[i], dn) / total));
  }
  double bs2 = 0;
  for (std::size_t i = 0; i < block; ++i) bs2 += geo::norm(xs[i], dn);
  if (bs2 <= 1e-9)
    throw OpError(ErrKind::numeric, "certificate_convert: normalization collapsed");
  for (Vec& x : xs) x = scale(x, 1.0 / bs2);

  double r = 0;
  if (to_zero) {
    Vec s = zeros(xs[0].size());
    for (const Vec& x : xs) s = add(s, x);
    r = geo::norm(s, dn);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      r += cones[i].whole ? 0.0 : geo::dist_to_cone(xs[i], cones[i], dn).value;
  }
  if (!(r < 1.0 - 1e-6))
    throw OpError(ErrKind::precondition, "certificate_convert: input residual must be below 1");
  const double r_guard = r + 3.0 * kTolStrict;
  const double bound = r <= 1e-12 ? 0.0 : r_guard / (1.0 - r_guard);

  std::vector<Vec> z;
  if (r <= 1e-12) {
    z = xs;  // exact certificate satisfies both shapes
  } else if (dir == ConvertDirection::d1_to_d2) {
    const alg::RescaleReport rr = alg::normalize_then_rebalance(xs, cones, r_guard, norm);
    z = rr.family.z;
  } else if (dir == ConvertDirection::d2_to_d1) {
    const alg::RescaleReport rr = alg::normalize_then_snap(xs, cones, r_guard, norm);
    z = rr.family.z;
  } else if (dir == ConvertDirection::d5_to_d6) {
    double total = 0;
    for (const Vec& x : xs) total += geo::norm(x, dn);
    Vec s = zeros(xs[0].size());
    for (const Vec& x : xs) s = add(s, x);
    std::vector<Vec> y;
    for (std::size_t i = 0; i < n; ++i)
      y.push_back(sub(xs[i], scale(s, geo::norm(xs[i], dn) / total)));
    double c = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) c += geo::norm(y[i], dn);
    if (c <= 1e-9) throw OpError(ErrKind::numeric, "certificate_convert: head normalization collapsed");
    for (Vec& v : y) v = scale(v, 1.0 / c);
    z = std::move(y);
  } else {  // d6_to_d5
    std::vector<Vec> y;
    for (std::size_t i = 0; i < n; ++i)
      y.push_back(cones[i].whole ? xs[i] : geo::dist_to_cone(xs[i], cones[i], dn).nearest);
    double c = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) c += geo::norm(y[i], dn);
    if (c <= 1e-9) throw OpError(ErrKind::numeric, "certificate_convert: head normalization collapsed");
    for (Vec& v : y) v = scale(v, 1.0 / c);
    z = std::move(y);
  }

  CertBundle out;
  out.omega = in.omega;
  out.xstar = z;
  out.normalization = head ? "sum-(n-1)" : "sum-n";
  out.kind = in.kind;
  Vec s2 = zeros(in.omega[0].size());
  for (const Vec& x : z) s2 = add(s2, x);
  out.sum_residual = geo::norm(s2, dn);
  out.cone_residual = 0;
  for (std::size_t i = 0; i < n; ++i)
    out.cone_residual += cones[i].whole ? 0.0 : geo::dist_to_cone(z[i], cones[i], dn).value;

  const double target = to_zero ? out.cone_residual : out.sum_residual;
  const double other = to_zero ? out.sum_residual : out.cone_residual;
  if (r > 1e-12 && !(target <= bound * (1.0 + 1e-9) + 1e-12))
    throw OpError(ErrKind::numeric, "certificate_convert: conversion bound violated");
  if (other > 1e-7)
    throw OpError(ErrKind::numeric, "certificate_convert: converted family lost its exact clause");
  return out;
}

namespace {

// Shared asymmetric separation search: translates the head sets, pins the
// head normalization, and bounds lambda * sum_{i<n} d + rho * d_n together
// with the pairing clause. Grid order is lexicographic; the first tuple
// whose exact recomputation clears every clause wins.
struct SepSpec {
  std::vector<SetPtr> sets;
  Vec xbar;
  std::vector<Vec> a;  // size n-1
  double epsilon = 0, lambda = 0, rho = 0, tau = 0;
  ConeKind kind = ConeKind::frechet;
  NormSpec norm;
  std::vector<Vec> extra_tail;
};

SeparationResult separation_engine(const SepSpec& sp) {
  const std::size_t n = sp.sets.size();
  const std::size_t d = sp.xbar.size();
  if (n < 2) throw OpError(ErrKind::precondition, "separation: need at least two sets");
  if (sp.a.size() != n - 1)
    throw OpError(ErrKind::precondition, "separation: expected one translation per head set");
  if (!(sp.tau > 0.0) || !(sp.tau < 1.0))
    throw OpError(ErrKind::precondition, "separation: tau must lie strictly between 0 and 1");
  if (!(sp.epsilon > 0) || !(sp.lambda > 0) || !(sp.rho > 0))
    throw OpError(ErrKind::precondition, "separation: epsilon, lambda and rho must be positive");
  require_members(sp.sets, sp.xbar, "separation");

  // Disjointness of the translated head against the fixed tail.
  {
    geo::IntersectionQuery iq;
    iq.ambient = sp.norm;
    for (std::size_t i = 0; i + 1 < n; ++i)
      iq.factors.push_back(geo::translated_factor(sp.sets[i], sp.a[i]));
    iq.factors.push_back(geo::Factor{sp.sets[n - 1], zeros(d), std::nullopt, false});
    const geo::EmptinessResult er = geo::intersection_empty(iq);
    if (er.verdict == geo::EmptinessResult::Verdict::nonempty)
      throw OpError(ErrKind::precondition, "separation: translated sets still intersect");
    if (er.verdict != geo::EmptinessResult::Verdict::empty)
      throw OpError(ErrKind::budget, "separation: cannot certify disjointness");
  }
  double m = 0;
  for (const Vec& ai : sp.a) m = std::max(m, geo::norm(ai, sp.norm));
  if (!(m < sp.epsilon)) {
    std::vector<SetPtr> shifted;
    for (std::size_t i = 0; i + 1 < n; ++i)
      shifted.push_back(geo::make_shift(sp.sets[i], scale(sp.a[i], -1.0)));
    shifted.push_back(sp.sets[n - 1]);
    const geo::DistanceReport d1 = geo::d1_sets(shifted, sp.norm);
    if (!(m < d1.lo + sp.epsilon))
      throw OpError(ErrKind::precondition, "separation: translation norms exceed the distance bound");
  }

  std::vector<double> radii(n, sp.lambda);
  radii[n - 1] = sp.rho;
  const GridPlan plan = plan_grids(sp.sets, sp.xbar, radii, sp.kind, sp.norm,
                                   sp.extra_tail.empty() ? nullptr : &sp.extra_tail);
  SeparationResult out;
  out.note = "not-found-at-budget";
  if (plan.empty) return out;
  out.tuples = plan.tuple_ids.size();

  std::vector<double> weights(n, sp.lambda);
  weights[n - 1] = sp.rho;

  struct Slot {
    FamilyBest fb;
    double pair_rhs = 0;
    std::vector<Vec> refs;
    bool viable = false;
  };
  const std::size_t chunk = std::max<std::size_t>(64, static_cast<std::size_t>(worker_count()) * 8);
  for (std::size_t start = 0; start < plan.tuple_ids.size(); start += chunk) {
    const std::size_t stop = std::min(plan.tuple_ids.size(), start + chunk);
    std::vector<Slot> slots(stop - start);
    parallel_for(stop - start, [&](std::size_t k) {
      const auto idx = decode_tuple(plan.tuple_ids[start + k], plan.radix);
      const Vec& wn = plan.grids[n - 1].pts[idx[n - 1]];
      Slot& sl = slots[k];
      double mx = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        sl.refs.push_back(sub(add(wn, sp.a[i]), plan.grids[i].pts[idx[i]]));
        mx = std::max(mx, geo::norm(sl.refs.back(), sp.norm));
      }
      if (mx <= 1e-12) return;
      sl.pair_rhs = sp.tau * mx;
      std::vector<ConeRep> cones;
      for (std::size_t i = 0; i < n; ++i) cones.push_back(plan.cones[i][idx[i]]);
      FamilyQuery q;
      q.cones = &cones;
      q.zero_sum = true;
      q.weights = weights;
      q.head_normalization = true;
      q.pair_refs = &sl.refs;
      q.pair_rhs = sl.pair_rhs;
      q.ambient = sp.norm;
      sl.fb = best_family(q);
      sl.viable = sl.fb.feasible && strictly_less(sl.fb.value, sp.epsilon) &&
                  strictly_less(sl.pair_rhs, sl.fb.pairing);
    });
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!slots[k].viable) continue;
      const auto idx = decode_tuple(plan.tuple_ids[start + k], plan.radix);
      out.found = true;
      out.bundle = make_bundle(plan, idx, slots[k].fb, true, sp.kind);
      out.objective = slots[k].fb.value;
      out.pairing_rhs = slots[k].pair_rhs;
      out.pair_refs = slots[k].refs;
      out.note = "found";
      return out;
    }
  }
  return out;
}

}  // namespace

SeparationResult separation_certificate_t51(const std::vector<SetPtr>& sets, const Vec& xbar,
                                            const std::vector<Vec>& a, double epsilon,
                                            double lambda, double rho, double tau,
                                            ConeKind kind, const NormSpec& norm) {
  SepSpec sp;
  sp.sets = sets;
  sp.xbar = xbar;
  sp.a = a;
  sp.epsilon = epsilon;
  sp.lambda = lambda;
  sp.rho = rho;
  sp.tau = tau;
  sp.kind = kind;
  sp.norm = norm;
  return separation_engine(sp);
}

SeparationResult separation_certificate_t57(const std::vector<SetPtr>& sets, const Vec& xbar,
                                            const std::vector<Vec>& a, double epsilon,
                                            double lambda, double rho, double tau,
                                            ConeKind kind, const NormSpec& norm) {
  const std::size_t n = sets.size();
  const std::size_t d = xbar.size();
  if (a.size() != n)
    throw OpError(ErrKind::precondition, "separation: expected one translation per set");
  if (!(rho > 0) || !(epsilon > 0))
    throw OpError(ErrKind::precondition, "separation: epsilon and rho must be positive");

  // Localized emptiness of the fully translated family.
  {
    geo::IntersectionQuery iq;
    iq.ambient = norm;
    for (std::size_t i = 0; i < n; ++i) iq.factors.push_back(geo::translated_factor(sets[i], a[i]));
    geo::Factor ball;
    ball.set = geo::whole_space(d);
    ball.shift = zeros(d);
    ball.local = geo::BallRep{xbar, rho, norm};
    ball.local_open = true;
    iq.factors.push_back(ball);
    const geo::EmptinessResult er = geo::intersection_empty(iq);
    if (er.verdict == geo::EmptinessResult::Verdict::nonempty)
      throw OpError(ErrKind::precondition, "separation: translated sets meet inside the ball");
    if (er.verdict != geo::EmptinessResult::Verdict::empty)
      throw OpError(ErrKind::budget, "separation: cannot certify localized disjointness");
  }
  double m = 0;
  for (const Vec& ai : a) m = std::max(m, geo::norm(ai, norm));
  double base = m;
  if (!(m < epsilon)) {
    std::vector<SetPtr> shifted;
    for (std::size_t i = 0; i < n; ++i) shifted.push_back(geo::make_shift(sets[i], scale(a[i], -1.0)));
    const geo::DistanceReport d1 = geo::d1_sets(shifted, norm);
    base = std::max(0.0, m - d1.lo);
    if (!(base < epsilon))
      throw OpError(ErrKind::precondition, "separation: translation norms exceed the distance bound");
  }
  const double eps_inner = 0.5 * (base + epsilon);
  const double rho_inner = rho - 0.5 * std::min(rho, epsilon - eps_inner);

  SepSpec sp;
  sp.sets = sets;
  sp.sets.push_back(geo::make_ball(xbar, rho_inner, norm));
  sp.xbar = xbar;
  sp.a = a;
  sp.epsilon = eps_inner;
  sp.lambda = lambda;
  sp.rho = rho_inner;
  sp.tau = tau;
  sp.kind = kind;
  sp.norm = norm;
  for (const double f : {0.0, 0.35, 0.7})
    for (const Vec& u : sphere_dirs(d, d == 3 ? 32 : 16)) {
      const double nu = geo::norm(u, norm);
      if (nu <= 1e-15) continue;
      sp.extra_tail.push_back(axpy(xbar, f * rho_inner / nu, u));
      if (f == 0.0) break;
    }

  SeparationResult inner = separation_engine(sp);
  if (!inner.found) return inner;

  SeparationResult out;
  out.tuples = inner.tuples;
  out.x = inner.bundle.omega[n];  // evaluation point inside the rho-ball
  CertBundle b;
  b.omega.assign(inner.bundle.omega.begin(), inner.bundle.omega.begin() + static_cast<long>(n));
  b.xstar.assign(inner.bundle.xstar.begin(), inner.bundle.xstar.begin() + static_cast<long>(n));
  b.normalization = "sum-n";
  b.kind = kind;
  const NormSpec dn = geo::dual(norm);
  Vec sum = zeros(d);
  for (const Vec& x : b.xstar) sum = add(sum, x);
  b.sum_residual = geo::norm(sum, dn);
  b.cone_residual = 0;
  std::vector<double> cds;
  for (std::size_t i = 0; i < n; ++i) {
    const ConeRep k = geo::normal_cone(*sets[i], b.omega[i], kind);
    const double cdi = k.whole ? 0.0 : geo::dist_to_cone(b.xstar[i], k, dn).value;
    cds.push_back(cdi);
    b.cone_residual += cdi;
  }
  // Combined clause at the requested radii.
  const double objective = lambda * b.cone_residual + rho * b.sum_residual;
  if (!strictly_less(objective, epsilon))
    throw OpError(ErrKind::numeric, "separation: combined residual failed the requested bound");
  out.pair_refs.clear();
  double mx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.pair_refs.push_back(sub(add(*out.x, a[i]), b.omega[i]));
    mx = std::max(mx, geo::norm(out.pair_refs.back(), norm));
  }
  b.pairing = pairing_value(b.xstar, out.pair_refs);
  out.pairing_rhs = tau * mx;
  if (!strictly_less(out.pairing_rhs, b.pairing))
    throw OpError(ErrKind::numeric, "separation: pairing clause failed after localization");
  out.bundle = b;
  out.objective = objective;
  out.found = true;
  out.note = "found";
  return out;
}

SeparationResult zheng_ng_certificate(const std::vector<SetPtr>& sets,
                                      const std::vector<Vec>& omega, double epsilon,
                                      double lambda, double tau, ConeKind kind,
                                      const NormSpec& norm) {
  const std::size_t n = sets.size();
  if (n < 2) throw OpError(ErrKind::precondition, "zheng_ng: need at least two sets");
  if (omega.size() != n) throw OpError(ErrKind::precondition, "zheng_ng: one base point per set");
  if (!(lambda > 0)) throw OpError(ErrKind::precondition, "zheng_ng: lambda must be positive");
  const std::size_t d = omega[0].size();
  for (std::size_t i = 0; i < n; ++i)
    if (!geo::member(omega[i], *sets[i], 1e-7))
      throw OpError(ErrKind::precondition, "zheng_ng: base points must lie in their sets");
  {
    geo::IntersectionQuery iq;
    iq.ambient = norm;
    for (const SetPtr& s : sets) iq.factors.push_back(geo::Factor{s, zeros(d), std::nullopt, false});
    const geo::EmptinessResult er = geo::intersection_empty(iq);
    if (er.verdict == geo::EmptinessResult::Verdict::nonempty)
      throw OpError(ErrKind::precondition, "zheng_ng: sets must be disjoint");
    if (er.verdict != geo::EmptinessResult::Verdict::empty)
      throw OpError(ErrKind::budget, "zheng_ng: cannot certify disjointness");
  }
  const double m = geo::d1_points(omega, norm);
  const geo::DistanceReport d1 = geo::d1_sets(sets, norm);
  if (!(m < d1.lo + epsilon))
    throw OpError(ErrKind::precondition, "zheng_ng: base points are not epsilon-near-closest");

  SepSpec sp;
  for (std::size_t i = 0; i < n; ++i) sp.sets.push_back(geo::make_shift(sets[i], scale(omega[i], -1.0)));
  sp.xbar = zeros(d);
  for (std::size_t i = 0; i + 1 < n; ++i) sp.a.push_back(sub(omega[n - 1], omega[i]));
  sp.epsilon = epsilon;
  sp.lambda = lambda;
  sp.rho = lambda;
  sp.tau = tau;
  sp.kind = kind;
  sp.norm = norm;
  SeparationResult inner = separation_engine(sp);
  if (!inner.found) return inner;

  SeparationResult out = inner;
  for (std::size_t i = 0; i < n; ++i) out.bundle.omega[i] = add(inner.bundle.omega[i], omega[i]);
  // Same duals against the original sets; residuals are translation-invariant
  // but re-measured for the certificate.
  const NormSpec dn = geo::dual(norm);
  out.bundle.cone_residual = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ConeRep k = geo::normal_cone(*sets[i], out.bundle.omega[i], kind);
    out.bundle.cone_residual += k.whole ? 0.0 : geo::dist_to_cone(out.bundle.xstar[i], k, dn).value;
  }
  const double alpha = epsilon / lambda;
  if (!strictly_less(out.bundle.cone_residual, alpha))
    throw OpError(ErrKind::numeric, "zheng_ng: cone residual failed the epsilon/lambda bound");
  out.pair_refs.clear();
  double mx = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    out.pair_refs.push_back(sub(out.bundle.omega[n - 1], out.bundle.omega[i]));
    mx = std::max(mx, geo::norm(out.pair_refs.back(), norm));
  }
  out.bundle.pairing = pairing_value(out.bundle.xstar, out.pair_refs);
  out.pairing_rhs = tau * mx;
  out.objective = out.bundle.cone_residual;
  if (!strictly_less(out.pairing_rhs, out.bundle.pairing))
    throw OpError(ErrKind::numeric, "zheng_ng: pairing clause failed after unshifting");
  return out;
}

}  // namespace tv::lab
