#include "transversal/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>

#include "transversal/lp.hpp"

namespace tv::orc {

namespace {

using geo::Box;
using geo::ConvexLeaf;
using geo::Factor;

// Largest ratio ||v||_n / ||v||_2; converts euclidean lattice slack into
// the ambient norm.
double euclid_to_norm(const NormSpec& n, std::size_t d) {
  if (n.kind == NormSpec::Kind::pnorm && n.p < 2.0)
    return std::pow(static_cast<double>(d), 1.0 / n.p - 0.5);
  return 1.0;
}

Vec neg(const Vec& v) { return scale(v, -1.0); }

// Certified member of the leaf near g: closed forms for points, affine
// flats and balls, cyclic projection for polyhedra. Empty optional when no
// certificate could be produced.
std::optional<Vec> certify_member(const Vec& g, const ConvexLeaf& leaf) {
  if (leaf.point) return add(*leaf.point, leaf.shift);
  if (leaf.affine) {
    const auto& af = *leaf.affine;
    const Vec base = add(af.base, leaf.shift);
    if (af.directions.empty()) return base;
    auto t = least_squares(af.directions, sub(g, base));
    if (!t) return base;
    Vec q = base;
    for (std::size_t k = 0; k < af.directions.size(); ++k) q = axpy(q, (*t)[k], af.directions[k]);
    return q;
  }
  if (leaf.ball) {
    const auto& b = *leaf.ball;
    if (b.radius == kInf) return g;
    const Vec c = add(b.center, leaf.shift);
    const Vec w = sub(g, c);
    const double r = geo::norm(w, b.norm);
    if (r <= b.radius) return g;
    return axpy(c, b.radius * (1.0 - 1e-12) / r, w);
  }
  if (leaf.poly) {
    auto q = geo::dykstra_project(g, geo::leaf_pieces(leaf));
    if (q && geo::leaf_member(*q, leaf, kTolMember)) return q;
    return std::nullopt;
  }
  return std::nullopt;
}

// Bounding box of the intersection of the factor boxes (shifted sets and
// local balls). Empty optional when no factor is bounded.
std::optional<Box> factors_box(const IntersectionQuery& q) {
  std::optional<Box> out;
  for (const Factor& f : q.factors) {
    std::optional<Box> fb;
    if (auto b = geo::bounding_box(*f.set)) {
      fb = *b;
      for (std::size_t j = 0; j < fb->lo.size(); ++j) {
        fb->lo[j] += f.shift[j];
        fb->hi[j] += f.shift[j];
      }
    }
    if (f.local && f.local->radius < kInf) {
      Box bb;
      bb.lo = add(f.local->center, f.shift);
      bb.hi = bb.lo;
      for (std::size_t j = 0; j < bb.lo.size(); ++j) {
        bb.lo[j] -= f.local->radius;
        bb.hi[j] += f.local->radius;
      }
      if (!fb)
        fb = bb;
      else
        for (std::size_t j = 0; j < fb->lo.size(); ++j) {
          fb->lo[j] = std::max(fb->lo[j], bb.lo[j]);
          fb->hi[j] = std::min(fb->hi[j], bb.hi[j]);
        }
    }
    if (!fb) continue;
    if (!out)
      out = fb;
    else
      for (std::size_t j = 0; j < out->lo.size(); ++j) {
        out->lo[j] = std::max(out->lo[j], fb->lo[j]);
        out->hi[j] = std::min(out->hi[j], fb->hi[j]);
      }
  }
  return out;
}

struct LpCross {
  enum class Verdict { empty, witness, inconclusive, skipped };
  Verdict verdict = Verdict::skipped;
  Vec point;
};

// Leaf-combination feasibility LPs over a fully polyhedral system; the box
// bounds keep phase 1 finite and are sound because any intersection point
// lies in every factor box.
LpCross lp_cross_check(const IntersectionQuery& q, const Box& box, double slack) {
  LpCross out;
  const std::size_t d = q.factors[0].set->dim;
  std::vector<std::vector<ConvexLeaf>> choice(q.factors.size());
  std::vector<std::optional<ConvexLeaf>> mandatory(q.factors.size());
  std::size_t combos = 1;
  for (std::size_t i = 0; i < q.factors.size(); ++i) {
    auto ls = geo::convex_leaves(*q.factors[i].set);
    if (ls.empty()) {
      out.verdict = LpCross::Verdict::empty;
      return out;
    }
    for (auto& l : ls) {
      l.shift = add(l.shift, q.factors[i].shift);
      if (!geo::polyhedral_leaf(l)) return out;
      choice[i].push_back(l);
    }
    if (q.factors[i].local) {
      ConvexLeaf bl;
      bl.ball = &*q.factors[i].local;
      bl.shift = q.factors[i].shift;
      if (!geo::polyhedral_leaf(bl)) return out;
      mandatory[i] = bl;
    }
    combos *= choice[i].size();
    if (combos > 128) return out;
  }
  bool closed_feasible = false;
  for (std::size_t k = 0; k < combos; ++k) {
    geo::LPBuilder lp;
    const std::size_t xoff = lp.vars(d);
    std::size_t rem = k;
    for (std::size_t i = 0; i < q.factors.size(); ++i) {
      const std::size_t pick = rem % choice[i].size();
      rem /= choice[i].size();
      geo::emit_leaf_membership(lp, xoff, choice[i][pick]);
      if (mandatory[i]) geo::emit_leaf_membership(lp, xoff, *mandatory[i]);
    }
    for (std::size_t j = 0; j < d; ++j) {
      geo::LinExpr e;
      e.add(xoff + j, 1.0);
      lp.add(e, '<', box.hi[j] + slack);
      lp.add(e, '>', box.lo[j] - slack);
    }
    const auto sol = geo::lp_solve(lp.build());
    if (sol.status != geo::LPSolution::Status::optimal) continue;
    closed_feasible = true;
    Vec x(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(d));
    bool certified = true;
    for (const Factor& f : q.factors)
      if (!geo::factor_member(x, f, kTolMember)) certified = false;
    if (certified) {
      out.verdict = LpCross::Verdict::witness;
      out.point = x;
      return out;
    }
  }
  out.verdict = closed_feasible ? LpCross::Verdict::inconclusive : LpCross::Verdict::empty;
  return out;
}

std::vector<Vec> cloud_points(const geo::SetRep& s, const char* what) {
  std::vector<Vec> pts;
  for (const ConvexLeaf& l : geo::convex_leaves(s)) {
    if (!l.point)
      throw OpError(ErrKind::unsupported, std::string(what) + ": exhaustive replay needs finite clouds");
    pts.push_back(add(*l.point, l.shift));
  }
  if (pts.empty()) throw OpError(ErrKind::precondition, std::string(what) + ": empty cloud");
  return pts;
}

bool find_in_cloud(const std::vector<Vec>& pts, const Vec& p) {
  for (const Vec& q : pts) {
    double m = 0;
    for (std::size_t j = 0; j < q.size(); ++j) m = std::max(m, std::fabs(q[j] - p[j]));
    if (m <= 1e-9) return true;
  }
  return false;
}

bool close1(double a, double b) {
  if (a == b) return true;  // covers the infinite margins of degenerate instances
  return std::fabs(a - b) <= 1e-9 * (1.0 + std::fabs(a) + std::fabs(b));
}

// Interval scan of the localization clause with open-ball semantics: the
// active pattern at a critical ratio governs the half-open interval above
// it, whose infimum sits at the (excluded) left endpoint, so >= 0 margins
// certify the strict clause for every scale.
struct ScanOut {
  double margin = kInf;
  std::size_t intervals = 0;
};

ScanOut pair_interval_scan(const std::vector<Vec>& pa, const std::vector<Vec>& pb, const Vec& ahat,
                           const Vec& bhat, double lambda, double rho, double eps, double dhat,
                           const NormSpec& nm) {
  std::vector<double> ra(pa.size()), rb(pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) ra[i] = geo::norm(sub(pa[i], ahat), nm) / lambda;
  for (std::size_t i = 0; i < pb.size(); ++i) rb[i] = geo::norm(sub(pb[i], bhat), nm) / rho;
  std::vector<double> crit;
  crit.reserve(ra.size() + rb.size());
  crit.insert(crit.end(), ra.begin(), ra.end());
  crit.insert(crit.end(), rb.begin(), rb.end());
  std::sort(crit.begin(), crit.end());
  crit.erase(std::unique(crit.begin(), crit.end()), crit.end());

  std::vector<std::size_t> oa(pa.size()), ob(pb.size());
  for (std::size_t i = 0; i < oa.size(); ++i) oa[i] = i;
  for (std::size_t i = 0; i < ob.size(); ++i) ob[i] = i;
  std::sort(oa.begin(), oa.end(), [&](std::size_t x, std::size_t y) { return ra[x] < ra[y]; });
  std::sort(ob.begin(), ob.end(), [&](std::size_t x, std::size_t y) { return rb[x] < rb[y]; });

  ScanOut out;
  std::vector<std::size_t> actA, actB;
  std::size_t ia = 0, ib = 0;
  double dmin = kInf;
  for (const double c : crit) {
    while (ia < oa.size() && ra[oa[ia]] <= c) {
      const std::size_t p = oa[ia++];
      for (const std::size_t qv : actB) dmin = std::min(dmin, geo::norm(sub(pa[p], pb[qv]), nm));
      actA.push_back(p);
    }
    while (ib < ob.size() && rb[ob[ib]] <= c) {
      const std::size_t qv = ob[ib++];
      for (const std::size_t p : actA) dmin = std::min(dmin, geo::norm(sub(pa[p], pb[qv]), nm));
      actB.push_back(qv);
    }
    if (c <= 0.0) continue;
    out.margin = std::min(out.margin, dmin + c * eps - dhat);
    ++out.intervals;
  }
  return out;
}

ScanOut tuple_interval_scan(const std::vector<std::vector<Vec>>& clouds,
                            const std::vector<Vec>& omega_hat, double lambda, double rho,
                            double eps, double d1hat, const NormSpec& nm) {
  const std::size_t n = clouds.size();
  std::vector<std::vector<double>> rat(n);
  std::vector<double> crit;
  for (std::size_t i = 0; i < n; ++i) {
    const double radius = i + 1 < n ? lambda : rho;
    rat[i].resize(clouds[i].size());
    for (std::size_t p = 0; p < clouds[i].size(); ++p) {
      rat[i][p] = geo::norm(sub(clouds[i][p], omega_hat[i]), nm) / radius;
      crit.push_back(rat[i][p]);
    }
  }
  std::sort(crit.begin(), crit.end());
  crit.erase(std::unique(crit.begin(), crit.end()), crit.end());

  ScanOut out;
  std::vector<double> margins(crit.size(), kInf);
  parallel_for(crit.size(), [&](std::size_t k) {
    const double c = crit[k];
    if (c <= 0.0) return;
    // Localized max-to-last distance over the pattern at c.
    double best = kInf;
    for (std::size_t p = 0; p < clouds[n - 1].size(); ++p) {
      if (rat[n - 1][p] > c) continue;
      double worst = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        double di = kInf;
        for (std::size_t qv = 0; qv < clouds[i].size(); ++qv) {
          if (rat[i][qv] > c) continue;
          di = std::min(di, geo::norm(sub(clouds[i][qv], clouds[n - 1][p]), nm));
        }
        worst = std::max(worst, di);
      }
      best = std::min(best, worst);
    }
    margins[k] = best + c * eps - d1hat;
  });
  for (std::size_t k = 0; k < crit.size(); ++k) {
    if (crit[k] <= 0.0) continue;
    out.margin = std::min(out.margin, margins[k]);
    ++out.intervals;
  }
  return out;
}

ReplayLine make_strict(std::string name, double lhs, double rhs, double tol = 0) {
  ReplayLine l;
  l.name = std::move(name);
  l.lhs = lhs;
  l.rhs = rhs;
  l.strict = true;
  l.margin = rhs - lhs;
  const double res = tol + 1e-12 * (1.0 + std::fabs(lhs) + (rhs < kInf ? std::fabs(rhs) : 0.0));
  l.boundary = std::fabs(rhs - lhs) <= res;
  l.holds = !l.boundary && lhs < rhs;
  return l;
}

ReplayLine make_loose(std::string name, double lhs, double rhs, double tol = 0) {
  ReplayLine l;
  l.name = std::move(name);
  l.lhs = lhs;
  l.rhs = rhs;
  l.margin = rhs - lhs;
  const double res = tol + 1e-12 * (1.0 + std::fabs(lhs) + (rhs < kInf ? std::fabs(rhs) : 0.0));
  l.boundary = std::fabs(rhs - lhs) <= res;
  l.holds = lhs <= rhs + res;
  return l;
}

ReplayLine make_eq(std::string name, double lhs, double rhs, double tol = 1e-9) {
  ReplayLine l;
  l.name = std::move(name);
  l.lhs = lhs;
  l.rhs = rhs;
  l.margin = -std::fabs(lhs - rhs);
  l.holds = std::fabs(lhs - rhs) <= tol;
  return l;
}

double req(const std::optional<double>& v, const char* what) {
  if (!v) throw OpError(ErrKind::precondition, std::string("inequality replay: missing ") + what);
  return *v;
}

ReplayReport replay_rescale(const ReplayInstance& inst) {
  ReplayReport rep;
  rep.id = "rescale";
  const double eps = req(inst.params.epsilon, "epsilon");
  const double rho = req(inst.params.rho, "rho");
  const double lambda = req(inst.params.lambda, "lambda");
  if (inst.z.empty() || inst.z.size() != inst.cones.size())
    throw OpError(ErrKind::precondition, "inequality replay: family and cones sizes differ");

  const NormSpec& nm = inst.norm;
  auto fam_sum = [&](const std::vector<Vec>& zz) {
    Vec s = zeros(zz[0].size());
    for (const Vec& v : zz) s = add(s, v);
    return s;
  };
  auto fam_cone_dist = [&](const std::vector<Vec>& zz) {
    double t = 0;
    for (std::size_t i = 0; i < zz.size(); ++i)
      t += geo::dist_to_cone(zz[i], inst.cones[i], geo::dual(nm)).value;
    return t;
  };
  auto fam_norm_sum = [&](const std::vector<Vec>& zz) {
    double t = 0;
    for (const Vec& v : zz) t += geo::dual_norm(v, nm);
    return t;
  };

  const double pre = lambda * fam_cone_dist(inst.z) + rho * geo::dual_norm(fam_sum(inst.z), nm);
  rep.lines.push_back(make_strict("lambda*sum d(z_i, K_i) + rho*||sum z_i|| < epsilon", pre, eps));
  rep.lines.push_back(make_eq("sum ||z_i|| = 1", fam_norm_sum(inst.z), 1.0));

  const bool to_zero_sum = eps + lambda <= rho;
  const bool to_members = eps + rho <= lambda;
  if (to_zero_sum)
    rep.lines.push_back(make_loose("epsilon + lambda <= rho", eps + lambda, rho));
  else if (to_members)
    rep.lines.push_back(make_loose("epsilon + rho <= lambda", eps + rho, lambda));
  else
    rep.lines.push_back(make_loose("epsilon + lambda <= rho", eps + lambda, rho));

  if (!inst.z_hat.empty()) {
    if (inst.z_hat.size() != inst.cones.size())
      throw OpError(ErrKind::precondition, "inequality replay: output family size differs");
    if (to_zero_sum) {
      rep.lines.push_back(make_eq("||sum z_hat_i|| = 0", geo::dual_norm(fam_sum(inst.z_hat), nm), 0.0));
      rep.lines.push_back(
          make_strict("sum d(z_hat_i, K_i) < epsilon/lambda", fam_cone_dist(inst.z_hat), eps / lambda));
    } else {
      double worst = 0;
      for (std::size_t i = 0; i < inst.z_hat.size(); ++i)
        worst = std::max(worst, geo::dist_to_cone(inst.z_hat[i], inst.cones[i], geo::dual(nm)).value);
      rep.lines.push_back(make_eq("max d(z_hat_i, K_i) = 0", worst, 0.0));
      rep.lines.push_back(
          make_strict("||sum z_hat_i|| < epsilon/rho", geo::dual_norm(fam_sum(inst.z_hat), nm), eps / rho));
    }
    rep.lines.push_back(make_eq("sum ||z_hat_i|| = 1", fam_norm_sum(inst.z_hat), 1.0));
  }

  if (!inst.pair_refs.empty()) {
    const double tau = req(inst.params.tau, "tau");
    if (inst.pair_refs.size() != inst.z.size())
      throw OpError(ErrKind::precondition, "inequality replay: pairing reference size differs");
    double mx = 0, pin = 0;
    for (std::size_t i = 0; i < inst.z.size(); ++i) {
      mx = std::max(mx, geo::norm(inst.pair_refs[i], nm));
      pin += dot(inst.z[i], inst.pair_refs[i]);
    }
    rep.lines.push_back(make_loose("tau*max||x_i|| <= sum <z_i, x_i>", tau * mx, pin));
    if (!inst.z_hat.empty()) {
      const double tau_hat =
          to_zero_sum ? (tau * rho - eps) / (rho + eps) : (tau * lambda - eps) / (lambda + eps);
      double pout = 0;
      for (std::size_t i = 0; i < inst.z_hat.size(); ++i) pout += dot(inst.z_hat[i], inst.pair_refs[i]);
      rep.lines.push_back(make_strict("tau_hat*max||x_i|| < sum <z_hat_i, x_i>", tau_hat * mx, pout));
    }
  }

  rep.all_hold = true;
  for (const auto& l : rep.lines) rep.all_hold = rep.all_hold && l.holds;
  return rep;
}

ReplayReport replay_chain(const ReplayInstance& inst) {
  ReplayReport rep;
  rep.id = "chain";
  const NormSpec& nm = inst.norm;
  double d1v = 0, d3v = 0, w1 = 0, w2 = 0, w3 = 0;
  geo::DistanceReport d2r;
  std::size_t n = 0;
  if (!inst.omega.empty()) {
    n = inst.omega.size();
    if (n < 2) throw OpError(ErrKind::precondition, "inequality replay: chain needs n >= 2");
    d1v = geo::d1_points(inst.omega, nm);
    d2r = geo::d2_points(inst.omega, nm);
    d3v = geo::d3_points(inst.omega, nm);
    w2 = d2r.hi - d2r.lo;
  } else if (!inst.sets.empty()) {
    n = inst.sets.size();
    if (n < 2) throw OpError(ErrKind::precondition, "inequality replay: chain needs n >= 2");
    const auto d1r = geo::d1_sets(inst.sets, nm);
    d2r = geo::d2_sets(inst.sets, nm);
    const auto d3r = geo::d3_sets(inst.sets, nm);
    d1v = d1r.value;
    d3v = d3r.value;
    w1 = d1r.hi - d1r.lo;
    w2 = d2r.hi - d2r.lo;
    w3 = d3r.hi - d3r.lo;
  } else {
    throw OpError(ErrKind::precondition, "inequality replay: chain needs omega or sets");
  }

  rep.lines.push_back(make_loose("d2 <= d1", d2r.value, d1v, w1 + w2 + 1e-9));
  rep.lines.push_back(make_loose("d1 <= 2*d2", d1v, 2.0 * d2r.value, w1 + 2.0 * w2 + 1e-9));
  if (n == 2) rep.lines.push_back(make_eq("d1 = 2*d2", d1v, 2.0 * d2r.value, w1 + 2.0 * w2 + 1e-9));
  rep.lines.push_back(make_loose("d2 <= d3", d2r.value, d3v, w2 + w3 + 1e-9));
  rep.lines.push_back(make_loose("d3 <= 2*d2", d3v, 2.0 * d2r.value, w3 + 2.0 * w2 + 1e-9));
  if (n == 2) rep.lines.push_back(make_eq("d2 = d3", d2r.value, d3v, w2 + w3 + 1e-9));

  rep.all_hold = true;
  for (const auto& l : rep.lines) rep.all_hold = rep.all_hold && l.holds;
  return rep;
}

ReplayReport replay_stationarity(const ReplayInstance& inst) {
  ReplayReport rep;
  rep.id = "stationarity";
  const double eps = req(inst.params.epsilon, "epsilon");
  const double rho = req(inst.params.rho, "rho");
  const double alpha = eps / rho;
  const NormSpec& nm = inst.norm;
  if (inst.sets.size() < 2 || inst.a.size() != inst.sets.size() || inst.xbar.empty())
    throw OpError(ErrKind::precondition, "inequality replay: stationarity needs sets, xbar, a");

  double maxa = 0;
  for (const Vec& ai : inst.a) maxa = std::max(maxa, geo::norm(ai, nm));
  rep.lines.push_back(make_strict("max ||a_i|| < epsilon", maxa, eps));

  IntersectionQuery iq;
  iq.ambient = nm;
  for (std::size_t i = 0; i < inst.sets.size(); ++i)
    iq.factors.push_back(geo::translated_factor(inst.sets[i], inst.a[i]));
  const auto cap = geo::dist_point_intersection(inst.xbar, iq);
  const bool emptied = cap.value == kInf;
  const double cap_lo = emptied ? kInf : std::max(cap.lo, 0.0);
  const double cap_w = emptied ? 0.0 : (cap.hi - cap.lo);

  rep.lines.push_back(make_strict("epsilon < alpha*d(xbar, translated intersection)", eps,
                                  emptied ? kInf : alpha * cap_lo, alpha * cap_w));

  double maxd_hi = 0, maxd_w = 0;
  for (std::size_t i = 0; i < inst.sets.size(); ++i) {
    const SetPtr sh = geo::make_shift(inst.sets[i], neg(inst.a[i]));
    const auto dr = geo::dist_point_set(inst.xbar, *sh, nm);
    maxd_hi = std::max(maxd_hi, dr.hi);
    maxd_w = std::max(maxd_w, dr.hi - dr.lo);
  }
  rep.lines.push_back(make_loose("max_i d(xbar, Omega_i - a_i) <= max ||a_i||", maxd_hi, maxa,
                                 maxd_w + 1e-12));
  rep.lines.push_back(make_strict("max_i d(xbar, Omega_i - a_i) < alpha*d(xbar, translated intersection)",
                                  maxd_hi, emptied ? kInf : alpha * cap_lo,
                                  maxd_w + alpha * cap_w));

  rep.all_hold = true;
  for (const auto& l : rep.lines) rep.all_hold = rep.all_hold && l.holds;
  return rep;
}

}  // namespace

GridBracket grid_distance_oracle(const Vec& x, const SetPtr& a, const NormSpec& n, double spacing) {
  if (!a) throw OpError(ErrKind::precondition, "grid distance oracle: null set");
  const std::size_t d = a->dim;
  if (x.size() != d) throw OpError(ErrKind::precondition, "grid distance oracle: dimension mismatch");
  if (d == 0 || d > 3) throw OpError(ErrKind::unsupported, "grid distance oracle supports 1 <= d <= 3");
  const auto leaves = geo::convex_leaves(*a);
  if (leaves.empty()) throw OpError(ErrKind::precondition, "grid distance oracle: empty set");
  const auto box = geo::bounding_box(*a);
  if (!box) throw OpError(ErrKind::precondition, "grid distance oracle: region unbounded");

  double diam = 0;
  for (std::size_t j = 0; j < d; ++j) diam = std::max(diam, box->hi[j] - box->lo[j]);
  const double h = spacing > 0 ? spacing : std::max(diam, 1e-9) / 128.0;

  Vec lo = box->lo, hi = box->hi;
  std::vector<std::size_t> counts(d);
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] -= h;
    hi[j] += h;
    counts[j] = static_cast<std::size_t>(std::ceil((hi[j] - lo[j]) / h)) + 1;
    total *= counts[j];
    if (total > 8000000) throw OpError(ErrKind::budget, "grid distance oracle: node budget exceeded");
  }

  const double band = kTolFeas + h;
  const std::size_t slabs = counts[d - 1];
  const std::size_t per = total / slabs;
  struct Part {
    double m = kInf;
    std::size_t in_band = 0;
    std::vector<std::pair<double, Vec>> cand;
  };
  std::vector<Part> parts(slabs);
  parallel_for(slabs, [&](std::size_t s) {
    Part& pt = parts[s];
    Vec node(d);
    node[d - 1] = lo[d - 1] + static_cast<double>(s) * h;
    for (std::size_t k = 0; k < per; ++k) {
      std::size_t rem = k;
      for (std::size_t j = 0; j + 1 < d; ++j) {
        node[j] = lo[j] + static_cast<double>(rem % counts[j]) * h;
        rem /= counts[j];
      }
      double flb = kInf;
      for (const ConvexLeaf& l : leaves) flb = std::min(flb, geo::euclid_lb_dist(node, l));
      if (flb > band) continue;
      ++pt.in_band;
      const double v = geo::norm(sub(x, node), n);
      pt.m = std::min(pt.m, v);
      pt.cand.emplace_back(v, node);
      if (pt.cand.size() > 32) {
        std::sort(pt.cand.begin(), pt.cand.end(),
                  [](const auto& p, const auto& q) { return p.first < q.first; });
        pt.cand.resize(16);
      }
    }
  });

  GridBracket out;
  out.spacing = h;
  out.grid_points = total;
  double m = kInf;
  std::vector<std::pair<double, Vec>> cand;
  for (const Part& pt : parts) {
    m = std::min(m, pt.m);
    out.band_points += pt.in_band;
    cand.insert(cand.end(), pt.cand.begin(), pt.cand.end());
  }
  if (out.band_points == 0) {
    out.lo = kInf;
    out.hi = kInf;
    return out;
  }
  std::sort(cand.begin(), cand.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
  if (cand.size() > 48) cand.resize(48);

  double hiv = kInf;
  Vec nearest;
  auto consider = [&](const std::optional<Vec>& q, const ConvexLeaf& l) {
    if (!q || !geo::leaf_member(*q, l, 1e-7)) return;
    const double v = geo::norm(sub(x, *q), n);
    if (v < hiv) {
      hiv = v;
      nearest = *q;
    }
  };
  for (const ConvexLeaf& l : leaves) {
    try {
      consider(geo::leaf_anchor(l), l);
    } catch (const OpError&) {
    }
  }
  for (const auto& cg : cand) {
    const Vec& g = cg.second;
    std::size_t bi = 0;
    double blb = kInf;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const double lb = geo::euclid_lb_dist(g, leaves[li]);
      if (lb < blb) {
        blb = lb;
        bi = li;
      }
    }
    consider(certify_member(g, leaves[bi]), leaves[bi]);
  }
  if (hiv == kInf)
    throw OpError(ErrKind::numeric, "grid distance oracle: could not certify a set member");

  const double slack = euclid_to_norm(n, d) * h * std::sqrt(static_cast<double>(d)) * 0.5;
  out.lo = std::max(0.0, m - slack);
  out.hi = hiv;
  out.lo = std::min(out.lo, out.hi);
  out.nearest = nearest;
  return out;
}

EmptinessCertificate emptiness_oracle(const IntersectionQuery& q,
                                      const std::optional<BallRep>& region, double spacing) {
  if (q.factors.empty()) throw OpError(ErrKind::precondition, "emptiness oracle: empty collection");
  IntersectionQuery aug = q;
  if (region) {
    Factor rf;
    rf.set = geo::make_ball(region->center, region->radius, region->norm);
    rf.shift = zeros(region->center.size());
    aug.factors.push_back(rf);
  }
  const auto rb = factors_box(aug);
  if (!rb) throw OpError(ErrKind::precondition, "emptiness oracle: region unbounded");
  double diam = 0, gap = 0;
  for (std::size_t j = 0; j < rb->lo.size(); ++j) {
    diam = std::max(diam, rb->hi[j] - rb->lo[j]);
    gap = std::max(gap, rb->lo[j] - rb->hi[j]);
  }
  EmptinessCertificate cert;
  const double h = spacing > 0 ? spacing : std::max(diam, 1e-9) / 128.0;
  cert.spacing = h;
  if (gap > 0) {  // factor boxes already disjoint
    cert.empty = true;
    cert.margin = gap;
    cert.method = "grid";
    return cert;
  }

  const auto g = geo::intersection_empty_grid(aug, h);
  using V = geo::EmptinessResult::Verdict;
  if (g.verdict == V::nonempty) {
    cert.empty = false;
    cert.witness = g.witness;
    cert.margin = g.margin;
    cert.method = "grid";
    return cert;
  }
  const auto lp = lp_cross_check(aug, *rb, h);
  if (g.verdict == V::empty) {
    if (lp.verdict == LpCross::Verdict::witness)
      throw OpError(ErrKind::numeric, "oracle-disagreement: grid empty but lp found a member");
    cert.empty = true;
    cert.margin = g.margin;
    cert.method = lp.verdict == LpCross::Verdict::empty ? "grid+lp" : "grid";
    return cert;
  }
  if (lp.verdict == LpCross::Verdict::empty) {
    cert.empty = true;
    cert.margin = 0;
    cert.method = "grid+lp";
    return cert;
  }
  if (lp.verdict == LpCross::Verdict::witness) {
    cert.empty = false;
    cert.witness = lp.point;
    cert.margin = 0;
    cert.method = "grid+lp";
    return cert;
  }
  throw OpError(ErrKind::numeric,
                "inconclusive-margin: grid margin below band at spacing " + fmt_g12(h));
}

EvpCheck evp_exhaustive_check(const evp::FiniteMetricSpace& space, const std::vector<double>& f,
                              const evp::EVPResult& r, double epsilon, double lambda) {
  const std::size_t n = space.size();
  if (f.size() != n || n == 0 || epsilon <= 0 || lambda <= 0)
    throw OpError(ErrKind::precondition, "evp check: malformed instance");
  EvpCheck out;
  if (r.start >= n || r.point >= n) {
    out.why = "result indices out of range";
    return out;
  }
  double fmin = f[0];
  for (const double v : f) fmin = std::min(fmin, v);
  out.premise_ok = f[r.start] < fmin + epsilon;

  out.clause1 = lambda - space.dist(r.point, r.start);
  out.clause2 = f[r.start] - f[r.point];
  double c3 = kInf, c3s = kInf;
  for (std::size_t xi = 0; xi < n; ++xi) {
    const double v = f[xi] + (epsilon / lambda) * space.dist(xi, r.point) - f[r.point];
    if (xi != r.point) c3 = std::min(c3, v);
    if (xi != r.start) c3s = std::min(c3s, v);
  }
  out.clause3 = c3;
  out.start_variant = c3s > 0;

  bool stored = close1(out.clause1, r.clause1_margin) && close1(out.clause2, r.clause2_margin) &&
                close1(out.clause3, r.clause3_margin) && out.start_variant == r.clause3_start_variant &&
                std::fabs(f[r.start] - r.f_start) <= 1e-12 && std::fabs(f[r.point] - r.f_point) <= 1e-12;
  if (!r.path.empty()) stored = stored && r.path.front() == r.start && r.path.back() == r.point;
  out.margins_match = stored;

  if (!out.premise_ok)
    out.why = "premise";
  else if (!(out.clause1 > 0))
    out.why = "localization clause";
  else if (!(out.clause2 >= 0))
    out.why = "descent clause";
  else if (!(out.clause3 > 0))
    out.why = "strict minimality clause";
  else if (!out.margins_match)
    out.why = "stored margins differ";
  out.ok = out.why.empty();
  return out;
}

EvpCheck evp_exhaustive_check(const SetPtr& A, const SetPtr& B, const Vec& a, const Vec& b,
                              const evp::PairResult& r, double epsilon, double lambda, double rho,
                              const NormSpec& norm) {
  if (!A || !B || epsilon <= 0 || lambda <= 0 || rho <= 0)
    throw OpError(ErrKind::precondition, "evp pair check: malformed instance");
  const auto pa = cloud_points(*A, "evp pair check");
  const auto pb = cloud_points(*B, "evp pair check");
  if (!find_in_cloud(pa, a) || !find_in_cloud(pb, b))
    throw OpError(ErrKind::precondition, "evp pair check: start pair not in the clouds");

  EvpCheck out;
  const double dstart = geo::norm(sub(a, b), norm);
  double dAB = kInf;
  for (const Vec& p : pa)
    for (const Vec& qv : pb) dAB = std::min(dAB, geo::norm(sub(p, qv), norm));
  out.premise_ok = dstart < dAB + epsilon;

  if (!find_in_cloud(pa, r.a_hat) || !find_in_cloud(pb, r.b_hat)) {
    out.why = "selected pair not in the clouds";
    return out;
  }
  const double dhat = geo::norm(sub(r.a_hat, r.b_hat), norm);
  out.clause1 = dstart - dhat;
  const double la = lambda - geo::norm(sub(r.a_hat, a), norm);
  const double lb = rho - geo::norm(sub(r.b_hat, b), norm);
  out.clause3 = std::min(la, lb);

  const auto scan = pair_interval_scan(pa, pb, r.a_hat, r.b_hat, lambda, rho, epsilon, dhat, norm);
  out.clause2 = scan.margin;

  out.margins_match = close1(out.clause1, r.clause1_margin) && close1(la, r.loc_a_margin) &&
                      close1(lb, r.loc_b_margin) && close1(scan.margin, r.clause2_margin) &&
                      close1(dhat, r.d_hat) && close1(dstart, r.d_start);

  if (!out.premise_ok)
    out.why = "premise";
  else if (!(out.clause1 >= 0))
    out.why = "descent clause";
  else if (!(la > 0 && lb > 0))
    out.why = "localization clause";
  else if (!(out.clause2 >= 0))
    out.why = "interval clause";
  else if (!out.margins_match)
    out.why = "stored margins differ";
  out.ok = out.why.empty();
  return out;
}

EvpCheck evp_exhaustive_check(const std::vector<SetPtr>& sets, const std::vector<Vec>& omega,
                              const evp::TupleResult& r, double epsilon, double lambda, double rho,
                              const NormSpec& norm) {
  const std::size_t n = sets.size();
  if (n < 2 || omega.size() != n || epsilon <= 0 || lambda <= 0 || rho <= 0)
    throw OpError(ErrKind::precondition, "evp tuple check: malformed instance");
  std::vector<std::vector<Vec>> clouds(n);
  for (std::size_t i = 0; i < n; ++i) {
    clouds[i] = cloud_points(*sets[i], "evp tuple check");
    if (!find_in_cloud(clouds[i], omega[i]))
      throw OpError(ErrKind::precondition, "evp tuple check: start tuple not in the clouds");
  }

  EvpCheck out;
  auto d1_at = [&](const std::vector<Vec>& w) {
    double worst = 0;
    for (std::size_t i = 0; i + 1 < n; ++i)
      worst = std::max(worst, geo::norm(sub(w[i], w[n - 1]), norm));
    return worst;
  };
  const double d1start = d1_at(omega);
  double d1best = kInf;
  for (const Vec& p : clouds[n - 1]) {
    double worst = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double di = kInf;
      for (const Vec& qv : clouds[i]) di = std::min(di, geo::norm(sub(qv, p), norm));
      worst = std::max(worst, di);
    }
    d1best = std::min(d1best, worst);
  }
  out.premise_ok = d1start < d1best + epsilon;

  if (r.omega_hat.size() != n) {
    out.why = "selected tuple size differs";
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!find_in_cloud(clouds[i], r.omega_hat[i])) {
      out.why = "selected tuple not in the clouds";
      return out;
    }
  const double d1hat = d1_at(r.omega_hat);
  out.clause1 = d1start - d1hat;

  std::vector<double> loc(n);
  double locmin = kInf;
  for (std::size_t i = 0; i < n; ++i) {
    const double radius = i + 1 < n ? lambda : rho;
    loc[i] = radius - geo::norm(sub(r.omega_hat[i], omega[i]), norm);
    locmin = std::min(locmin, loc[i]);
  }
  out.clause3 = locmin;

  const auto scan = tuple_interval_scan(clouds, r.omega_hat, lambda, rho, epsilon, d1hat, norm);
  out.clause2 = scan.margin;

  bool stored = close1(out.clause1, r.clause1_margin) && close1(scan.margin, r.clause2_margin) &&
                close1(d1hat, r.d1_hat) && close1(d1start, r.d1_start) && r.loc_margins.size() == n;
  if (stored)
    for (std::size_t i = 0; i < n; ++i) stored = stored && close1(loc[i], r.loc_margins[i]);
  out.margins_match = stored;

  if (!out.premise_ok)
    out.why = "premise";
  else if (!(out.clause1 >= 0))
    out.why = "descent clause";
  else if (!(locmin > 0))
    out.why = "localization clause";
  else if (!(out.clause2 >= 0))
    out.why = "interval clause";
  else if (!out.margins_match)
    out.why = "stored margins differ";
  out.ok = out.why.empty();
  return out;
}

ReplayReport inequality_replay(const std::string& id, const ReplayInstance& inst) {
  if (id == "rescale") return replay_rescale(inst);
  if (id == "chain") return replay_chain(inst);
  if (id == "stationarity") return replay_stationarity(inst);
  throw OpError(ErrKind::precondition, "inequality replay: unknown id " + id);
}

}  // namespace tv::orc
