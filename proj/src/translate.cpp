#include "transversal/translate.hpp"

#include <algorithm>
#include <cmath>

#include "transversal/multiset.hpp"

namespace tv::tr {

using geo::BallRep;
using geo::ConeDistResult;
using geo::ConeKind;
using geo::ConeRep;
using geo::DistResult;
using geo::EmptinessResult;
using geo::Factor;
using geo::IntersectionQuery;
using geo::SetRep;

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    default: return "unknown";
  }
}

namespace {

constexpr double kPi = 3.14159265358979323846;

void require(bool ok, ErrKind k, const std::string& msg) {
  if (!ok) throw OpError(k, msg);
}

double max_norm_of(const std::vector<Vec>& a, const NormSpec& nm) {
  double m = 0;
  for (const Vec& v : a) m = std::max(m, geo::norm(v, nm));
  return m;
}

void check_family(const std::vector<SetPtr>& sets, std::size_t min_count, const char* who) {
  require(sets.size() >= min_count, ErrKind::precondition,
          std::string(who) + ": too few sets");
  for (const SetPtr& s : sets)
    require(s != nullptr, ErrKind::precondition, std::string(who) + ": null set");
  const std::size_t d = sets[0]->dim;
  for (const SetPtr& s : sets)
    require(s->dim == d, ErrKind::precondition, std::string(who) + ": dimension mismatch");
}

// Display geometry shared by the ten primal conditions.
struct Shape {
  bool anchored = false;    // factors subtract omega_i (+ a_i)
  bool last_fixed = false;  // the last set carries no translation
  bool metric = false;      // distance comparison instead of emptiness
  int ball = 0;             // 0 none, 1 B_rho(xbar), 2 rho * B at the origin
  int bound = 0;            // 0 eps, 1 eps*rho (eps when rho = inf), 2 alpha*rho
};

Shape shape_of(const std::string& id) {
  if (id == "P1") return {false, false, false, 0, 0};
  if (id == "P2") return {false, false, false, 1, 0};
  if (id == "P3") return {true, false, false, 2, 1};
  if (id == "P4") return {false, true, false, 0, 0};
  if (id == "P5") return {false, true, false, 1, 0};
  if (id == "P6") return {true, true, false, 2, 1};
  if (id == "P7") return {true, false, false, 2, 2};
  if (id == "P8") return {true, true, false, 2, 2};
  Shape m;
  m.metric = true;
  if (id == "P9" || id == "P10") return m;
  throw OpError(ErrKind::precondition, "unknown condition id: " + id);
}

std::string holds_certificate(const std::string& method) {
  if (method == "enumeration") return "enumeration";
  if (method == "lp-infeasible") return "lp-infeasible";
  if (method == "grid") return "oracle-grid";
  return method.empty() ? "enumeration" : method;
}

}  // namespace

PrimalCheckResult check_primal_condition(const std::string& id, const PrimalData& data) {
  const Shape sh = shape_of(id);
  check_family(data.sets, 2, "primal check");
  const std::size_t n = data.sets.size();
  const std::size_t d = data.sets[0]->dim;
  const NormSpec& nm = data.norm;

  const std::size_t k = (sh.last_fixed && !sh.metric) ? n - 1 : n;
  require(data.tr.a.size() == k, ErrKind::precondition, "primal check: translation count");
  for (const Vec& v : data.tr.a) require_dim(v, d, "primal check");
  if (sh.anchored) {
    require(data.tr.omega.size() == n, ErrKind::precondition, "primal check: anchor count");
    for (const Vec& v : data.tr.omega) require_dim(v, d, "primal check");
  }
  require(data.params.epsilon.has_value() && *data.params.epsilon > 0,
          ErrKind::precondition, "primal check: epsilon required");
  const double eps = *data.params.epsilon;
  const double rho = data.tr.rho;
  require(rho > 0, ErrKind::precondition, "primal check: rho must be positive");

  double alpha = 0;
  if (sh.bound == 2 || sh.metric) {
    require(data.params.alpha.has_value() && *data.params.alpha > 0,
            ErrKind::precondition, "primal check: alpha required");
    alpha = *data.params.alpha;
  }

  PrimalCheckResult out;
  out.id = id;

  double bound = eps;
  if (sh.bound == 1) bound = std::isfinite(rho) ? eps * rho : eps;
  if (sh.bound == 2) bound = std::isfinite(rho) ? alpha * rho : alpha;
  out.norm_margin = bound - max_norm_of(data.tr.a, nm);

  // Membership clauses: omega_i in Omega_i, inside B_eps(xbar) when anchored
  // to a reference point.
  bool member_ok = true;
  if (sh.anchored) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!geo::member(data.tr.omega[i], *data.sets[i], kTolMember)) member_ok = false;
      if (data.xbar)
        out.member_margin =
            std::min(out.member_margin, eps - geo::dist(data.tr.omega[i], *data.xbar, nm));
    }
  }

  if (sh.metric) {
    const Vec* x = nullptr;
    if (id == "P10") {
      require(data.tr.witness.has_value(), ErrKind::precondition,
              "primal check: P10 needs an evaluation point");
      x = &*data.tr.witness;
      if (data.xbar)
        out.member_margin = std::min(out.member_margin, eps - geo::dist(*x, *data.xbar, nm));
    } else {
      require(data.xbar.has_value(), ErrKind::precondition,
              "primal check: P9 needs the reference point");
      x = &*data.xbar;
    }
    require_dim(*x, d, "primal check");

    double rhs_lo = 0, rhs_hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      DistResult di = geo::dist_point_set(add(*x, data.tr.a[i]), *data.sets[i], nm);
      rhs_lo = std::max(rhs_lo, di.lo);
      rhs_hi = std::max(rhs_hi, di.hi);
    }
    IntersectionQuery q;
    q.ambient = nm;
    for (std::size_t i = 0; i < n; ++i)
      q.factors.push_back(geo::translated_factor(data.sets[i], data.tr.a[i]));
    DistResult dcap = geo::dist_point_intersection(*x, q);
    out.lhs_lo = alpha * dcap.lo;
    out.lhs_hi = alpha * dcap.hi;
    out.rhs_lo = rhs_lo;
    out.rhs_hi = rhs_hi;

    if (out.norm_margin <= 0) {
      out.verdict = Verdict::fails;
      out.certificate = "norm-bound";
    } else if (!member_ok || out.member_margin <= 0) {
      out.verdict = Verdict::fails;
      out.certificate = "membership";
    } else if (out.lhs_lo > out.rhs_hi) {
      out.verdict = Verdict::holds;
      out.certificate = "distance-bracket";
      out.empt_margin = out.lhs_lo - out.rhs_hi;
    } else if (out.lhs_hi <= out.rhs_lo) {
      out.verdict = Verdict::fails;
      out.certificate = "distance-bracket";
      out.empt_margin = out.lhs_hi - out.rhs_lo;
    } else {
      out.verdict = Verdict::unknown;
      out.certificate = "sample-budget";
    }
    return out;
  }

  IntersectionQuery q;
  q.ambient = nm;
  for (std::size_t i = 0; i < k; ++i) {
    Vec shift = data.tr.a[i];
    if (sh.anchored) shift = add(shift, data.tr.omega[i]);
    q.factors.push_back(geo::translated_factor(data.sets[i], shift));
  }
  if (sh.last_fixed) {
    Vec shift = sh.anchored ? data.tr.omega[n - 1] : zeros(d);
    q.factors.push_back(geo::translated_factor(data.sets[n - 1], shift));
  }
  if (sh.ball != 0 && std::isfinite(rho)) {
    Vec center = zeros(d);
    if (sh.ball == 1) {
      require(data.xbar.has_value(), ErrKind::precondition,
              "primal check: localized display needs the reference point");
      center = *data.xbar;
    }
    Factor ball = geo::translated_factor(geo::whole_space(d), zeros(d));
    ball.local = BallRep{center, rho, nm};
    ball.local_open = true;
    q.factors.push_back(ball);
  }

  EmptinessResult res = geo::intersection_empty(q);
  if (out.norm_margin <= 0) {
    out.verdict = Verdict::fails;
    out.certificate = "norm-bound";
  } else if (!member_ok || out.member_margin <= 0) {
    out.verdict = Verdict::fails;
    out.certificate = "membership";
  } else if (res.verdict == EmptinessResult::Verdict::empty) {
    out.verdict = Verdict::holds;
    out.certificate = holds_certificate(res.method);
    out.empt_margin = res.margin;
  } else if (res.verdict == EmptinessResult::Verdict::nonempty) {
    out.verdict = Verdict::fails;
    out.certificate = "witness";
    out.witness = res.witness;
    out.empt_margin = -res.margin;
  } else {
    out.verdict = Verdict::unknown;
    out.certificate = "sample-budget";
  }
  return out;
}

NearClosestResult translations_from_near_closest(const std::vector<SetPtr>& sets,
                                                 const std::vector<Vec>& omega,
                                                 double epsilon, const NormSpec& norm) {
  check_family(sets, 2, "near-closest translations");
  const std::size_t n = sets.size();
  const std::size_t d = sets[0]->dim;
  require(omega.size() == n, ErrKind::precondition, "near-closest translations: anchor count");
  for (const Vec& w : omega) require_dim(w, d, "near-closest translations");
  require(epsilon > 0 && std::isfinite(epsilon), ErrKind::precondition,
          "near-closest translations: epsilon must be positive");
  for (std::size_t i = 0; i < n; ++i)
    require(geo::member(omega[i], *sets[i], kTolMember), ErrKind::precondition,
            "near-closest translations: omega_i must lie in its set");

  IntersectionQuery q0;
  q0.ambient = norm;
  for (const SetPtr& s : sets) q0.factors.push_back(geo::translated_factor(s, zeros(d)));
  EmptinessResult disjoint = geo::intersection_empty(q0);
  require(disjoint.verdict != EmptinessResult::Verdict::nonempty, ErrKind::precondition,
          "near-closest translations: sets intersect");
  require(disjoint.verdict == EmptinessResult::Verdict::empty, ErrKind::budget,
          "near-closest translations: cannot certify disjointness");

  const double m = geo::d1_points(omega, norm);
  geo::DistanceReport d1 = geo::d1_sets(sets, norm);
  require(m < d1.lo + epsilon, ErrKind::precondition,
          "near-closest translations: omega is not epsilon-near-closest");
  require(m > 1e-12, ErrKind::numeric, "near-closest translations: degenerate anchor spread");

  // eps' must exceed the optimality gap m - d1 and stay below min(eps, m).
  const double gap_lo = std::max(0.0, m - d1.lo);
  const double cap = std::min(epsilon, m);
  double eps_prime;
  if (d1.hi > kTolFeas && gap_lo < cap * (1 - 1e-12)) {
    eps_prime = 0.5 * (gap_lo + cap);
  } else {
    // Closest points at distance zero in the bracket, or no midpoint room:
    // shift every set by its own anchor gap (eps' = m), admissible as long
    // as m < eps because the anchored factors then share the point 0 only
    // if the original sets intersect.
    require(m < epsilon, ErrKind::numeric,
            "near-closest translations: no admissible translation weight");
    eps_prime = m;
  }

  NearClosestResult out;
  out.m = m;
  out.eps_prime = eps_prime;
  out.tr.omega = omega;
  out.tr.rho = kInf;
  for (std::size_t i = 0; i + 1 < n; ++i)
    out.tr.a.push_back(scale(sub(omega[n - 1], omega[i]), eps_prime / m));
  out.tr.max_norm = max_norm_of(out.tr.a, norm);

  PrimalData pd;
  pd.sets = sets;
  pd.tr = out.tr;
  pd.params.epsilon = epsilon;
  pd.params.alpha = epsilon;  // ball-free display: bound collapses to eps
  pd.norm = norm;
  out.check = check_primal_condition("P8", pd);
  require(out.check.ok(), ErrKind::numeric,
          "near-closest translations: anchored display not certified");
  return out;
}

MetricConditionData p2_to_p9(const std::vector<SetPtr>& sets, const Vec& xbar,
                             const TranslationSet& tr, double epsilon, double rho,
                             const NormSpec& norm) {
  check_family(sets, 2, "metric transform");
  const std::size_t d = sets[0]->dim;
  require_dim(xbar, d, "metric transform");
  require(epsilon > 0 && std::isfinite(epsilon), ErrKind::precondition,
          "metric transform: epsilon must be positive");
  require(rho > 0 && std::isfinite(rho), ErrKind::precondition,
          "metric transform: rho must be positive and finite");
  for (const SetPtr& s : sets)
    require(geo::member(xbar, *s, kTolMember), ErrKind::precondition,
            "metric transform: xbar must lie in every set");

  PrimalData p2;
  p2.sets = sets;
  p2.xbar = xbar;
  p2.tr = tr;
  p2.tr.rho = rho;
  p2.params.epsilon = epsilon;
  p2.norm = norm;
  PrimalCheckResult gate = check_primal_condition("P2", p2);
  require(gate.ok(), ErrKind::precondition, "metric transform: localized display not certified");

  MetricConditionData out;
  out.alpha = epsilon / rho;
  out.tr.a = tr.a;
  out.tr.rho = kInf;
  out.tr.max_norm = max_norm_of(tr.a, norm);

  PrimalData p9;
  p9.sets = sets;
  p9.xbar = xbar;
  p9.tr = out.tr;
  p9.params.epsilon = epsilon;
  p9.params.alpha = out.alpha;
  p9.norm = norm;
  out.check = check_primal_condition("P9", p9);
  require(out.check.ok(), ErrKind::numeric,
          "metric transform: distance comparison not certified within brackets");
  return out;
}

P7Data p9_to_p7(const std::vector<SetPtr>& sets, const Vec& xbar, const TranslationSet& tr,
                double epsilon, double rho, const NormSpec& norm) {
  check_family(sets, 2, "metric localization");
  const std::size_t n = sets.size();
  const std::size_t d = sets[0]->dim;
  require_dim(xbar, d, "metric localization");
  require(epsilon > 0 && std::isfinite(epsilon), ErrKind::precondition,
          "metric localization: epsilon must be positive");
  require(rho > 0 && std::isfinite(rho), ErrKind::precondition,
          "metric localization: rho must be positive and finite");
  require(tr.a.size() == n, ErrKind::precondition, "metric localization: translation count");
  const double alpha = epsilon / rho;

  PrimalData p9;
  p9.sets = sets;
  p9.xbar = xbar;
  p9.tr.a = tr.a;
  p9.tr.rho = kInf;
  p9.params.epsilon = epsilon;
  p9.params.alpha = alpha;
  p9.norm = norm;
  PrimalCheckResult gate = check_primal_condition("P9", p9);
  require(gate.ok(), ErrKind::precondition,
          "metric localization: distance comparison not certified");

  // rho' must exceed every per-set distance over alpha and stay below the
  // distance to the translated intersection (and below rho itself).
  double per_set_hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    DistResult di = geo::dist_point_set(add(xbar, tr.a[i]), *sets[i], norm);
    per_set_hi = std::max(per_set_hi, di.hi);
  }
  IntersectionQuery q;
  q.ambient = norm;
  for (std::size_t i = 0; i < n; ++i)
    q.factors.push_back(geo::translated_factor(sets[i], tr.a[i]));
  DistResult dcap = geo::dist_point_intersection(xbar, q);

  const double lo = per_set_hi / alpha;
  const double hi = std::min(dcap.lo, rho * (1 - 1e-6));
  require(lo < hi * (1 - 1e-12), ErrKind::numeric,
          "metric localization: no admissible localization radius");
  // Keeping alpha*rho' below eps - max||a_i|| pins the near points inside
  // B_eps(xbar); available only while max||a_i|| < eps/2 or so.
  const double max_a = max_norm_of(tr.a, norm);
  const double member_cap = rho * (epsilon - max_a) / epsilon;
  const double top = (lo < std::min(hi, member_cap)) ? std::min(hi, member_cap) : hi;
  const double rho_prime = 0.5 * (lo + top);

  P7Data out;
  out.alpha = alpha;
  out.rho_prime = rho_prime;
  out.tr.rho = rho_prime;
  for (std::size_t i = 0; i < n; ++i) {
    Vec target = add(xbar, tr.a[i]);
    Vec omega_i;
    try {
      omega_i = geo::project(target, *sets[i], norm);
    } catch (const OpError&) {
      throw OpError(ErrKind::budget, "metric localization: near-point selection failed");
    }
    out.tr.omega.push_back(omega_i);
    out.tr.a.push_back(add(tr.a[i], sub(xbar, omega_i)));
    out.omega_ball_margin.push_back(epsilon - geo::dist(omega_i, xbar, norm));
  }
  out.tr.max_norm = max_norm_of(out.tr.a, norm);

  PrimalData p7;
  p7.sets = sets;
  p7.xbar = xbar;
  p7.tr = out.tr;
  p7.params.epsilon = epsilon;
  p7.params.alpha = alpha;
  p7.norm = norm;
  out.check = check_primal_condition("P7", p7);
  return out;
}

// ---------------------------------------------------------------------------
// theta_rho

namespace {

struct AffineView {
  Vec base;
  std::vector<Vec> complement;  // orthonormal rows spanning span(dirs)^perp
};

// Affine description when the set is a point or an affine subspace.
std::optional<AffineView> affine_view(const SetRep& s) {
  std::vector<geo::ConvexLeaf> leaves = geo::convex_leaves(s);
  if (leaves.size() != 1) return std::nullopt;
  const geo::ConvexLeaf& leaf = leaves[0];
  const std::size_t d = s.dim;
  AffineView v;
  if (leaf.point) {
    v.base = add(*leaf.point, leaf.shift);
  } else if (leaf.affine) {
    v.base = add(leaf.affine->base, leaf.shift);
    if (!leaf.affine->directions.empty())
      v.complement = geo::null_space(leaf.affine->directions, d);
  } else {
    return std::nullopt;
  }
  if (v.complement.empty() && !leaf.affine) {
    v.complement.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
      Vec e = zeros(d);
      e[j] = 1;
      v.complement.push_back(e);
    }
  } else if (leaf.affine && leaf.affine->directions.empty()) {
    for (std::size_t j = 0; j < d; ++j) {
      Vec e = zeros(d);
      e[j] = 1;
      v.complement.push_back(e);
    }
  }
  return v;
}

std::vector<Vec> stack_rows(const std::vector<std::vector<Vec>>& blocks) {
  std::vector<Vec> rows;
  for (const auto& b : blocks)
    for (const Vec& r : b) rows.push_back(r);
  return rows;
}

double frob(const std::vector<Vec>& rows) {
  double s = 0;
  for (const Vec& r : rows)
    for (double x : r) s += x * x;
  return std::sqrt(s);
}

std::vector<Vec> sphere_dirs(std::size_t d, std::size_t count) {
  std::vector<Vec> out;
  if (d == 1) {
    out.push_back({1.0});
    out.push_back({-1.0});
  } else if (d == 2) {
    for (std::size_t j = 0; j < count; ++j) {
      double t = 2 * kPi * double(j) / double(count);
      out.push_back({std::cos(t), std::sin(t)});
    }
  } else {
    const double ga = kPi * (3.0 - std::sqrt(5.0));
    for (std::size_t j = 0; j < count; ++j) {
      double z = 1.0 - 2.0 * (double(j) + 0.5) / double(count);
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      out.push_back({r * std::cos(ga * double(j)), r * std::sin(ga * double(j)), z});
    }
  }
  return out;
}

// Unit-ball vertices of the polyhedral ambient norms.
std::vector<Vec> ball_vertices(std::size_t d, const NormSpec& nm) {
  std::vector<Vec> out;
  if (nm.kind == NormSpec::Kind::maximum) {
    for (std::size_t mask = 0; mask < (std::size_t(1) << d); ++mask) {
      Vec v(d, 1.0);
      for (std::size_t j = 0; j < d; ++j)
        if (mask & (std::size_t(1) << j)) v[j] = -1.0;
      out.push_back(v);
    }
  } else {  // p = 1
    for (std::size_t j = 0; j < d; ++j) {
      Vec v = zeros(d);
      v[j] = 1;
      out.push_back(v);
      v[j] = -1;
      out.push_back(v);
    }
  }
  return out;
}

struct Adversary {
  const std::vector<SetPtr>* sets;
  const Vec* xbar;
  double rho;
  NormSpec nm;
  std::vector<std::vector<Vec>> unit_dirs;  // per-set candidate unit translations

  // Certified-empty translate family at radius r, if one is found.
  std::optional<std::vector<Vec>> bad(double r) const {
    const std::size_t n = sets->size();
    const double s = r * (1 - 1e-9);
    std::vector<std::size_t> idx(n, 0);
    std::optional<std::vector<Vec>> hit;
    auto trial = [&](const std::vector<std::size_t>& pick) -> bool {
      IntersectionQuery q;
      q.ambient = nm;
      std::vector<Vec> a(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = scale(unit_dirs[i][pick[i]], s);
        q.factors.push_back(geo::translated_factor((*sets)[i], a[i]));
      }
      if (std::isfinite(rho)) {
        Factor ball = geo::translated_factor(geo::whole_space(xbar->size()), zeros(xbar->size()));
        ball.local = BallRep{*xbar, rho, nm};
        ball.local_open = true;
        q.factors.push_back(ball);
      }
      if (geo::intersection_empty(q).verdict == EmptinessResult::Verdict::empty) {
        hit = a;
        return true;
      }
      return false;
    };

    const std::size_t per = unit_dirs[0].size();
    if (n <= 2) {
      std::vector<std::size_t> pick(n, 0);
      while (true) {
        if (trial(pick)) return hit;
        std::size_t j = n;
        while (true) {
          if (j == 0) return std::nullopt;
          --j;
          if (++pick[j] < unit_dirs[j].size()) break;
          pick[j] = 0;
        }
      }
    }
    for (std::size_t v = 0; v < per; ++v) {
      std::vector<std::size_t> pick(n, v);
      if (trial(pick)) return hit;
      pick[n - 1] = (v + per / 2) % per;  // last set pushed the opposite way
      if (trial(pick)) return hit;
    }
    Rng rng(0x7e7a11);
    for (int t = 0; t < 500; ++t) {
      std::vector<std::size_t> pick(n);
      for (std::size_t i = 0; i < n; ++i)
        pick[i] = std::size_t(rng.uniform_int(0, int(unit_dirs[i].size()) - 1));
      if (trial(pick)) return hit;
    }
    return std::nullopt;
  }
};

}  // namespace

ThetaResult theta_rho(const std::vector<SetPtr>& sets, const Vec& xbar, double rho,
                      const NormSpec& norm) {
  check_family(sets, 1, "translation radius");
  const std::size_t d = sets[0]->dim;
  require_dim(xbar, d, "translation radius");
  require(rho > 0, ErrKind::precondition, "translation radius: rho must be positive");
  for (const SetPtr& s : sets)
    require(geo::member(xbar, *s, kTolMember), ErrKind::precondition,
            "translation radius: xbar must lie in every set");

  // Whole-space members absorb any translation and drop out of the problem.
  std::vector<SetPtr> active;
  for (const SetPtr& s : sets)
    if (!geo::is_whole_space(*s)) active.push_back(s);
  if (active.empty()) return {kInf, kInf, "affine-exact", std::nullopt};

  // Exact route: every remaining set affine. The intersection of the
  // translated family is the solution set of a stacked linear system, so
  // the worst-case displacement of the solution is a norm of a linear map.
  std::vector<std::vector<Vec>> blocks;
  bool all_affine = true;
  std::vector<AffineView> views;
  for (const SetPtr& s : active) {
    std::optional<AffineView> v = affine_view(*s);
    if (!v) {
      all_affine = false;
      break;
    }
    views.push_back(std::move(*v));
    blocks.push_back(views.back().complement);
  }

  const bool polyhedral_norm =
      norm.kind == NormSpec::Kind::maximum ||
      (norm.kind == NormSpec::Kind::pnorm && norm.p == 1.0);
  if (all_affine) {
    std::vector<Vec> rows = stack_rows(blocks);
    const std::size_t m = rows.size();

    // Per-set solution maps B_i = M^{-1} E_i N_i, computed only for the
    // square case; a singular square system joins the overdetermined path.
    std::vector<std::vector<Vec>> bmaps;  // each as rows of a d x d matrix
    bool solved = false;
    if (m == d) {
      solved = true;
      std::size_t off = 0;
      for (const auto& b : blocks) {
        std::vector<Vec> bi_cols;
        for (std::size_t j = 0; j < d && solved; ++j) {
          Vec rhs = zeros(d);
          for (std::size_t r = 0; r < b.size(); ++r) rhs[off + r] = b[r][j];
          std::optional<Vec> col = solve_dense(rows, rhs);
          if (!col) {
            solved = false;
            break;
          }
          bi_cols.push_back(*col);
        }
        if (!solved) break;
        std::vector<Vec> bi_rows(d, zeros(d));
        for (std::size_t j = 0; j < d; ++j)
          for (std::size_t i = 0; i < d; ++i) bi_rows[i][j] = bi_cols[j][i];
        bmaps.push_back(bi_rows);
        off += b.size();
      }
    }

    if (m > d || (m == d && !solved)) {
      // Overdetermined or rank-deficient square system: the right-hand
      // sides reachable by translations fill R^m while the solvable ones
      // form a proper subspace, so arbitrarily small translations already
      // empty the intersection.
      ThetaResult out{0, 0, "affine-exact", std::nullopt};
      std::vector<Vec> colv;  // columns of the stacked matrix, in R^m
      for (std::size_t j = 0; j < d; ++j) {
        Vec c(m);
        for (std::size_t i = 0; i < m; ++i) c[i] = rows[i][j];
        colv.push_back(c);
      }
      std::vector<Vec> span = geo::orthonormal_basis(colv);
      std::vector<Vec> perp = geo::null_space(span, m);
      if (!perp.empty()) {
        const Vec& w = perp[0];
        std::vector<Vec> bad;
        std::size_t off = 0;
        const double t = 1e-9 * (1 + geo::norm(xbar, norm));
        for (const auto& b : blocks) {
          Vec a = zeros(d);
          for (std::size_t r = 0; r < b.size(); ++r) a = axpy(a, t * w[off + r], b[r]);
          bad.push_back(a);
          off += b.size();
        }
        out.worst_a = bad;
      }
      return out;
    }

    if (solved && !std::isfinite(rho)) return {kInf, kInf, "affine-exact", std::nullopt};

    if (solved && polyhedral_norm) {
      // Convex maximum over a product of polytopes: scan vertex tuples.
      std::vector<Vec> verts = ball_vertices(d, norm);
      const std::size_t nv = verts.size();
      double best = 0;
      std::vector<std::size_t> arg(active.size(), 0);
      std::vector<std::size_t> pick(active.size(), 0);
      bool overflow = false;
      double tuples = 1;
      for (std::size_t i = 0; i < active.size(); ++i) tuples *= double(nv);
      if (tuples <= 250000) {
        while (true) {
          Vec disp = zeros(d);
          for (std::size_t i = 0; i < active.size(); ++i)
            for (std::size_t r = 0; r < d; ++r)
              disp[r] += dot(bmaps[i][r], verts[pick[i]]);
          double val = geo::norm(disp, norm);
          if (val > best) {
            best = val;
            arg = pick;
          }
          std::size_t j = active.size();
          bool done = false;
          while (true) {
            if (j == 0) {
              done = true;
              break;
            }
            --j;
            if (++pick[j] < nv) break;
            pick[j] = 0;
          }
          if (done) break;
        }
      } else {
        overflow = true;
      }
      if (!overflow) {
        if (best <= 1e-14) return {kInf, kInf, "affine-exact", std::nullopt};
        ThetaResult out;
        out.lo = out.hi = rho / best;
        out.method = "affine-exact";
        std::vector<Vec> wa;
        for (std::size_t i = 0; i < active.size(); ++i) wa.push_back(scale(verts[arg[i]], out.hi));
        out.worst_a = wa;
        return out;
      }
    } else if (solved && norm.kind == NormSpec::Kind::euclidean) {
      // Lambda = max over unit u of sum_i ||B_i^T u||_2, bracketed on a
      // direction grid with a Lipschitz inflation.
      const std::size_t count = d == 2 ? 4096 : 16384;
      std::vector<Vec> dirs = sphere_dirs(d, count);
      double best = 0;
      Vec arg = dirs[0];
      for (const Vec& u : dirs) {
        double g = 0;
        for (const auto& bi : bmaps) {
          Vec btu = zeros(d);
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) btu[j] += bi[i][j] * u[i];
          g += geo::norm(btu, norm);
        }
        if (g > best) {
          best = g;
          arg = u;
        }
      }
      double lip = 0;
      for (const auto& bi : bmaps) lip += frob(bi);
      const double cov = d == 1 ? 0.0 : (d == 2 ? kPi / double(count) : 3.5 / std::sqrt(double(count)));
      const double lambda_hi = best + lip * cov;
      if (best <= 1e-14) return {kInf, kInf, "affine-exact", std::nullopt};
      ThetaResult out;
      out.lo = rho / lambda_hi;
      out.hi = rho / best;
      out.method = d == 1 ? "affine-exact" : "affine-bracket";
      std::vector<Vec> wa;
      for (const auto& bi : bmaps) {
        Vec btu = zeros(d);
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) btu[j] += bi[i][j] * arg[i];
        double bn = geo::norm(btu, norm);
        wa.push_back(bn > 1e-14 ? scale(btu, out.hi / bn) : zeros(d));
      }
      out.worst_a = wa;
      return out;
    }
    // Unusual ambient norm or oversized vertex scan: fall through.
  }

  // Adversarial bracket: certified upper bound from an emptiness witness,
  // search-only lower bound.
  Adversary adv;
  adv.sets = &active;
  adv.xbar = &xbar;
  adv.rho = rho;
  adv.nm = norm;
  const std::size_t per = d == 1 ? 2 : (d == 2 ? 16 : 32);
  std::vector<Vec> dirs = sphere_dirs(d, per);
  std::vector<Vec> unit;
  for (const Vec& u : dirs) {
    double un = geo::norm(u, norm);
    unit.push_back(scale(u, 1.0 / un));
  }
  adv.unit_dirs.assign(active.size(), unit);

  ThetaResult out;
  out.method = "search-lower";
  const double r0 = std::isfinite(rho) ? rho : 1.0;
  double bad_at = kInf;
  std::optional<std::vector<Vec>> worst;
  for (int k2 = 0; k2 <= 8; ++k2) {
    double r = r0 * std::pow(2.0, k2);
    std::optional<std::vector<Vec>> w = adv.bad(r);
    if (w) {
      bad_at = r;
      worst = w;
      break;
    }
  }
  if (!std::isfinite(bad_at)) {
    out.lo = r0 * 256.0;
    out.hi = kInf;
    return out;
  }
  double lo = 0, hi = bad_at;
  for (int it = 0; it < 30 && hi - lo > 1e-3 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    std::optional<std::vector<Vec>> w = adv.bad(mid);
    if (w) {
      hi = mid;
      worst = w;
    } else {
      lo = mid;
    }
  }
  out.lo = lo;
  out.hi = hi;
  out.worst_a = worst;
  return out;
}

// ---------------------------------------------------------------------------
// dual-to-primal reversal

namespace {

// Finite point list when the set is a union of points; nullopt for convex
// atoms (polyhedron, ball, affine). Throws for mixed unions.
std::optional<std::vector<Vec>> finite_points(const SetRep& s, const Vec& off) {
  if (const auto* pc = std::get_if<geo::PointCloud>(&s.v)) {
    std::vector<Vec> out;
    for (const Vec& p : pc->points) out.push_back(add(p, off));
    return out;
  }
  if (const auto* sh = std::get_if<geo::ShiftedRep>(&s.v))
    return finite_points(*sh->inner, add(off, sh->offset));
  if (const auto* un = std::get_if<geo::UnionRep>(&s.v)) {
    std::vector<Vec> out;
    for (const SetPtr& part : un->parts) {
      std::optional<std::vector<Vec>> sub = finite_points(*part, off);
      if (!sub)
        throw OpError(ErrKind::unsupported,
                      "reversal: unions of non-finite pieces are not supported");
      for (Vec& p : *sub) out.push_back(std::move(p));
    }
    return out;
  }
  if (const auto* af = std::get_if<geo::AffineRep>(&s.v)) {
    if (af->directions.empty()) return std::vector<Vec>{add(af->base, off)};
  }
  return std::nullopt;
}

struct IneqTask {
  std::optional<std::vector<Vec>> pts;  // nullopt: convex atom, holds globally
  Vec omega;
  Vec vstar;
  double coeff = 0;        // right-hand slope
  double radius_mult = 1;  // ball radius = radius_mult * delta
};

bool ineq_ok_at(const IneqTask& t, double delta, const NormSpec& nm) {
  if (!t.pts) return true;
  const double radius = t.radius_mult * delta;
  for (const Vec& w : *t.pts) {
    Vec dv = sub(w, t.omega);
    double dn = geo::norm(dv, nm);
    if (dn <= 1e-12) continue;
    if (dn > radius * (1 + 1e-12)) continue;
    if (dot(t.vstar, dv) > t.coeff * dn + 1e-12) return false;
  }
  return true;
}

// Largest dyadic radius at which every sampled normal inequality holds.
double certify_delta(const std::vector<IneqTask>& tasks, const NormSpec& nm) {
  bool any_finite = false;
  for (const IneqTask& t : tasks)
    if (t.pts) any_finite = true;
  if (!any_finite) return kInf;
  auto all_ok = [&](double delta) {
    for (const IneqTask& t : tasks)
      if (!ineq_ok_at(t, delta, nm)) return false;
    return true;
  };
  double delta = 1.0;
  if (all_ok(delta)) {
    for (int i = 0; i < 20; ++i) {
      if (!all_ok(delta * 2)) break;
      delta *= 2;
    }
    return delta;
  }
  for (int i = 0; i < 60; ++i) {
    delta *= 0.5;
    if (all_ok(delta)) return delta;
  }
  throw OpError(ErrKind::budget, "reversal: localization radius search exhausted");
}

struct EngineOut {
  std::vector<Vec> a;  // translations for all sets but the last
  double delta = 0;
  double pairing = 0;  // sum over the translated block of <x*_i, a_i>
};

// Shared construction: head vectors lie in their cones, the tail vector is
// within eps of its cone, head dual norms sum to one.
EngineOut reversal_engine(const std::vector<SetPtr>& sets, const std::vector<Vec>& omega,
                          const std::vector<Vec>& xs, double eps, double rho, double tau,
                          const NormSpec& nm, ConeKind kind) {
  const std::size_t kc = sets.size();
  const std::size_t d = sets[0]->dim;
  const NormSpec dn = geo::dual(nm);

  std::vector<ConeRep> cones;
  for (std::size_t i = 0; i < kc; ++i)
    cones.push_back(geo::normal_cone(*sets[i], omega[i], kind));
  for (std::size_t i = 0; i + 1 < kc; ++i)
    require(geo::dist_to_cone(xs[i], cones[i], dn).value <= 1e-9, ErrKind::precondition,
            "reversal: x*_i must lie in its normal cone");
  ConeDistResult tail = geo::dist_to_cone(xs[kc - 1], cones[kc - 1], dn);
  require(strictly_less(tail.value, eps), ErrKind::precondition,
          "reversal: tail cone distance must stay below epsilon");

  const double eps_prime = 0.5 * (tail.value + eps);
  const double slack = eps - eps_prime;
  const double eps1 = slack / (4.0 * double(kc));
  const double eps2 = std::min(slack / (4.0 * double(kc - 1)),
                               eps * (1 - tau) / (2.0 * double(kc - 1)));

  std::vector<IneqTask> tasks;
  for (std::size_t i = 0; i + 1 < kc; ++i) {
    IneqTask t;
    t.pts = finite_points(*sets[i], zeros(d));
    t.omega = omega[i];
    t.vstar = xs[i];
    t.coeff = eps1 / (eps + 1);
    t.radius_mult = eps + 1;
    tasks.push_back(std::move(t));
  }
  {
    IneqTask t;
    t.pts = finite_points(*sets[kc - 1], zeros(d));
    t.omega = omega[kc - 1];
    t.vstar = tail.nearest;
    t.coeff = eps1;
    t.radius_mult = 1;
    tasks.push_back(std::move(t));
  }

  EngineOut out;
  out.delta = certify_delta(tasks, nm);
  require(rho < out.delta, ErrKind::precondition,
          "reversal: rho must stay below the certified localization radius");

  for (std::size_t i = 0; i + 1 < kc; ++i) {
    const double dni = geo::norm(xs[i], dn);
    if (dni <= 1e-15) {
      out.a.push_back(zeros(d));
      continue;
    }
    const double eta = std::min(0.5, eps2 / (2.0 * eps * dni));
    Vec u = geo::dual_align(xs[i], nm);
    out.a.push_back(scale(u, eps * rho * (1 - eta)));
    out.pairing += dot(xs[i], out.a.back());
  }
  return out;
}

void base_reversal_checks(const std::vector<SetPtr>& sets, const std::vector<Vec>& omega,
                          const std::vector<Vec>& xstar, double epsilon, double rho,
                          double tau, const char* who) {
  check_family(sets, 2, who);
  const std::size_t n = sets.size();
  const std::size_t d = sets[0]->dim;
  require(omega.size() == n && xstar.size() == n, ErrKind::precondition,
          std::string(who) + ": family size mismatch");
  for (const Vec& w : omega) require_dim(w, d, who);
  for (const Vec& v : xstar) require_dim(v, d, who);
  require(epsilon > 0 && std::isfinite(epsilon), ErrKind::precondition,
          std::string(who) + ": epsilon must be positive");
  require(rho > 0 && std::isfinite(rho), ErrKind::precondition,
          std::string(who) + ": rho must be positive and finite");
  require(tau > 0 && tau < 1, ErrKind::precondition,
          std::string(who) + ": tau must lie in ]0,1[");
  for (std::size_t i = 0; i < n; ++i)
    require(geo::member(omega[i], *sets[i], kTolMember), ErrKind::precondition,
            std::string(who) + ": omega_i must lie in its set");
}

}  // namespace

ReversalResult dual_to_primal_translations(const std::vector<SetPtr>& sets,
                                           const std::vector<Vec>& omega,
                                           const std::vector<Vec>& xstar, double epsilon,
                                           double rho, double tau, const NormSpec& norm,
                                           ConeKind kind, ReversalRoute route) {
  base_reversal_checks(sets, omega, xstar, epsilon, rho, tau, "reversal");
  const std::size_t n = sets.size();
  const std::size_t d = sets[0]->dim;
  const NormSpec dn = geo::dual(norm);

  Vec s = zeros(d);
  for (const Vec& v : xstar) s = add(s, v);
  const double sn = geo::norm(s, dn);
  double sum_all = 0, sum_head = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = geo::norm(xstar[i], dn);
    sum_all += v;
    if (i + 1 < n) sum_head += v;
  }

  if (route == ReversalRoute::auto_detect) {
    std::vector<ConeRep> cones;
    for (std::size_t i = 0; i < n; ++i)
      cones.push_back(geo::normal_cone(*sets[i], omega[i], kind));
    bool head_in = true;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (geo::dist_to_cone(xstar[i], cones[i], dn).value > 1e-9) head_in = false;
    const double tail_d = geo::dist_to_cone(xstar[n - 1], cones[n - 1], dn).value;
    if (sn <= 1e-9 && std::abs(sum_head - 1) <= 1e-7 && head_in && tail_d < epsilon) {
      route = ReversalRoute::direct;
    } else if (std::abs(sum_all - 1) <= 1e-7 && head_in && tail_d <= 1e-9 && sn < epsilon) {
      route = ReversalRoute::append_space;
    } else {
      throw OpError(ErrKind::precondition, "reversal: dual family shape not recognized");
    }
  }

  ReversalResult out;
  out.pairing_threshold = tau * epsilon * rho;

  if (route == ReversalRoute::direct) {
    out.eps_engine = epsilon;
    EngineOut eng = reversal_engine(sets, omega, xstar, epsilon, rho, tau, norm, kind);
    out.tr.a = eng.a;
    out.delta = eng.delta;
    out.pairing = eng.pairing;
    out.target = "P6";
  } else if (route == ReversalRoute::append_space) {
    std::vector<SetPtr> sets2 = sets;
    sets2.push_back(geo::whole_space(d));
    std::vector<Vec> omega2 = omega;
    omega2.push_back(mean_of(omega));
    std::vector<Vec> xs2 = xstar;
    xs2.push_back(scale(s, -1.0));
    out.eps_engine = epsilon;
    EngineOut eng = reversal_engine(sets2, omega2, xs2, epsilon, rho, tau, norm, kind);
    out.tr.a = eng.a;
    out.delta = eng.delta;
    out.pairing = eng.pairing;
    out.target = "P3";
  } else {  // renormalize
    require(sum_head > 1e-9, ErrKind::precondition,
            "reversal: head dual norms vanish, cannot renormalize");
    std::vector<Vec> xs2 = xstar;
    Vec tail = zeros(d);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      xs2[i] = scale(xstar[i], 1.0 / sum_head);
      tail = sub(tail, xs2[i]);
    }
    xs2[n - 1] = tail;
    out.eps_engine = epsilon / sum_head;
    EngineOut eng = reversal_engine(sets, omega, xs2, out.eps_engine, rho, tau, norm, kind);
    out.tr.a = eng.a;
    out.delta = eng.delta;
    out.pairing = eng.pairing * sum_head;  // back in the caller's dual scale
    out.target = "P6";
  }

  require(out.pairing > out.pairing_threshold, ErrKind::numeric,
          "reversal: pairing certificate failed");

  out.tr.omega = omega;
  out.tr.rho = rho;
  out.tr.max_norm = max_norm_of(out.tr.a, norm);

  PrimalData pd;
  pd.sets = sets;
  pd.tr = out.tr;
  pd.params.epsilon = out.eps_engine;
  pd.norm = norm;
  out.check = check_primal_condition(out.target, pd);
  require(out.check.ok(), ErrKind::numeric, "reversal: translated display not certified");
  return out;
}

ReversalResult localized_reversal(const std::vector<SetPtr>& sets, const std::vector<Vec>& omega,
                                  const std::vector<Vec>& xstar, double epsilon, double rho,
                                  double tau, const NormSpec& norm, ConeKind kind) {
  base_reversal_checks(sets, omega, xstar, epsilon, rho, tau, "localized reversal");
  const std::size_t n = sets.size();
  const std::size_t d = sets[0]->dim;
  const NormSpec dn = geo::dual(norm);

  Vec s = zeros(d);
  for (const Vec& v : xstar) s = add(s, v);
  require(geo::norm(s, dn) <= 1e-9, ErrKind::precondition,
          "localized reversal: dual vectors must sum to zero");
  double sum_head = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) sum_head += geo::norm(xstar[i], dn);
  require(std::abs(sum_head - 1) <= 1e-7, ErrKind::precondition,
          "localized reversal: head dual norms must sum to one");

  std::vector<ConeRep> cones;
  std::vector<ConeDistResult> near(n);
  double sum_d = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cones.push_back(geo::normal_cone(*sets[i], omega[i], kind));
    near[i] = geo::dist_to_cone(xstar[i], cones[i], dn);
    sum_d += near[i].value;
  }
  require(strictly_less(sum_d, epsilon), ErrKind::precondition,
          "localized reversal: cone residual sum must stay below epsilon");

  const double eps_prime = 0.5 * (sum_d + epsilon);
  const double eps1 = (epsilon - eps_prime) / 4.0;
  const double eps2 = std::min((epsilon - eps_prime) / 4.0, (1 - tau) * epsilon / 2.0);

  std::vector<IneqTask> tasks;
  for (std::size_t i = 0; i < n; ++i) {
    IneqTask t;
    t.pts = finite_points(*sets[i], zeros(d));
    t.omega = omega[i];
    t.vstar = near[i].nearest;
    t.coeff = eps1 / double(n);
    t.radius_mult = 1;
    tasks.push_back(std::move(t));
  }

  ReversalResult out;
  out.target = "P5.13-1";
  out.eps_engine = epsilon;
  out.pairing_threshold = tau * epsilon * rho;
  out.delta = certify_delta(tasks, norm);
  require(rho < out.delta, ErrKind::precondition,
          "localized reversal: rho must stay below the certified localization radius");

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dni = geo::norm(xstar[i], dn);
    if (dni <= 1e-15) {
      out.tr.a.push_back(zeros(d));
      continue;
    }
    const double eta = std::min(0.5, eps2 / (2.0 * double(n - 1) * epsilon * dni));
    out.tr.a.push_back(scale(geo::dual_align(xstar[i], norm), epsilon * rho * (1 - eta)));
    out.pairing += dot(xstar[i], out.tr.a.back());
  }
  out.tr.omega = omega;
  out.tr.rho = rho;
  out.tr.max_norm = max_norm_of(out.tr.a, norm);
  require(out.pairing > out.pairing_threshold, ErrKind::numeric,
          "localized reversal: pairing certificate failed");

  // Doubly localized display: every factor cut to the rho-ball around its
  // own anchor before translating.
  IntersectionQuery q;
  q.ambient = norm;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Factor f = geo::translated_factor(sets[i], add(omega[i], out.tr.a[i]));
    f.local = BallRep{omega[i], rho, norm};
    f.local_open = true;
    q.factors.push_back(f);
  }
  Factor last = geo::translated_factor(sets[n - 1], omega[n - 1]);
  last.local = BallRep{omega[n - 1], rho, norm};
  last.local_open = true;
  q.factors.push_back(last);

  EmptinessResult res = geo::intersection_empty(q);
  PrimalCheckResult chk;
  chk.id = "P5.13-1";
  chk.norm_margin = epsilon * rho - out.tr.max_norm;
  if (res.verdict == EmptinessResult::Verdict::empty) {
    chk.verdict = Verdict::holds;
    chk.certificate = holds_certificate(res.method);
    chk.empt_margin = res.margin;
  } else if (res.verdict == EmptinessResult::Verdict::nonempty) {
    chk.verdict = Verdict::fails;
    chk.certificate = "witness";
    chk.witness = res.witness;
    chk.empt_margin = -res.margin;
  } else {
    chk.verdict = Verdict::unknown;
    chk.certificate = "sample-budget";
  }
  out.check = chk;
  require(out.check.ok(), ErrKind::numeric,
          "localized reversal: translated display not certified");
  return out;
}

}  // namespace tv::tr
