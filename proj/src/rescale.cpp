#include "transversal/rescale.hpp"

#include <cmath>

namespace tv::alg {

namespace {

using geo::dist_to_cone;
using geo::dual;

void require(bool ok, const char* what) {
  if (!ok) throw OpError(ErrKind::precondition, std::string("precondition-failed: ") + what);
}

Vec vector_sum(const std::vector<Vec>& z) {
  Vec s = zeros(z[0].size());
  for (const Vec& v : z) s = add(s, v);
  return s;
}

double sum_dual_norms(const std::vector<Vec>& z, const NormSpec& dn, std::size_t count) {
  double s = 0;
  for (std::size_t i = 0; i < count; ++i) s += geo::norm(z[i], dn);
  return s;
}

double cone_residual_sum(const std::vector<Vec>& z, const std::vector<ConeRep>& cones,
                         const NormSpec& dn) {
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += dist_to_cone(z[i], cones[i], dn).value;
  return s;
}

// Hypothesis shared by both halves of the rescaling lemma.
void check_core_hypothesis(const DualFamily& f, const NormSpec& dn, double eps, double rho,
                           double lambda) {
  require(eps > 0 && rho > 0 && lambda > 0, "epsilon, rho, lambda > 0");
  const double lhs =
      lambda * cone_residual_sum(f.z, f.cones, dn) + rho * geo::norm(vector_sum(f.z), dn);
  require(strictly_less(lhs, eps), "lambda*sum d(z_i,K_i) + rho*||sum z_i|| < epsilon");
  const double sn = sum_dual_norms(f.z, dn, f.z.size());
  require(std::fabs(sn - 1.0) <= 1e-9, "sum ||z_i|| = 1");
}

}  // namespace

void validate_family(const DualFamily& f) {
  if (f.z.empty()) throw OpError(ErrKind::precondition, "dual family: no vectors");
  if (f.z.size() != f.cones.size())
    throw OpError(ErrKind::precondition, "dual family: vectors/cones count mismatch");
  const std::size_t d = f.z[0].size();
  for (const Vec& v : f.z) require_dim(v, d, "dual family");
  for (const ConeRep& k : f.cones)
    if (k.dim != d) throw OpError(ErrKind::precondition, "dual family: cone dimension mismatch");
}

RescaleReport rebalance_to_zero_sum(const DualFamily& f) {
  validate_family(f);
  const NormSpec dn = dual(f.primal);
  const double eps = f.params.epsilon.value_or(0);
  const double rho = f.params.rho.value_or(0);
  const double lambda = f.params.lambda.value_or(0);
  check_core_hypothesis(f, dn, eps, rho, lambda);
  require(eps + lambda <= rho + 1e-12, "epsilon + lambda <= rho");

  const std::size_t n = f.z.size();
  const Vec zbar = vector_sum(f.z);
  std::vector<Vec> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = axpy(f.z[i], -1.0 / static_cast<double>(n), zbar);
  double s = 0;
  for (const Vec& w : v) s += geo::norm(w, dn);
  if (s < 1e-12) throw OpError(ErrKind::numeric, "rebalance: degenerate family (all equal)");

  RescaleReport out;
  out.family = f;
  for (std::size_t i = 0; i < n; ++i) out.family.z[i] = scale(v[i], 1.0 / s);
  out.sum_norm = sum_dual_norms(out.family.z, dn, n);
  out.sum_vec_norm = geo::norm(vector_sum(out.family.z), dn);
  out.cone_residual = cone_residual_sum(out.family.z, out.family.cones, dn);
  out.bound = eps / lambda;
  return out;
}

RescaleReport snap_to_cones(const DualFamily& f) {
  validate_family(f);
  const NormSpec dn = dual(f.primal);
  const double eps = f.params.epsilon.value_or(0);
  const double rho = f.params.rho.value_or(0);
  const double lambda = f.params.lambda.value_or(0);
  check_core_hypothesis(f, dn, eps, rho, lambda);
  require(eps + rho <= lambda + 1e-12, "epsilon + rho <= lambda");

  const std::size_t n = f.z.size();
  std::vector<Vec> v(n);
  double moved = 0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = dist_to_cone(f.z[i], f.cones[i], dn).nearest;
    moved += geo::norm(sub(f.z[i], v[i]), dn);
  }
  if (!strictly_less(moved * (1 + 1e-12), eps / lambda))
    throw OpError(ErrKind::numeric, "nearest-point-failure: cannot certify strict movement bound");
  double s = 0;
  for (const Vec& w : v) s += geo::norm(w, dn);
  if (s < 1e-12) throw OpError(ErrKind::numeric, "snap: cone points collapsed to zero");

  RescaleReport out;
  out.family = f;
  for (std::size_t i = 0; i < n; ++i) out.family.z[i] = scale(v[i], 1.0 / s);
  out.sum_norm = sum_dual_norms(out.family.z, dn, n);
  out.sum_vec_norm = geo::norm(vector_sum(out.family.z), dn);
  out.cone_residual = cone_residual_sum(out.family.z, out.family.cones, dn);
  out.bound = eps / rho;
  return out;
}

PairingBound pairing_bound(const DualFamily& f, const std::vector<Vec>& x, PairingPart which) {
  validate_family(f);
  if (x.size() != f.z.size())
    throw OpError(ErrKind::precondition, "pairing_bound: x count mismatch");
  const double eps = f.params.epsilon.value_or(0);
  const double rho = f.params.rho.value_or(0);
  const double lambda = f.params.lambda.value_or(0);
  const double tau = f.params.tau.value_or(0);
  require(tau > 0 && tau <= 1, "tau in ]0,1]");

  double max_x = 0;
  for (const Vec& xi : x) max_x = std::max(max_x, geo::norm(xi, f.primal));
  require(max_x > 0, "not all x_i zero");
  double pairing = 0;
  for (std::size_t i = 0; i < f.z.size(); ++i) pairing += dot(f.z[i], x[i]);
  require(pairing >= tau * max_x - 1e-12, "sum <z_i,x_i> >= tau * max ||x_i||");

  const RescaleReport rr =
      which == PairingPart::part_i ? rebalance_to_zero_sum(f) : snap_to_cones(f);

  PairingBound out;
  if (which == PairingPart::part_i) {
    out.tau_hat = (tau * rho - eps) / (rho + eps);
    out.tau_hat_variant = out.tau_hat;
  } else {
    out.tau_hat = (tau * lambda - eps) / (lambda + eps);
    out.tau_hat_variant = (tau * lambda - eps) / (rho + lambda);
  }
  double lhs = 0;
  for (std::size_t i = 0; i < f.z.size(); ++i) lhs += dot(rr.family.z[i], x[i]);
  out.lhs = lhs;
  out.rhs = out.tau_hat * max_x;
  out.holds = lhs > out.rhs;
  out.variant_holds = lhs > out.tau_hat_variant * max_x;
  return out;
}

RescaleReport normalize_then_rebalance(std::vector<Vec> z, std::vector<ConeRep> cones,
                                       double epsilon, const NormSpec& primal) {
  require(epsilon > 0 && epsilon < 1, "0 < epsilon < 1");
  DualFamily f;
  f.z = std::move(z);
  f.cones = std::move(cones);
  f.primal = primal;
  f.params.epsilon = epsilon;
  f.params.rho = 1.0;
  f.params.lambda = 1.0 - epsilon;
  validate_family(f);
  const NormSpec dn = dual(primal);
  require(strictly_less(geo::norm(vector_sum(f.z), dn), epsilon), "||sum z_i|| < epsilon");
  for (std::size_t i = 0; i < f.z.size(); ++i)
    require(geo::cone_member(f.z[i], f.cones[i], 1e-8), "z_i in K_i");
  RescaleReport out = rebalance_to_zero_sum(f);
  out.bound = epsilon / (1.0 - epsilon);
  return out;
}

RescaleReport normalize_then_snap(std::vector<Vec> z, std::vector<ConeRep> cones, double epsilon,
                                  const NormSpec& primal) {
  require(epsilon > 0 && epsilon < 1, "0 < epsilon < 1");
  DualFamily f;
  f.z = std::move(z);
  f.cones = std::move(cones);
  f.primal = primal;
  f.params.epsilon = epsilon;
  f.params.rho = 1.0 - epsilon;
  f.params.lambda = 1.0;
  validate_family(f);
  const NormSpec dn = dual(primal);
  require(geo::norm(vector_sum(f.z), dn) <= 1e-9, "sum z_i = 0");
  require(strictly_less(cone_residual_sum(f.z, f.cones, dn), epsilon), "sum d(z_i,K_i) < epsilon");
  RescaleReport out = snap_to_cones(f);
  out.bound = epsilon / (1.0 - epsilon);
  return out;
}

FlipResult two_set_exact_flip(const Vec& z1, const Vec& z2, const ConeRep& k1, const ConeRep& k2,
                              double epsilon, const NormSpec& primal) {
  require(epsilon > 0, "epsilon > 0");
  const NormSpec dn = dual(primal);
  require(strictly_less(geo::norm(add(z1, z2), dn), epsilon), "||z_1 + z_2|| < epsilon");
  require(geo::cone_member(z1, k1, 1e-8) && geo::cone_member(z2, k2, 1e-8), "z_i in K_i");
  const double n1 = geo::norm(z1, dn), n2 = geo::norm(z2, dn);
  require(std::fabs(n1 + n2 - 1.0) <= 1e-9, "||z_1|| + ||z_2|| = 1");

  // Pivot on the larger vector; ties keep the input order.
  const bool swapped = n1 < n2;
  const Vec& big = swapped ? z2 : z1;
  const ConeRep& small_cone = swapped ? k1 : k2;
  const double nb = swapped ? n2 : n1;
  if (nb < 1e-12) throw OpError(ErrKind::numeric, "flip: larger vector vanishes");

  const Vec zhat_big = scale(big, 0.5 / nb);
  const Vec zhat_small = scale(zhat_big, -1.0);

  FlipResult out;
  out.swapped = swapped;
  out.exact_index = swapped ? 1 : 0;
  out.z1 = swapped ? zhat_small : zhat_big;
  out.z2 = swapped ? zhat_big : zhat_small;
  out.residual = dist_to_cone(zhat_small, small_cone, dn).value;
  out.bound = epsilon;
  return out;
}

RescaleReport asymmetric_snap(std::vector<Vec> z, std::vector<ConeRep> cones, double epsilon,
                              const NormSpec& primal) {
  require(epsilon > 0 && epsilon < 1, "0 < epsilon < 1");
  DualFamily f;
  f.z = std::move(z);
  f.cones = std::move(cones);
  f.primal = primal;
  f.params.epsilon = epsilon;
  validate_family(f);
  const std::size_t n = f.z.size();
  require(n >= 2, "n >= 2");
  const NormSpec dn = dual(primal);
  require(geo::norm(vector_sum(f.z), dn) <= 1e-9, "sum z_i = 0");
  require(strictly_less(cone_residual_sum(f.z, f.cones, dn), epsilon), "sum d(z_i,K_i) < epsilon");
  require(std::fabs(sum_dual_norms(f.z, dn, n - 1) - 1.0) <= 1e-9, "sum_{i<n} ||z_i|| = 1");

  std::vector<Vec> y(n);
  double moved = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = dist_to_cone(f.z[i], f.cones[i], dn).nearest;
    moved += geo::norm(sub(f.z[i], y[i]), dn);
  }
  if (!strictly_less(moved * (1 + 1e-12), epsilon))
    throw OpError(ErrKind::numeric, "nearest-point-failure: cannot certify strict movement bound");
  double c = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) c += geo::norm(y[i], dn);
  if (c < 1e-12) throw OpError(ErrKind::numeric, "asymmetric snap: leading block collapsed");

  RescaleReport out;
  out.family = f;
  Vec tail = zeros(f.dim());
  for (std::size_t i = 0; i + 1 < n; ++i) {
    out.family.z[i] = scale(y[i], 1.0 / c);
    tail = add(tail, out.family.z[i]);
  }
  out.family.z[n - 1] = scale(tail, -1.0);
  out.sum_norm = sum_dual_norms(out.family.z, dn, n - 1);
  out.sum_vec_norm = geo::norm(vector_sum(out.family.z), dn);
  out.cone_residual = dist_to_cone(out.family.z[n - 1], out.family.cones[n - 1], dn).value;
  out.bound = epsilon / (1.0 - epsilon);
  return out;
}

}  // namespace tv::alg
