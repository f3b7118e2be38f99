#pragma once

#include "transversal/cones.hpp"

namespace tv::alg {

using geo::ConeRep;
using geo::NormSpec;

struct ParamSet {
  std::optional<double> epsilon, rho, lambda, alpha, tau, xi, delta, epsilon_prime;
};

// Dual vectors with their cones. Norms of the z_i are measured in the dual
// of `primal`; which block must be normalized is operation-specific.
struct DualFamily {
  std::vector<Vec> z;
  std::vector<ConeRep> cones;
  ParamSet params;
  NormSpec primal = NormSpec::euclidean();

  std::size_t size() const { return z.size(); }
  std::size_t dim() const { return z.empty() ? 0 : z[0].size(); }
};

void validate_family(const DualFamily& f);

// Transformed family plus the quantities the guarantees talk about, so
// callers can report margins (bound - achieved, strictly positive).
struct RescaleReport {
  DualFamily family;
  double sum_norm = 0;       // sum of dual norms over the normalized block
  double sum_vec_norm = 0;   // dual norm of the vector sum
  double cone_residual = 0;  // sum of dual-norm distances to the cones
  double bound = 0;          // the strict guarantee the residual must beat
};

// Given lambda * sum d(z_i,K_i) + rho * ||sum z_i|| < epsilon with
// sum ||z_i|| = 1 and epsilon + lambda <= rho: shift to an exactly zero-sum
// family with sum d(z_i,K_i) < epsilon/lambda.
RescaleReport rebalance_to_zero_sum(const DualFamily& f);

// Same hypothesis with epsilon + rho <= lambda: move each vector into its
// cone, keeping ||sum z_i|| < epsilon/rho.
RescaleReport snap_to_cones(const DualFamily& f);

enum class PairingPart { part_i, part_ii };

struct PairingBound {
  double tau_hat = 0;  // statement formula
  bool holds = false;  // strict pairing inequality on the transformed family
  double lhs = 0;      // sum of pairings
  double rhs = 0;      // tau_hat * max ||x_i||
  // The proof's final display uses a different denominator in part (ii);
  // evaluated alongside, never asserted.
  double tau_hat_variant = 0;
  bool variant_holds = false;
};

// Lemma-(iii) companion: transfer a pairing lower bound tau through the
// part-(i) or part-(ii) transformation.
PairingBound pairing_bound(const DualFamily& f, const std::vector<Vec>& x, PairingPart which);

// Cone-feasible, nearly zero-sum data (||sum|| < eps < 1): zero-sum output
// with cone residual < eps/(1-eps). The part-(i) map at rho=1, lambda=1-eps.
RescaleReport normalize_then_rebalance(std::vector<Vec> z, std::vector<ConeRep> cones,
                                       double epsilon, const NormSpec& primal);

// Zero-sum, nearly cone-feasible data (sum d < eps < 1): cone-feasible
// output with ||sum|| < eps/(1-eps). The part-(ii) map at rho=1-eps, lambda=1.
RescaleReport normalize_then_snap(std::vector<Vec> z, std::vector<ConeRep> cones, double epsilon,
                                  const NormSpec& primal);

struct FlipResult {
  Vec z1, z2;                   // same order as the inputs
  bool swapped = false;         // construction pivoted on the second vector
  std::size_t exact_index = 0;  // which output lies exactly in its cone
  double residual = 0;          // d(other output, its cone)
  double bound = 0;             // epsilon
};

// n=2 sharpening: exactly opposite unit-half vectors, one exactly in its
// cone, the other within epsilon of its cone.
FlipResult two_set_exact_flip(const Vec& z1, const Vec& z2, const ConeRep& k1, const ConeRep& k2,
                              double epsilon, const NormSpec& primal);

// Asymmetric variant: first n-1 vectors land exactly in their cones and
// carry the normalization; the last picks up the slack, within eps/(1-eps).
RescaleReport asymmetric_snap(std::vector<Vec> z, std::vector<ConeRep> cones, double epsilon,
                              const NormSpec& primal);

}  // namespace tv::alg
