#pragma once

#include "transversal/ekeland.hpp"
#include "transversal/multiset.hpp"
#include "transversal/rescale.hpp"

namespace tv::orc {

using geo::BallRep;
using geo::IntersectionQuery;
using geo::NormSpec;
using geo::SetPtr;

// Dense-grid distance bracket, independent of the LP distance path. The
// swept region is the set's bounding box expanded by one spacing; lo comes
// from the best in-band node minus the lattice resolution, hi from a
// certified member produced by per-leaf projection. d(x, A) lies in
// [lo, hi] and `nearest` attains hi.
struct GridBracket {
  double lo = 0;
  double hi = kInf;
  Vec nearest;
  double spacing = 0;
  std::size_t grid_points = 0;
  std::size_t band_points = 0;
};

// spacing == 0 picks diameter/128. Throws precondition when the set has no
// finite bounding box, budget above 8e6 nodes, unsupported above d = 3.
GridBracket grid_distance_oracle(const Vec& x, const SetPtr& a, const NormSpec& n,
                                 double spacing = 0);

// Exhaustive grid emptiness for an intersection of translated factors,
// optionally restricted to a closed region ball. Fully polyhedral systems
// are cross-checked against LP feasibility (method "grid+lp"). Throws
// numeric "inconclusive-margin" when neither a certified witness nor a
// certified empty verdict exists at this spacing.
struct EmptinessCertificate {
  bool empty = false;
  std::optional<Vec> witness;
  double margin = 0;
  double spacing = 0;
  std::string method;  // "grid" | "grid+lp"
};

EmptinessCertificate emptiness_oracle(const IntersectionQuery& q,
                                      const std::optional<BallRep>& region,
                                      double spacing = 0);

// Exhaustive replay of a variational-principle result. `ok` demands the
// premise, every clause, and agreement with the stored margins within 1e-9.
// Field mapping: finite form, clause1/2/3 mirror the result's margins and
// start_variant reports the literal third clause with the start excluded
// instead of the selected point; geometric forms put the descent margin in
// clause1, the localization-interval margin in clause2, and the smallest
// localization margin in clause3.
struct EvpCheck {
  bool ok = false;
  bool premise_ok = false;
  double clause1 = 0;
  double clause2 = 0;
  double clause3 = 0;
  bool start_variant = false;
  bool margins_match = false;
  std::string why;  // first failed requirement, empty when ok
};

EvpCheck evp_exhaustive_check(const evp::FiniteMetricSpace& space, const std::vector<double>& f,
                              const evp::EVPResult& r, double epsilon, double lambda);

// Geometric forms; point clouds only. The localization clause is replayed
// over every maximal interval of constant localization with open-ball
// semantics: the pattern at a critical value governs the half-open interval
// above it, so a zero interval margin still certifies the strict clause.
EvpCheck evp_exhaustive_check(const SetPtr& A, const SetPtr& B, const Vec& a, const Vec& b,
                              const evp::PairResult& r, double epsilon, double lambda, double rho,
                              const NormSpec& norm);
EvpCheck evp_exhaustive_check(const std::vector<SetPtr>& sets, const std::vector<Vec>& omega,
                              const evp::TupleResult& r, double epsilon, double lambda, double rho,
                              const NormSpec& norm);

// One inequality of a replayed display, oriented lhs < rhs (strict) or
// lhs <= rhs. Equality lines carry "=" in the name and hold within tol.
// A strict line within resolution of equality is flagged boundary and does
// not hold; a non-strict line at the boundary holds but keeps the flag.
struct ReplayLine {
  std::string name;
  double lhs = 0;
  double rhs = 0;
  bool strict = false;
  bool holds = false;
  bool boundary = false;
  double margin = 0;  // rhs - lhs; negative absolute gap for equality lines
};

struct ReplayReport {
  std::string id;
  bool all_hold = false;
  std::vector<ReplayLine> lines;
};

// Raw material for a replay; fields are read per id.
//   "rescale":      z, z_hat, cones, params epsilon/rho/lambda, optional
//                   pair_refs with params tau. Norms in the dual of `norm`.
//   "chain":        omega (point chain) or sets (set chain) with `norm`.
//   "stationarity": sets, xbar, a, params epsilon/rho.
struct ReplayInstance {
  std::vector<Vec> z, z_hat;
  std::vector<geo::ConeRep> cones;
  std::vector<Vec> pair_refs;
  std::vector<Vec> omega;
  std::vector<SetPtr> sets;
  Vec xbar;
  std::vector<Vec> a;
  alg::ParamSet params;
  NormSpec norm = NormSpec::euclidean();
};

ReplayReport inequality_replay(const std::string& id, const ReplayInstance& inst);

}  // namespace tv::orc
