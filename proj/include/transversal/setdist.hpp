#pragma once

#include "transversal/sets.hpp"

namespace tv::geo {

// method strings: "exact-lp" (finite exact computation: closed form,
// enumeration, or LP), "alternating" (iterative, bracket from stall gap),
// "grid-oracle" (grid bracket).
struct DistResult {
  double value = kInf;
  std::optional<Vec> nearest;
  std::string method = "exact-lp";
  double lo = kInf, hi = kInf;
};

DistResult dist_point_set(const Vec& x, const SetRep& s, const NormSpec& n);
// Nearest point; ties broken by leaf order. Throws when the distance engine
// cannot produce an attaining point for this class/norm combination.
Vec project(const Vec& x, const SetRep& s, const NormSpec& n);

struct SetDistResult {
  double value = kInf;
  std::optional<Vec> pa, pb;
  std::string method = "exact-lp";
  double lo = kInf, hi = kInf;
};
SetDistResult dist_set_set(const SetRep& a, const SetRep& b, const NormSpec& n);

// --- intersections of translated, optionally localized sets ---
// factor = (set intersect local ball, both in base coordinates) + shift.
// Open localization balls carry strict-inequality semantics; strictness is
// certified with margin kTolStrict.
struct Factor {
  SetPtr set;
  Vec shift;
  std::optional<BallRep> local;
  bool local_open = false;
};

struct IntersectionQuery {
  std::vector<Factor> factors;
  NormSpec ambient = NormSpec::euclidean();
};

Factor translated_factor(SetPtr set, const Vec& minus_shift);  // set - minus_shift

struct EmptinessResult {
  enum class Verdict { empty, nonempty, inconclusive };
  Verdict verdict = Verdict::inconclusive;
  std::optional<Vec> witness;
  double margin = 0;
  std::string method;
};

// Main-path emptiness: enumeration when a finite factor exists, LP for
// polyhedral systems, Dykstra witness search, then grid (d <= 3).
EmptinessResult intersection_empty(const IntersectionQuery& q);

// Grid-only emptiness used by the independent oracle layer.
EmptinessResult intersection_empty_grid(const IntersectionQuery& q, double h_override = 0);

// Distance from a point to an intersection of closed factors (no open
// balls). Returns +inf value with an "empty" method tag when the
// intersection is certified empty.
DistResult dist_point_intersection(const Vec& x, const IntersectionQuery& q);

bool factor_member(const Vec& x, const Factor& f, double tol = kTolMember);

// Euclidean projection onto an intersection of convex pieces (Dykstra).
struct ProjPiece {
  std::function<Vec(const Vec&)> proj;
};
std::vector<ProjPiece> leaf_pieces(const ConvexLeaf& leaf);
std::optional<Vec> dykstra_project(const Vec& x0, const std::vector<ProjPiece>& pieces,
                                   int max_sweeps = 10000);

// Projection onto the l1 ball of given radius centered at origin.
Vec l1_ball_project(const Vec& v, double r);

// Some point of the leaf (global coordinates); polyhedra solve a
// feasibility LP and throw precondition when empty.
Vec leaf_anchor(const ConvexLeaf& leaf);

std::uint64_t grid_points_count();

}  // namespace tv::geo
