#pragma once

#include "transversal/setdist.hpp"

namespace tv::geo {

// Polyhedral cone in V-representation:
//   { sum_i c_i rays[i] + sum_k t_k lines[k] : c >= 0, t free }
// whole == true encodes the full space; empty rays/lines encode {0}.
struct ConeRep {
  std::size_t dim = 0;
  std::vector<Vec> rays;
  std::vector<Vec> lines;
  bool whole = false;

  bool is_trivial() const { return !whole && rays.empty() && lines.empty(); }
};

enum class ConeKind { frechet, clarke, convex };

// Normal cone of the set at a member point. Norm-independent. The three
// kinds coincide on convex atoms; they differ only where several branches
// of a union meet. Throws precondition when omega is not in the set and
// unsupported for combinations outside the handled classes.
ConeRep normal_cone(const SetRep& s, const Vec& omega, ConeKind kind,
                    double active_tol = 1e-7);

struct ConeDistResult {
  double value = 0;
  Vec nearest;  // a cone point attaining value up to (1 + 1e-12) slack
};

// Distance from z to the cone, measured in norm n (callers typically pass
// the dual of the ambient norm). Euclidean measure uses nonnegative least
// squares; polyhedral measures use an LP.
ConeDistResult dist_to_cone(const Vec& z, const ConeRep& k, const NormSpec& n);

bool cone_member(const Vec& z, const ConeRep& k, double tol = kTolMember);

// Emit "x in cone" over the variable block [xoff, xoff+dim) by introducing
// fresh coefficient variables (c >= 0 for rays, free for lines).
void emit_cone_membership(LPBuilder& lp, std::size_t xoff, const ConeRep& k);

// Orthonormal basis of span(vectors); tol controls rank decisions.
std::vector<Vec> orthonormal_basis(const std::vector<Vec>& vectors, double tol = 1e-10);

// Basis of { x : rows[i] . x = 0 }.
std::vector<Vec> null_space(const std::vector<Vec>& rows, std::size_t dim, double tol = 1e-9);

// Nonnegative least squares: minimize ||z - A c||_2 over c >= 0
// (Lawson-Hanson active set). Returns the coefficient vector.
Vec nnls(const std::vector<Vec>& cols, const Vec& z, double tol = 1e-11);

}  // namespace tv::geo
