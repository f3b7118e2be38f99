#pragma once

#include <memory>
#include <variant>

#include "transversal/lp.hpp"
#include "transversal/norms.hpp"

namespace tv::geo {

struct SetRep;
using SetPtr = std::shared_ptr<const SetRep>;

// Finite list of points.
struct PointCloud {
  std::vector<Vec> points;
};

// { x : rows[i].x <= rhs[i] }
struct HPolyhedron {
  std::vector<Vec> rows;
  Vec rhs;
};

// Closed ball in the given norm; radius == kInf encodes the whole space.
struct BallRep {
  Vec center;
  double radius = kInf;
  NormSpec norm = NormSpec::euclidean();
};

// base + span(directions)
struct AffineRep {
  Vec base;
  std::vector<Vec> directions;
};

// inner + offset (Minkowski translate)
struct ShiftedRep {
  SetPtr inner;
  Vec offset;
};

// Union of parts; empty only as the result of a filtering operation.
struct UnionRep {
  std::vector<SetPtr> parts;
};

struct SetRep {
  std::size_t dim = 0;
  std::variant<PointCloud, HPolyhedron, BallRep, AffineRep, ShiftedRep, UnionRep> v;
};

SetPtr make_cloud(std::vector<Vec> pts);
SetPtr make_point(Vec p);
SetPtr make_poly(std::vector<Vec> rows, Vec rhs);
SetPtr make_ball(Vec center, double radius, NormSpec n);
SetPtr make_affine(Vec base, std::vector<Vec> directions);
SetPtr make_shift(SetPtr inner, Vec offset);  // collapses nested shifts
SetPtr make_union(std::vector<SetPtr> parts);
SetPtr whole_space(std::size_t d);
// Convenience: axis-aligned box [lo, hi].
SetPtr make_box(const Vec& lo, const Vec& hi);

bool is_whole_space(const SetRep& s);
bool member(const Vec& x, const SetRep& s, double tol = kTolMember);

// Componentwise bounding box; nullopt when unbounded in some direction.
struct Box {
  Vec lo, hi;
};
std::optional<Box> bounding_box(const SetRep& s);

// --- convex-leaf decomposition ---
// Every supported set decomposes into convex leaves: unions distribute and
// point clouds split into singletons. A leaf is (atom + shift), optionally
// intersected with a closed ball in atom coordinates (used by localization).
struct ConvexLeaf {
  std::optional<Vec> point;
  const HPolyhedron* poly = nullptr;
  const BallRep* ball = nullptr;
  const AffineRep* affine = nullptr;
  Vec shift;
  SetPtr keepalive;  // owns the atoms the raw pointers refer to

  std::size_t dim() const;
};

std::vector<ConvexLeaf> convex_leaves(const SetRep& s);

// Membership distance lower bound in the euclidean norm (cheap closed
// forms; underestimates the true distance). Used by grid oracles.
double euclid_lb_dist(const Vec& x, const ConvexLeaf& leaf);
bool leaf_member(const Vec& x, const ConvexLeaf& leaf, double tol = kTolMember);

// --- incremental LP assembly over shared variables ---
struct LinExpr {
  std::vector<std::pair<std::size_t, double>> terms;
  double cst = 0;
  LinExpr& add(std::size_t var, double coef) {
    terms.push_back({var, coef});
    return *this;
  }
};

class LPBuilder {
 public:
  std::size_t vars(std::size_t k) {
    const std::size_t off = nv_;
    nv_ += k;
    return off;
  }
  std::size_t var_count() const { return nv_; }
  void add(const LinExpr& e, char sense, double rhs) { rows_.push_back({e, sense, rhs}); }
  void lower_bound(std::size_t var, double b);  // var >= b
  void set_objective(LinExpr e) { obj_ = std::move(e); }
  LPProblem build() const;

 private:
  struct Row {
    LinExpr e;
    char sense;
    double rhs;
  };
  std::size_t nv_ = 0;
  std::vector<Row> rows_;
  LinExpr obj_;
};

// True when the leaf's membership is a finite system of linear constraints
// (point, polyhedron, affine, maximum- or 1-norm ball).
bool polyhedral_leaf(const ConvexLeaf& leaf);

// Emit x in leaf as linear constraints over variables [xoff, xoff+d).
// Throws unsupported for non-polyhedral leaves.
void emit_leaf_membership(LPBuilder& lp, std::size_t xoff, const ConvexLeaf& leaf);

// Emit norm(x - y) <= t for polyhedral norms (maximum, p=1); x and y are
// variable blocks of size d, t a single variable. For fixed y pass yoff
// == SIZE_MAX and the point in ypt.
void emit_norm_le(LPBuilder& lp, const NormSpec& n, std::size_t d, std::size_t xoff,
                  std::size_t yoff, const Vec* ypt, std::size_t tvar);

bool polyhedral_norm(const NormSpec& n);

}  // namespace tv::geo
