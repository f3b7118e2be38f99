#pragma once

#include "transversal/setdist.hpp"

namespace tv::geo {

// Result of a multi-set distance computation. minimizers holds one point
// per input set when the infimum is attained within budget; center is the
// distinguished point (enclosing-ball center for d2, mean for d3, the
// last-set point for d1 over sets).
struct DistanceReport {
  double value = 0;
  std::vector<Vec> minimizers;
  std::optional<Vec> center;
  std::string method = "exact-lp";  // exact-lp | alternating | grid-oracle
  double lo = 0, hi = 0;
};

// max_{i < n} d(omega_i, omega_n); asymmetric in the last argument.
double d1_points(const std::vector<Vec>& pts, const NormSpec& n);

// inf_x max_i d(omega_i, x): enclosing-ball radius. Euclidean uses a
// minimum-enclosing-ball solver, polyhedral norms an LP.
DistanceReport d2_points(const std::vector<Vec>& pts, const NormSpec& n);

// max_i ||omega_i - mean||.
double d3_points(const std::vector<Vec>& pts, const NormSpec& n);

DistanceReport d1_sets(const std::vector<SetPtr>& sets, const NormSpec& n);
DistanceReport d2_sets(const std::vector<SetPtr>& sets, const NormSpec& n);
DistanceReport d3_sets(const std::vector<SetPtr>& sets, const NormSpec& n);

// d1 with the anchor set appended last.
DistanceReport localized_distance(const std::vector<SetPtr>& sets, const SetPtr& anchor,
                                  const NormSpec& n);

struct ChainCheck {
  std::string name;
  bool holds = false;
  double margin = 0;  // slack of the inequality; negative when violated
};

std::vector<ChainCheck> check_distance_inequalities(const std::vector<Vec>& pts,
                                                    const NormSpec& n);
std::vector<ChainCheck> check_distance_inequalities(const std::vector<SetPtr>& sets,
                                                    const NormSpec& n);

// Center and radius of the euclidean minimum enclosing ball.
std::pair<Vec, double> min_enclosing_ball(const std::vector<Vec>& pts);

// Center of the smallest enclosing ball in the given norm.
Vec chebyshev_center(const std::vector<Vec>& pts, const NormSpec& n);

}  // namespace tv::geo
