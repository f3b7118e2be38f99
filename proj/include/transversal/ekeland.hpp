#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "transversal/core.hpp"
#include "transversal/norms.hpp"
#include "transversal/sets.hpp"
#include "transversal/translate.hpp"

namespace tv::evp {

using geo::NormSpec;
using geo::SetPtr;

// Finite metric space. Symmetry, zero diagonal, nonnegativity and the
// triangle inequality are validated on construction (tolerance 1e-9).
struct FiniteMetricSpace {
  std::vector<std::vector<double>> d;
  std::size_t size() const { return d.size(); }
  double dist(std::size_t i, std::size_t j) const { return d[i][j]; }
};

FiniteMetricSpace metric_from_matrix(std::vector<std::vector<double>> m);
FiniteMetricSpace metric_from_points(const std::vector<Vec>& pts, const NormSpec& n);

// Variational-principle output on a finite space. All margins are evaluated
// exhaustively; clause 3 uses the strict inequality with x ranging over
// everything but the selected point. The start-excluded variant (which drops
// x == start instead) is evaluated literally and reported alongside.
struct EVPResult {
  std::size_t start = 0;
  std::size_t point = 0;  // selected minimizer
  std::vector<std::size_t> path;
  double f_start = 0;
  double f_point = 0;
  double clause1_margin = 0;     // lambda - d(point, start), > 0
  double clause2_margin = 0;     // f(start) - f(point), >= 0
  double clause3_margin = kInf;  // min_{x != point} f(x) + (eps/lambda) d(x, point) - f(point)
  bool clause3_start_variant = false;
};

// Iterates x_{k+1} = argmin f over the strict-improvement slice at x_k
// (ties to the lowest index) until the slice is empty.
EVPResult evp(const FiniteMetricSpace& space, const std::vector<double>& f,
              std::size_t start, double epsilon, double lambda);

// Two-cloud geometric form with localization radii lambda (around a) and
// rho (around b). clause2_margin is the minimum over all maximal intervals
// of constant localization of
//   d(A cap B_{xi lambda}(a_hat), B cap B_{xi rho}(b_hat)) + xi eps - d_hat
// evaluated at the interval's left endpoint (the infimum over the interval),
// which covers every xi > 0; interiors then satisfy the strict inequality.
struct PairResult {
  std::size_t a_index = 0, b_index = 0;
  Vec a_hat, b_hat;
  double d_hat = 0;
  double d_start = 0;
  double clause1_margin = 0;  // d_start - d_hat, >= 0
  double loc_a_margin = 0;    // lambda - d(a_hat, a), > 0
  double loc_b_margin = 0;    // rho - d(b_hat, b), > 0
  double clause2_margin = 0;  // min over intervals with positive left endpoint
  double eps_prime = 0;
  std::size_t intervals_checked = 0;
};

PairResult gevp(const SetPtr& A, const SetPtr& B, const Vec& a, const Vec& b, double epsilon,
                double lambda, const NormSpec& norm);
PairResult agevp(const SetPtr& A, const SetPtr& B, const Vec& a, const Vec& b, double epsilon,
                 double lambda, double rho, const NormSpec& norm);

// n-cloud extension: the first n-1 sets are localized with radius lambda,
// the last with radius rho; the objective is the max-to-last distance d1.
struct TupleResult {
  std::vector<std::size_t> indices;
  std::vector<Vec> omega_hat;
  double d1_hat = 0;
  double d1_start = 0;
  double clause1_margin = 0;         // d1_start - d1_hat
  std::vector<double> loc_margins;   // radius_i - d(omega_hat_i, omega_i)
  double clause2_margin = 0;
  double eps_prime = 0;
  std::size_t intervals_checked = 0;
};

TupleResult agevp_n(const std::vector<SetPtr>& sets, const std::vector<Vec>& omega,
                    double epsilon, double lambda, double rho, const NormSpec& norm);

// Translations emptying one localization scale of an anchored collection.
struct LocalizedTranslations {
  double xi = 0;
  tr::TranslationSet set;
  double eps_prime = 0;
  double empt_margin = 0;  // enumeration margin of the emptiness clause
  double norm_margin = 0;  // norm bound minus max ||a_i||
};

// Disjoint collections: anchor with agevp_n, then empty each requested
// localization scale with near-closest-point translations.
struct LocalizeResult {
  TupleResult base;
  std::vector<LocalizedTranslations> per_xi;
};

LocalizeResult nonintersect_localize(const std::vector<SetPtr>& sets,
                                     const std::vector<Vec>& omega, double epsilon,
                                     double lambda, double rho, const std::vector<double>& xis,
                                     const NormSpec& norm);

// Ball-form extremality localized at every scale: from translations a_i
// emptying the intersection inside B_rho(xbar), produce anchor points
// omega_i within lambda of xbar and, for each xi below the returned delta,
// translations a_i' emptying the xi-scale localized display. The sharpened
// variants (no truncation of the sets / no ball factor) are certified when
// the lambda / rho / epsilon ordering triggers them.
struct ExtremalLocalizeResult {
  std::vector<Vec> omega;
  Vec x_hat;           // ball-side selected point
  double delta = 0;    // admissible scales are ]0, delta[
  double rho_prime = 0;
  double rho_eff = 0;  // rho, or lambda + epsilon when rho is infinite
  std::vector<LocalizedTranslations> per_xi;
  bool sharp_untruncated = false;  // lambda >= rho_eff + eps variant held
  bool sharp_no_ball = false;      // lambda + eps <= rho_eff variant held
};

ExtremalLocalizeResult extremal_localize(const std::vector<SetPtr>& sets, const Vec& xbar,
                                         const std::vector<Vec>& a, double epsilon, double rho,
                                         double lambda, const std::vector<double>& xis,
                                         const NormSpec& norm);

}  // namespace tv::evp
