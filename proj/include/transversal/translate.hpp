#pragma once

#include <optional>
#include <string>
#include <vector>

#include "transversal/cones.hpp"
#include "transversal/rescale.hpp"
#include "transversal/setdist.hpp"

namespace tv::tr {

using alg::ParamSet;
using geo::NormSpec;
using geo::SetPtr;

// Translation family a_1..a_k (k = n or n-1 depending on whether the last
// set stays fixed), with optional anchor points and localization radius.
// rho == kInf encodes the ball-free displays.
struct TranslationSet {
  std::vector<Vec> a;
  std::vector<Vec> omega;      // empty when the display carries no omega_i
  double rho = kInf;
  std::optional<Vec> witness;  // evaluation point for the metric displays
  double max_norm = 0;         // max_i ||a_i|| in the ambient norm
};

enum class Verdict { holds, fails, unknown };
std::string to_string(Verdict v);

// Outcome of checking one of the ten primal displays. holds requires a
// certificate; an exhausted search budget yields unknown, never fails.
struct PrimalCheckResult {
  std::string id;  // "P1".."P10"
  Verdict verdict = Verdict::unknown;
  std::string certificate;    // "enumeration" | "lp-infeasible" | "oracle-grid" | "witness" | "sample-budget"
  double empt_margin = 0;     // emptiness clause margin, distance scale
  double norm_margin = 0;     // bound - max ||a_i||
  double member_margin = kInf;  // min slack of the omega_i membership clauses
  std::optional<Vec> witness;   // intersection point when the clause fails
  // Brackets for the metric displays P9/P10 only.
  double lhs_lo = 0, lhs_hi = 0;  // alpha * d(x, cap(Omega_i - a_i))
  double rhs_lo = 0, rhs_hi = 0;  // max_i d(x, Omega_i - a_i)
  bool ok() const { return verdict == Verdict::holds; }
};

struct PrimalData {
  std::vector<SetPtr> sets;
  std::optional<Vec> xbar;
  TranslationSet tr;
  ParamSet params;  // epsilon always; alpha for P7..P10
  NormSpec norm = NormSpec::euclidean();
};

PrimalCheckResult check_primal_condition(const std::string& id, const PrimalData& data);

// Near-closest-point translations: from omega_i with d1(omega...) within
// epsilon of the set distance, build a_i = (eps'/M)(omega_n - omega_i)
// emptying the anchored intersection while max ||a_i|| < epsilon.
struct NearClosestResult {
  TranslationSet tr;       // a_1..a_{n-1}, omega stored, rho = kInf
  double eps_prime = 0;
  double m = 0;            // d1(omega...)
  PrimalCheckResult check;  // the anchored display, id "P8"
};
NearClosestResult translations_from_near_closest(const std::vector<SetPtr>& sets,
                                                 const std::vector<Vec>& omega,
                                                 double epsilon, const NormSpec& norm);

// Ball-form to metric-form transformation: keeps the same a_i and certifies
// alpha d(xbar, cap(Omega_i - a_i)) > max_i d(xbar, Omega_i - a_i) with
// alpha = epsilon / rho.
struct MetricConditionData {
  TranslationSet tr;
  double alpha = 0;
  PrimalCheckResult check;  // id "P9"
};
MetricConditionData p2_to_p9(const std::vector<SetPtr>& sets, const Vec& xbar,
                             const TranslationSet& tr, double epsilon, double rho,
                             const NormSpec& norm);

// Metric form back to the anchored ball form: picks rho' in ]0, rho[ and
// near points omega_i, returns a_i' = a_i + xbar - omega_i with the
// localized display at radius rho' and bound alpha * rho'.
struct P7Data {
  TranslationSet tr;  // a', omega, rho = rho'
  double alpha = 0;
  double rho_prime = 0;
  std::vector<double> omega_ball_margin;  // epsilon - ||omega_i - xbar||
  PrimalCheckResult check;                // id "P7"
};
P7Data p9_to_p7(const std::vector<SetPtr>& sets, const Vec& xbar, const TranslationSet& tr,
                double epsilon, double rho, const NormSpec& norm);

// Largest uniform translation radius that cannot empty the intersection
// inside the ball of radius rho around xbar. Exact for affine data via the
// induced linear solution map; bracketed by adversarial search otherwise.
struct ThetaResult {
  double lo = 0, hi = kInf;
  std::string method;  // "affine-exact" | "affine-bracket" | "search-lower"
  std::optional<std::vector<Vec>> worst_a;  // emptying translations at hi
};
ThetaResult theta_rho(const std::vector<SetPtr>& sets, const Vec& xbar, double rho,
                      const NormSpec& norm);

// Dual-to-primal reversal. Input shapes:
//   direct      sum x* = 0, sum_{i<n} ||x*_i|| = 1, x*_i normal for i < n,
//               d(x*_n, N_n) < eps                     -> anchored display "P6"
//   append      sum_n ||x*_i|| = 1, all x*_i normal, ||sum x*|| < eps
//               (whole space appended as an extra set) -> display "P3"
//   renormalize same input as append, rescaled to the direct shape
//               with threshold eps / sum_{i<n} ||x*_i|| -> display "P6"
enum class ReversalRoute { auto_detect, direct, append_space, renormalize };

struct ReversalResult {
  TranslationSet tr;   // a_i with omega and rho filled in
  std::string target;  // "P3" | "P6" | "P5.13-1"
  double pairing = 0;  // sum <x*_i, a_i> over the produced a_i
  double pairing_threshold = 0;
  double delta = 0;    // certified localization radius; requires rho < delta
  double eps_engine = 0;  // threshold actually used by the construction
  PrimalCheckResult check;
};

ReversalResult dual_to_primal_translations(const std::vector<SetPtr>& sets,
                                           const std::vector<Vec>& omega,
                                           const std::vector<Vec>& xstar, double epsilon,
                                           double rho, double tau, const NormSpec& norm,
                                           geo::ConeKind kind = geo::ConeKind::frechet,
                                           ReversalRoute route = ReversalRoute::auto_detect);

// Reversal with all sets localized: input shape sum x* = 0,
// sum_n d(x*_i, N_i) < eps, sum_{i<n} ||x*_i|| = 1; produces translations
// for the doubly localized display (every factor cut to a rho-ball).
ReversalResult localized_reversal(const std::vector<SetPtr>& sets,
                                  const std::vector<Vec>& omega,
                                  const std::vector<Vec>& xstar, double epsilon, double rho,
                                  double tau, const NormSpec& norm,
                                  geo::ConeKind kind = geo::ConeKind::frechet);

}  // namespace tv::tr
