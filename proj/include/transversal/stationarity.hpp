#pragma once

#include "transversal/translate.hpp"

namespace tv::lab {

using geo::ConeKind;
using geo::NormSpec;
using geo::SetPtr;

// Dual certificate forms. d1/d2 bound the residual by epsilon (the
// omega-search radius); d3..d6 bound it by a separate alpha. Odd forms keep
// the dual vectors inside the normal cones and bound the norm of their sum;
// even forms pin the sum to zero and bound the total cone distance. d5/d6
// normalize only the first n-1 vectors.
enum class DualForm { d1, d2, d3, d4, d5, d6 };

std::string to_string(DualForm f);
DualForm dual_form_from(const std::string& s);

// The two dual transversality criteria: "members" quantifies cone members
// with a small sum, "zero_sum" quantifies zero-sum families near the cones.
enum class SupForm { members, zero_sum };

// Certificate family at chosen base points. All dual quantities are
// measured in the dual of the ambient norm. The normalized block sums to 1
// exactly; residuals are stored as recomputed from the vectors.
struct CertBundle {
  std::vector<Vec> omega;
  std::vector<Vec> xstar;
  std::string normalization = "sum-n";  // "sum-n" | "sum-(n-1)"
  double sum_residual = 0;              // dual norm of sum x*_i
  double cone_residual = 0;             // sum_i d(x*_i, N_i(omega_i))
  double pairing = 0;                   // 0 unless a pairing clause applies
  ConeKind kind = ConeKind::frechet;
};

struct BundleCheck {
  bool ok = false;
  double normalization_gap = 0;  // |recomputed block sum - 1|
  double sum_gap = 0;            // |recomputed - stored| for the sum residual
  double cone_gap = 0;           // same for the cone residual
  std::string why;
};

// Recompute every residual from the (omega, x*) fields against the sets.
BundleCheck reverify(const CertBundle& b, const std::vector<SetPtr>& sets,
                     const NormSpec& norm);

// Pairing clause value: sum_i <x*_i, refs_i> over min(sizes) entries.
double pairing_value(const std::vector<Vec>& xstar, const std::vector<Vec>& refs);

// Searches translations with max ||a_i|| < epsilon whose anchored metric
// display certifies alpha-stationarity at xbar. A found witness is verified
// by check_primal_condition; not-found is non-conclusive (the property
// quantifies over every positive radius).
struct StationarityResult {
  bool found = false;
  tr::TranslationSet witness;
  tr::PrimalCheckResult check;
  std::size_t evaluated = 0;  // candidate families checked
};
StationarityResult alpha_stationarity_test(const std::vector<SetPtr>& sets, const Vec& xbar,
                                           double alpha, double epsilon, std::size_t budget,
                                           const NormSpec& norm);

// Grid infimum of the dual criterion over omega tuples in the open
// epsilon-ball around xbar. hi is attained by the returned family (exact
// recomputation); lo additionally certifies the infimum when the grids are
// stratification-exhaustive and the norm family admits exact support
// patterns, otherwise it is the scaled LP floor of the sampled grid.
struct AlphaSup {
  double lo = 0, hi = kInf;
  std::size_t tuples = 0;
  bool exact = false;
  std::string method;  // "stratified-lp" | "sampled-lp" | "vacuous"
  std::optional<CertBundle> argmin;
};
AlphaSup dual_alpha_sup(const std::vector<SetPtr>& sets, const Vec& xbar, double epsilon,
                        SupForm form, const NormSpec& norm,
                        ConeKind kind = ConeKind::frechet);

// Modulus of transversality at xbar: upper end from sampled ratios
// max_i d(x, Omega_i - a_i) / d(x, cap(Omega_i - a_i)) with x in the open
// epsilon-ball and max ||a_i|| < epsilon; a sampled family emptying the
// intersection collapses the modulus to zero. Lower end from the dual-side
// grid infimum. Denominators below tol are skipped and counted.
struct ModulusReport {
  double lower = 0, upper = kInf;
  bool lower_certified = false;  // dual side was stratification-exhaustive
  std::optional<tr::TranslationSet> worst;  // translations of the minimal ratio
  std::optional<Vec> worst_x;
  std::size_t samples = 0, skipped = 0;
  std::uint64_t seed = 0;
};
ModulusReport transversality_modulus(const std::vector<SetPtr>& sets, const Vec& xbar,
                                     double epsilon, std::size_t samples, std::uint64_t seed,
                                     const NormSpec& norm);

// Grid-and-LP search for a certificate of the requested form. omega
// candidates come from the face stratification (polyhedra), angular grids
// (balls), or the points themselves (clouds), all inside the open
// epsilon-ball around xbar. Returns the best bundle when its recomputed
// residual clears the form's threshold strictly, otherwise
// "infeasible-at-grid" with the best value seen.
struct CertSearchResult {
  std::optional<CertBundle> bundle;
  double best = kInf;
  double threshold = 0;
  std::size_t tuples = 0;
  std::string note;  // "found" | "infeasible-at-grid"
};
CertSearchResult dual_certificate_search(const std::vector<SetPtr>& sets, const Vec& xbar,
                                         double epsilon, double alpha, DualForm form,
                                         ConeKind kind, const NormSpec& norm);

// Certificate conversions between the member and zero-sum shapes, full or
// head normalization. The input residual r (recomputed) must be < 1; the
// output residual is certified below r(1+k)/(1-r(1+k)) for a relative
// guard k around 1e-9, matching the r/(1-r) bound.
enum class ConvertDirection { d1_to_d2, d2_to_d1, d5_to_d6, d6_to_d5 };
CertBundle certificate_convert(const std::vector<SetPtr>& sets, const CertBundle& in,
                               ConvertDirection dir, const NormSpec& norm);

// Separation certificates. The asymmetric form translates the first n-1
// sets, pins the head normalization, and bounds the weighted cone residual
// lambda * sum_{i<n} d + rho * d_n by epsilon together with a pairing
// clause against omega_n + a_i - omega_i. The symmetric variant translates
// all n sets, carries an extra evaluation point x inside the rho-ball, and
// bounds lambda * sum d + rho * ||sum x*||.
struct SeparationResult {
  bool found = false;
  CertBundle bundle;
  std::optional<Vec> x;          // symmetric variant only
  double objective = 0;          // the weighted residual the clause bounds
  double pairing_rhs = 0;        // tau * max reference norm
  std::vector<Vec> pair_refs;    // vectors the pairing pairs against
  std::size_t tuples = 0;
  std::string note;  // "found" | "not-found-at-budget"
};

SeparationResult separation_certificate_t51(const std::vector<SetPtr>& sets, const Vec& xbar,
                                            const std::vector<Vec>& a, double epsilon,
                                            double lambda, double rho, double tau,
                                            ConeKind kind, const NormSpec& norm);

SeparationResult separation_certificate_t57(const std::vector<SetPtr>& sets, const Vec& xbar,
                                            const std::vector<Vec>& a, double epsilon,
                                            double lambda, double rho, double tau,
                                            ConeKind kind, const NormSpec& norm);

// Disjoint-set certificate at near-closest points omega_i: searches
// omega'_i in Omega_i within lambda of omega_i and duals in the head-
// normalized zero-sum form with threshold epsilon / lambda, plus the
// pairing clause against omega'_n - omega'_i.
SeparationResult zheng_ng_certificate(const std::vector<SetPtr>& sets,
                                      const std::vector<Vec>& omega, double epsilon,
                                      double lambda, double tau, ConeKind kind,
                                      const NormSpec& norm);

}  // namespace tv::lab
