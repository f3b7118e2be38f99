#pragma once

#include "transversal/core.hpp"

namespace tv::geo {

// Supported norm families: euclidean, maximum (Chebyshev), and p-norms
// with p >= 1. "maximum" is its own kind; dual(maximum) = p-norm with p=1
// and dual(p=1) = maximum, so duality is an involution within the family.
struct NormSpec {
  enum class Kind { euclidean, maximum, pnorm };
  Kind kind = Kind::euclidean;
  double p = 2.0;  // only meaningful for Kind::pnorm

  static NormSpec euclidean() { return {Kind::euclidean, 2.0}; }
  static NormSpec maximum() { return {Kind::maximum, 0.0}; }
  static NormSpec pnorm(double p);

  bool operator==(const NormSpec& o) const { return kind == o.kind && (kind != Kind::pnorm || p == o.p); }
};

double norm(const Vec& v, const NormSpec& n);
NormSpec dual(const NormSpec& n);
double dual_norm(const Vec& v, const NormSpec& n);
double dist(const Vec& a, const Vec& b, const NormSpec& n);

// Unit vector a (in norm n) attaining <z, a> = dual_norm(z, n).
// For non-smooth norms ties are broken by the lexicographic rule
// sign(0) := +1 so the output is deterministic. Returns zero vector for z=0.
Vec dual_align(const Vec& z, const NormSpec& n);

std::string to_string(const NormSpec& n);

}  // namespace tv::geo
