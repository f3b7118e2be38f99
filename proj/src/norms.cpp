#include "transversal/norms.hpp"

#include <cmath>

namespace tv::geo {

NormSpec NormSpec::pnorm(double p) {
  if (!(p >= 1.0) || !std::isfinite(p))
    throw OpError(ErrKind::precondition, "pnorm: requires finite p >= 1");
  return {Kind::pnorm, p};
}

double norm(const Vec& v, const NormSpec& n) {
  switch (n.kind) {
    case NormSpec::Kind::euclidean: {
      return std::sqrt(dot(v, v));
    }
    case NormSpec::Kind::maximum: {
      double m = 0;
      for (double x : v) m = std::max(m, std::fabs(x));
      return m;
    }
    case NormSpec::Kind::pnorm: {
      if (n.p == 1.0) {
        double s = 0;
        for (double x : v) s += std::fabs(x);
        return s;
      }
      // Scale out the largest entry to avoid overflow for large p.
      double m = 0;
      for (double x : v) m = std::max(m, std::fabs(x));
      if (m == 0) return 0;
      double s = 0;
      for (double x : v) s += std::pow(std::fabs(x) / m, n.p);
      return m * std::pow(s, 1.0 / n.p);
    }
  }
  throw OpError(ErrKind::numeric, "norm: bad kind");
}

NormSpec dual(const NormSpec& n) {
  switch (n.kind) {
    case NormSpec::Kind::euclidean:
      return NormSpec::euclidean();
    case NormSpec::Kind::maximum:
      return NormSpec::pnorm(1.0);
    case NormSpec::Kind::pnorm: {
      if (n.p == 1.0) return NormSpec::maximum();
      const double q = n.p / (n.p - 1.0);
      return NormSpec::pnorm(q);
    }
  }
  throw OpError(ErrKind::numeric, "dual: bad kind");
}

double dual_norm(const Vec& v, const NormSpec& n) { return norm(v, dual(n)); }

double dist(const Vec& a, const Vec& b, const NormSpec& n) { return norm(sub(a, b), n); }

static double sgn_pos(double x) { return x < 0 ? -1.0 : 1.0; }

Vec dual_align(const Vec& z, const NormSpec& n) {
  const std::size_t d = z.size();
  Vec a = zeros(d);
  switch (n.kind) {
    case NormSpec::Kind::euclidean: {
      const double nz = std::sqrt(dot(z, z));
      if (nz == 0) return a;
      return scale(z, 1.0 / nz);
    }
    case NormSpec::Kind::maximum: {
      bool all_zero = true;
      for (double x : z)
        if (x != 0) all_zero = false;
      if (all_zero) return a;
      for (std::size_t i = 0; i < d; ++i) a[i] = sgn_pos(z[i]);
      return a;
    }
    case NormSpec::Kind::pnorm: {
      if (n.p == 1.0) {
        // dual is the maximum norm; attain at a largest coordinate.
        std::size_t best = 0;
        double m = -1;
        for (std::size_t i = 0; i < d; ++i)
          if (std::fabs(z[i]) > m) {
            m = std::fabs(z[i]);
            best = i;
          }
        if (m <= 0) return a;
        a[best] = sgn_pos(z[best]);
        return a;
      }
      const double q = n.p / (n.p - 1.0);
      const double nq = norm(z, NormSpec::pnorm(q));
      if (nq == 0) return a;
      for (std::size_t i = 0; i < d; ++i)
        a[i] = sgn_pos(z[i]) * std::pow(std::fabs(z[i]) / nq, q - 1.0);
      return a;
    }
  }
  throw OpError(ErrKind::numeric, "dual_align: bad kind");
}

std::string to_string(const NormSpec& n) {
  switch (n.kind) {
    case NormSpec::Kind::euclidean:
      return "euclidean";
    case NormSpec::Kind::maximum:
      return "maximum";
    case NormSpec::Kind::pnorm:
      return "p" + fmt_g12(n.p);
  }
  return "?";
}

}  // namespace tv::geo
