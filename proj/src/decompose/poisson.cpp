#include <cmath>

#include "intrinsic/decompose.hpp"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"

namespace intrinsic::decompose {

namespace {

double dot(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// D^T D f.
Image normal_operator(const Image& f) {
  const GradientField g = gradient(f);
  return gradient_adjoint(g.gx, g.gy);
}

}  // namespace

Image poisson_solve(const GradientField& target, double mean_anchor, double tolerance, int max_iterations) {
  if (target.gx.channels() != 1 || !target.gx.same_shape(target.gy)) {
    throw DimensionError("poisson_solve needs a single-channel gradient field");
  }
  if (!(tolerance > 0.0) || max_iterations <= 0) throw ParameterError("poisson_solve: bad tolerance or iteration cap");
  for (std::size_t i = 0; i < target.gx.size(); ++i) {
    if (!std::isfinite(target.gx[i]) || !std::isfinite(target.gy[i])) {
      throw ParameterError("poisson_solve: non-finite target");
    }
  }
  if (!std::isfinite(mean_anchor)) throw ParameterError("poisson_solve: non-finite anchor");

  const Image b = gradient_adjoint(target.gx, target.gy);
  Image x(b.width(), b.height(), 1);
  const double b_norm = std::sqrt(dot(b, b));
  if (b_norm > 0.0) {
    // b sums to zero, so the iterates stay orthogonal to the constant null space.
    Image r = b, p = b;
    double rr = dot(r, r);
    int it = 0;
    for (; it < max_iterations && std::sqrt(rr) > tolerance * b_norm; ++it) {
      const Image ap = normal_operator(p);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) break;
      const double alpha = rr / pap;
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      const double rr_next = dot(r, r);
      const double beta = rr_next / rr;
      rr = rr_next;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    }
    const double rel = std::sqrt(rr) / b_norm;
    if (rel > tolerance) {
      throw ConvergenceError("conjugate gradient stopped after " + std::to_string(it) +
                                 " iterations at relative residual " + std::to_string(rel),
                             rel);
    }
  }
  const double shift = mean_anchor - mean(x);
  for (double& v : x.data()) v += shift;
  return x;
}

}  // namespace intrinsic::decompose
