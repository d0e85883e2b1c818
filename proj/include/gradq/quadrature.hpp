#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "gradq/error.hpp"

namespace gradq::quadrature {

struct SimpsonOptions {
  double abs_tol = 1e-10;
  int min_depth = 4;
  int max_depth = 200;
};

namespace detail {

template <std::size_t N>
using Values = std::array<double, N>;

template <std::size_t N>
Values<N> simpson(double h, const Values<N>& fa, const Values<N>& fm, const Values<N>& fb) {
  Values<N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = h / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i]);
  return out;
}

template <std::size_t N, typename F>
void refine(const F& f, double a, double b, const Values<N>& fa, const Values<N>& fm,
            const Values<N>& fb, const Values<N>& whole, double tol, int depth,
            const SimpsonOptions& opts, Values<N>& acc) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const Values<N> flm = f(lm);
  const Values<N> frm = f(rm);
  const Values<N> left = simpson<N>(m - a, fa, flm, fm);
  const Values<N> right = simpson<N>(b - m, fm, frm, fb);

  // Error of the worst component, net of what double rounding can resolve.
  double err = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!std::isfinite(left[i] + right[i])) throw NumericalError("quadrature failure");
    const double e = std::fabs(left[i] + right[i] - whole[i]);
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::fabs(left[i] + right[i]);
    err = std::fmax(err, e <= noise ? 0.0 : e);
  }

  if (depth >= opts.min_depth && (err <= 15.0 * tol || m - a <= 0.0 || b - m <= 0.0)) {
    for (std::size_t i = 0; i < N; ++i) {
      acc[i] += left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0;
    }
    return;
  }
  if (depth >= opts.max_depth) throw NumericalError("quadrature failure");
  refine<N>(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, opts, acc);
  refine<N>(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, opts, acc);
}

}  // namespace detail

/// Adaptive Simpson integration of a vector-valued integrand over [a, b].
///
/// `f` maps a double to std::array<double, N>; every component is refined
/// until the Richardson error estimate of the worst component is below
/// `opts.abs_tol`. Throws NumericalError("quadrature failure") if the
/// recursion depth is exhausted or the integrand is not finite.
template <std::size_t N, typename F>
std::array<double, N> integrate(const F& f, double a, double b, const SimpsonOptions& opts = {}) {
  std::array<double, N> acc{};
  if (!(a < b)) return acc;
  const auto fa = f(a);
  const auto fb = f(b);
  const auto fm = f(0.5 * (a + b));
  const auto whole = detail::simpson<N>(b - a, fa, fm, fb);
  detail::refine<N>(f, a, b, fa, fm, fb, whole, opts.abs_tol, 0, opts, acc);
  return acc;
}

/// Scalar convenience wrapper.
template <typename F>
double integrate_scalar(const F& f, double a, double b, const SimpsonOptions& opts = {}) {
  auto wrapped = [&f](double x) { return std::array<double, 1>{f(x)}; };
  return integrate<1>(wrapped, a, b, opts)[0];
}

}  // namespace gradq::quadrature
