// gradcheck.hpp -- central finite-difference oracle for backward passes.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace isonet::testing {

/// Central differences of a scalar function with respect to x. f reads x by
/// reference, so perturbations are visible inside; x is restored after each
/// coordinate.
template <class F>
std::vector<double> fd_gradient(std::vector<double>& x, const F& f, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f();
    x[i] = x0 - h;
    const double fm = f();
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Central differences over a vector of storage type T (possibly f32): the
/// slope divides by the actually representable step, not the nominal 2h.
template <class T, class F>
std::vector<double> fd_gradient_t(std::vector<T>& x, const F& f, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T x0 = x[i];
    const T xp = static_cast<T>(static_cast<double>(x0) + h);
    const T xm = static_cast<T>(static_cast<double>(x0) - h);
    x[i] = xp;
    const double fp = f();
    x[i] = xm;
    const double fm = f();
    x[i] = x0;
    g[i] = (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm));
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_err(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace isonet::testing
