#ifndef EEGROAR_TESTS_ORACLES_HPP
#define EEGROAR_TESTS_ORACLES_HPP

// Independent reference implementations used to cross-check the library's
// fast paths. Everything here is deliberately written as plain nested loops
// and stays out of the shipped code.

#include <cmath>
#include <functional>

#include "eegroar/random.hpp"
#include "eegroar/tensor.hpp"

namespace eegroar::test {

inline Tensord random_tensor(const Shape& shape, Rng& rng, Real lo = -1.0,
                             Real hi = 1.0) {
  Tensord t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline Tensord conv2d_reference(const Tensord& input, const Tensord& weights,
                                const Tensord& bias, Index sr, Index sc) {
  const Index c_in = input.extent(0), h = input.extent(1), w = input.extent(2);
  const Index f_n = weights.extent(0), kh = weights.extent(2),
              kw = weights.extent(3);
  const Index oh = (h - kh) / sr + 1, ow = (w - kw) / sc + 1;
  Tensord out({f_n, oh, ow});
  for (Index f = 0; f < f_n; ++f)
    for (Index i = 0; i < oh; ++i)
      for (Index j = 0; j < ow; ++j) {
        Real acc = bias[f];
        for (Index c = 0; c < c_in; ++c)
          for (Index di = 0; di < kh; ++di)
            for (Index dj = 0; dj < kw; ++dj)
              acc += input(c, i * sr + di, j * sc + dj) *
                     weights(f, c, di, dj);
        out(f, i, j) = acc;
      }
  return out;
}

inline Tensord maxpool2d_reference(const Tensord& input, Index pr, Index pc) {
  const Index c_n = input.extent(0), h = input.extent(1), w = input.extent(2);
  const Index oh = h / pr, ow = w / pc;
  Tensord out({c_n, oh, ow});
  for (Index c = 0; c < c_n; ++c)
    for (Index i = 0; i < oh; ++i)
      for (Index j = 0; j < ow; ++j) {
        Real best = input(c, i * pr, j * pc);
        for (Index di = 0; di < pr; ++di)
          for (Index dj = 0; dj < pc; ++dj)
            best = std::max(best, input(c, i * pr + di, j * pc + dj));
        out(c, i, j) = best;
      }
  return out;
}

inline Tensord dense_reference(const Tensord& x, const Tensord& w,
                               const Tensord& b) {
  const Index m = w.extent(0), n = w.extent(1);
  Tensord out({m});
  for (Index j = 0; j < m; ++j) {
    Real acc = b[j];
    for (Index i = 0; i < n; ++i) acc += w(j, i) * x[i];
    out[j] = acc;
  }
  return out;
}

/// Central finite differences of a scalar function over every element.
inline Tensord finite_difference(const std::function<Real(const Tensord&)>& f,
                                 const Tensord& x, Real h = 1e-5) {
  Tensord grad(x.shape());
  Tensord probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const Real orig = probe[i];
    probe[i] = orig + h;
    const Real up = f(probe);
    probe[i] = orig - h;
    const Real down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

/// Max elementwise deviation scaled by the reference's own peak.
inline Real relative_error(const Tensord& value, const Tensord& reference) {
  const Real scale = std::max(reference.max_abs(), Real(1e-8));
  return max_abs_difference(value, reference) / scale;
}

}  // namespace eegroar::test

#endif  // EEGROAR_TESTS_ORACLES_HPP
