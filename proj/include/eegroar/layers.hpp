#ifndef EEGROAR_LAYERS_HPP
#define EEGROAR_LAYERS_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eegroar/random.hpp"
#include "eegroar/tensor.hpp"

namespace eegroar {

// Layer primitives over [C, H, W] feature stacks (row-major). Convolutions
// are valid (no padding) cross-correlations; pooling windows never overlap.

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline Index conv_extent(Index in, Index k, Index stride) {
  return (in - k) / stride + 1;
}

}  // namespace detail

template <typename Scalar>
struct Conv2dDims {
  Index in_c, in_h, in_w;
  Index filters, kh, kw;
  Index sr, sc;
  Index out_h, out_w;
};

template <typename Scalar>
Conv2dDims<Scalar> conv2d_dims(const Tensor<Scalar>& input,
                               const Tensor<Scalar>& weights,
                               Index stride_r, Index stride_c) {
  detail::require(input.rank() == 3, "conv2d input must be rank 3 [C,H,W]");
  detail::require(weights.rank() == 4,
                  "conv2d weights must be rank 4 [F,C,kh,kw]");
  Conv2dDims<Scalar> d;
  d.in_c = input.extent(0);
  d.in_h = input.extent(1);
  d.in_w = input.extent(2);
  d.filters = weights.extent(0);
  d.kh = weights.extent(2);
  d.kw = weights.extent(3);
  d.sr = stride_r;
  d.sc = stride_c;
  detail::require(weights.extent(1) == d.in_c,
                  "conv2d weight channel count " +
                      std::to_string(weights.extent(1)) +
                      " does not match input channels " +
                      std::to_string(d.in_c));
  detail::require(d.kh >= 1 && d.kw >= 1, "conv2d kernel extents must be >= 1");
  detail::require(d.sr >= 1 && d.sc >= 1, "conv2d stride must be >= 1");
  detail::require(d.kh <= d.in_h && d.kw <= d.in_w,
                  "conv2d kernel " + std::to_string(d.kh) + "x" +
                      std::to_string(d.kw) + " larger than input " +
                      std::to_string(d.in_h) + "x" + std::to_string(d.in_w));
  d.out_h = detail::conv_extent(d.in_h, d.kh, d.sr);
  d.out_w = detail::conv_extent(d.in_w, d.kw, d.sc);
  return d;
}

/// Patch matrix of size (C*kh*kw) x (out_h*out_w); column p holds the
/// receptive field of output position p (row-major over output cells).
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& input,
                         const Conv2dDims<Scalar>& d) {
  const Index patch = d.in_c * d.kh * d.kw;
  const Index cells = d.out_h * d.out_w;
  RowMatrix<Scalar> col(patch, cells);
  const Scalar* in = input.data();
  for (Index c = 0; c < d.in_c; ++c) {
    for (Index i = 0; i < d.kh; ++i) {
      for (Index j = 0; j < d.kw; ++j) {
        const Index row = (c * d.kh + i) * d.kw + j;
        Scalar* dst = col.data() + row * cells;
        for (Index oh = 0; oh < d.out_h; ++oh) {
          const Scalar* src =
              in + (c * d.in_h + oh * d.sr + i) * d.in_w + j;
          for (Index ow = 0; ow < d.out_w; ++ow)
            dst[oh * d.out_w + ow] = src[ow * d.sc];
        }
      }
    }
  }
  return col;
}

template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& col, const Conv2dDims<Scalar>& d,
                Tensor<Scalar>& out) {
  Scalar* dst = out.data();
  const Index cells = d.out_h * d.out_w;
  for (Index c = 0; c < d.in_c; ++c) {
    for (Index i = 0; i < d.kh; ++i) {
      for (Index j = 0; j < d.kw; ++j) {
        const Index row = (c * d.kh + i) * d.kw + j;
        const Scalar* src = col.data() + row * cells;
        for (Index oh = 0; oh < d.out_h; ++oh) {
          Scalar* base = dst + (c * d.in_h + oh * d.sr + i) * d.in_w + j;
          for (Index ow = 0; ow < d.out_w; ++ow)
            base[ow * d.sc] += src[oh * d.out_w + ow];
        }
      }
    }
  }
}

template <typename Scalar>
Tensor<Scalar> conv2d_forward_with_col(const Tensor<Scalar>& input,
                                       const Tensor<Scalar>& weights,
                                       const Tensor<Scalar>& bias,
                                       Index stride_r, Index stride_c,
                                       RowMatrix<Scalar>* col_out) {
  const auto d = conv2d_dims(input, weights, stride_r, stride_c);
  detail::require(bias.rank() == 1 && bias.extent(0) == d.filters,
                  "conv2d bias length must equal filter count");
  RowMatrix<Scalar> col = im2col(input, d);
  const Index patch = d.in_c * d.kh * d.kw;
  const Index cells = d.out_h * d.out_w;
  Tensor<Scalar> out({d.filters, d.out_h, d.out_w});
  auto wmat = weights.as_matrix(d.filters, patch);
  auto omat = out.as_matrix(d.filters, cells);
  omat.noalias() = wmat * col;
  omat.colwise() += bias.as_vector();
  if (col_out) *col_out = std::move(col);
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input,
                              const Tensor<Scalar>& weights,
                              const Tensor<Scalar>& bias, Index stride_r = 1,
                              Index stride_c = 1) {
  return conv2d_forward_with_col(input, weights, bias, stride_r, stride_c,
                                 static_cast<RowMatrix<Scalar>*>(nullptr));
}

template <typename Scalar>
struct Conv2dGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

/// Gradients for input, weights, and bias. `col` may carry the forward's
/// patch matrix to skip recomputing it.
template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input,
                                    const Tensor<Scalar>& weights,
                                    const Tensor<Scalar>& grad_out,
                                    Index stride_r, Index stride_c,
                                    const RowMatrix<Scalar>* col = nullptr) {
  const auto d = conv2d_dims(input, weights, stride_r, stride_c);
  const Index patch = d.in_c * d.kh * d.kw;
  const Index cells = d.out_h * d.out_w;
  detail::require(grad_out.size() == d.filters * cells,
                  "conv2d grad_out extent mismatch");

  Conv2dGrads<Scalar> g;
  auto gmat = grad_out.as_matrix(d.filters, cells);

  g.bias = Tensor<Scalar>({d.filters});
  g.bias.as_vector() = gmat.rowwise().sum();

  RowMatrix<Scalar> local_col;
  if (!col) {
    local_col = im2col(input, d);
    col = &local_col;
  }
  g.weights = Tensor<Scalar>({d.filters, d.in_c, d.kh, d.kw});
  g.weights.as_matrix(d.filters, patch).noalias() = gmat * col->transpose();

  g.input = Tensor<Scalar>({d.in_c, d.in_h, d.in_w});
  RowMatrix<Scalar> col_grad(patch, cells);
  col_grad.noalias() = weights.as_matrix(d.filters, patch).transpose() * gmat;
  col2im_add(col_grad, d, g.input);
  return g;
}

/// Input gradient only, with an optional substitute weight tensor for the
/// backward multiply. Used by attribution passes that propagate through
/// modified weights while keeping the forward structure.
template <typename Scalar>
Tensor<Scalar> conv2d_backward_input(const Tensor<Scalar>& weights,
                                     const Tensor<Scalar>& grad_out,
                                     const Shape& input_shape, Index stride_r,
                                     Index stride_c) {
  Tensor<Scalar> probe(input_shape);
  const auto d = conv2d_dims(probe, weights, stride_r, stride_c);
  const Index patch = d.in_c * d.kh * d.kw;
  const Index cells = d.out_h * d.out_w;
  detail::require(grad_out.size() == d.filters * cells,
                  "conv2d grad_out extent mismatch");
  auto gmat = grad_out.as_matrix(d.filters, cells);
  RowMatrix<Scalar> col_grad(patch, cells);
  col_grad.noalias() = weights.as_matrix(d.filters, patch).transpose() * gmat;
  Tensor<Scalar> gx(input_shape);
  col2im_add(col_grad, d, gx);
  return gx;
}

// --- max pooling ---------------------------------------------------------

template <typename Scalar>
struct MaxPoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  // flat input index per output cell
};

/// Non-overlapping max pooling (stride = window). Ties go to the first
/// position in row-major order. Trailing cells that do not fill a whole
/// window are dropped.
template <typename Scalar>
MaxPoolResult<Scalar> maxpool2d_forward(const Tensor<Scalar>& input,
                                        Index pool_r, Index pool_c) {
  detail::require(input.rank() == 3, "maxpool input must be rank 3 [C,H,W]");
  detail::require(pool_r >= 1 && pool_c >= 1, "pool window must be >= 1");
  const Index c_n = input.extent(0), h = input.extent(1), w = input.extent(2);
  detail::require(pool_r <= h && pool_c <= w,
                  "pool window " + std::to_string(pool_r) + "x" +
                      std::to_string(pool_c) + " larger than input " +
                      std::to_string(h) + "x" + std::to_string(w));
  const Index oh = h / pool_r, ow = w / pool_c;
  MaxPoolResult<Scalar> r;
  r.output = Tensor<Scalar>({c_n, oh, ow});
  r.argmax.assign(static_cast<std::size_t>(c_n * oh * ow), 0);
  const Scalar* in = input.data();
  Scalar* out = r.output.data();
  Index cell = 0;
  for (Index c = 0; c < c_n; ++c) {
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j, ++cell) {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        Index best_idx = 0;
        for (Index di = 0; di < pool_r; ++di) {
          const Index row = i * pool_r + di;
          const Index base = (c * h + row) * w + j * pool_c;
          for (Index dj = 0; dj < pool_c; ++dj) {
            const Scalar v = in[base + dj];
            if (v > best) {
              best = v;
              best_idx = base + dj;
            }
          }
        }
        out[cell] = best;
        r.argmax[static_cast<std::size_t>(cell)] = best_idx;
      }
    }
  }
  return r;
}

/// Routes each output gradient to its recorded argmax position; gradient
/// mass through the layer is conserved.
template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const std::vector<Index>& argmax,
                                  const Tensor<Scalar>& grad_out,
                                  const Shape& input_shape) {
  detail::require(argmax.size() == static_cast<std::size_t>(grad_out.size()),
                  "pool argmax/grad extent mismatch");
  Tensor<Scalar> gx(input_shape);
  for (std::size_t k = 0; k < argmax.size(); ++k)
    gx[argmax[k]] += grad_out[static_cast<Index>(k)];
  return gx;
}

// --- dense ----------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& input,
                             const Tensor<Scalar>& weights,
                             const Tensor<Scalar>& bias) {
  detail::require(weights.rank() == 2, "dense weights must be rank 2 [m,n]");
  const Index m = weights.extent(0), n = weights.extent(1);
  detail::require(input.size() == n,
                  "dense input length " + std::to_string(input.size()) +
                      " does not match weight columns " + std::to_string(n));
  detail::require(bias.size() == m, "dense bias length mismatch");
  Tensor<Scalar> out({m});
  out.as_vector().noalias() =
      weights.as_matrix(m, n) * input.as_vector() + bias.as_vector();
  return out;
}

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& input,
                                  const Tensor<Scalar>& weights,
                                  const Tensor<Scalar>& grad_out) {
  const Index m = weights.extent(0), n = weights.extent(1);
  detail::require(grad_out.size() == m, "dense grad_out length mismatch");
  DenseGrads<Scalar> g;
  g.bias = grad_out;
  g.weights = Tensor<Scalar>({m, n});
  g.weights.as_matrix(m, n).noalias() =
      grad_out.as_vector() * input.as_vector().transpose();
  g.input = Tensor<Scalar>(input.shape());
  g.input.as_vector().noalias() =
      weights.as_matrix(m, n).transpose() * grad_out.as_vector();
  return g;
}

template <typename Scalar>
Tensor<Scalar> dense_backward_input(const Tensor<Scalar>& weights,
                                    const Tensor<Scalar>& grad_out,
                                    const Shape& input_shape) {
  const Index m = weights.extent(0), n = weights.extent(1);
  detail::require(grad_out.size() == m, "dense grad_out length mismatch");
  Tensor<Scalar> gx(input_shape);
  gx.as_vector().noalias() =
      weights.as_matrix(m, n).transpose() * grad_out.as_vector();
  return gx;
}

// --- activations ----------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.array().max(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& pre_activation,
                             const Tensor<Scalar>& grad_out) {
  return Tensor<Scalar>(
      grad_out.shape(),
      grad_out.array() *
          (pre_activation.array() > Scalar(0)).template cast<Scalar>());
}

template <typename Scalar>
Tensor<Scalar> sigmoid_forward(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar v = x[i];
    if (v >= 0) {
      y[i] = Scalar(1) / (Scalar(1) + std::exp(-v));
    } else {
      const Scalar e = std::exp(v);
      y[i] = e / (Scalar(1) + e);
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& output,
                                const Tensor<Scalar>& grad_out) {
  return Tensor<Scalar>(grad_out.shape(),
                        grad_out.array() * output.array() *
                            (Scalar(1) - output.array()));
}

// --- dropout ----------------------------------------------------------------

/// Inverted dropout: kept units are scaled by 1/(1-p) at train time so the
/// inference path applies no rescale. The multiplier mask is returned for
/// the backward pass.
template <typename Scalar>
Tensor<Scalar> dropout_forward(const Tensor<Scalar>& x, Scalar p, Rng& rng,
                               Tensor<Scalar>& mask_out) {
  detail::require(p >= Scalar(0) && p < Scalar(1),
                  "dropout probability must be in [0,1)");
  mask_out = Tensor<Scalar>(x.shape());
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - p);
  for (Index i = 0; i < x.size(); ++i)
    mask_out[i] = rng.uniform() < p ? Scalar(0) : keep_scale;
  return Tensor<Scalar>(x.shape(), x.array() * mask_out.array());
}

template <typename Scalar>
Tensor<Scalar> dropout_backward(const Tensor<Scalar>& mask,
                                const Tensor<Scalar>& grad_out) {
  return Tensor<Scalar>(grad_out.shape(), grad_out.array() * mask.array());
}

// --- per-map amplitude normalization ---------------------------------------

template <typename Scalar>
struct AmplitudeNormState {
  std::vector<Scalar> scales;   // per feature map
  std::vector<Index> argmax;    // flat index of the scaling element, -1 if none
};

/// Divides each feature map by its max absolute activation. Maps whose
/// peak is below 1e-12 pass through unscaled.
template <typename Scalar>
Tensor<Scalar> amplitude_norm_forward(const Tensor<Scalar>& x,
                                      AmplitudeNormState<Scalar>& state) {
  detail::require(x.rank() == 3, "amplitude norm input must be rank 3");
  const Index c_n = x.extent(0), plane = x.extent(1) * x.extent(2);
  state.scales.assign(static_cast<std::size_t>(c_n), Scalar(1));
  state.argmax.assign(static_cast<std::size_t>(c_n), -1);
  Tensor<Scalar> y(x.shape());
  for (Index c = 0; c < c_n; ++c) {
    const Index base = c * plane;
    Scalar best = Scalar(0);
    Index best_idx = -1;
    for (Index k = 0; k < plane; ++k) {
      const Scalar a = std::abs(x[base + k]);
      if (a > best) {
        best = a;
        best_idx = base + k;
      }
    }
    if (best < Scalar(1e-12)) {
      for (Index k = 0; k < plane; ++k) y[base + k] = x[base + k];
      continue;
    }
    state.scales[static_cast<std::size_t>(c)] = best;
    state.argmax[static_cast<std::size_t>(c)] = best_idx;
    for (Index k = 0; k < plane; ++k) y[base + k] = x[base + k] / best;
  }
  return y;
}

/// Exact gradient of x / max|x|, including the quotient term that flows
/// through the scaling element.
template <typename Scalar>
Tensor<Scalar> amplitude_norm_backward(const Tensor<Scalar>& input,
                                       const AmplitudeNormState<Scalar>& state,
                                       const Tensor<Scalar>& grad_out) {
  const Index c_n = input.extent(0),
              plane = input.extent(1) * input.extent(2);
  Tensor<Scalar> gx(input.shape());
  for (Index c = 0; c < c_n; ++c) {
    const Index base = c * plane;
    const Scalar s = state.scales[static_cast<std::size_t>(c)];
    const Index amax = state.argmax[static_cast<std::size_t>(c)];
    if (amax < 0) {
      for (Index k = 0; k < plane; ++k) gx[base + k] = grad_out[base + k];
      continue;
    }
    Scalar gx_dot = Scalar(0);
    for (Index k = 0; k < plane; ++k) {
      gx[base + k] = grad_out[base + k] / s;
      gx_dot += grad_out[base + k] * input[base + k];
    }
    const Scalar sign = input[amax] >= Scalar(0) ? Scalar(1) : Scalar(-1);
    gx[amax] -= gx_dot / (s * s) * sign;
  }
  return gx;
}

// --- softmax / cross entropy ------------------------------------------------

template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  const Scalar m = logits.array().maxCoeff();
  Tensor<Scalar> probs(logits.shape(), (logits.array() - m).exp());
  probs.array() /= probs.array().sum();
  return probs;
}

template <typename Scalar>
struct SoftmaxCrossEntropy {
  Scalar loss;
  Tensor<Scalar> probs;
  Tensor<Scalar> grad_logits;
};

template <typename Scalar>
SoftmaxCrossEntropy<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits,
                                                  Index label) {
  detail::require(logits.size() >= 2, "softmax needs at least two classes");
  detail::require(label >= 0 && label < logits.size(),
                  "label " + std::to_string(label) + " out of range for " +
                      std::to_string(logits.size()) + " classes");
  const Scalar m = logits.array().maxCoeff();
  Eigen::Array<Scalar, Eigen::Dynamic, 1> shifted = logits.array() - m;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> e = shifted.exp();
  const Scalar z = e.sum();
  SoftmaxCrossEntropy<Scalar> r;
  r.probs = Tensor<Scalar>(logits.shape(), e / z);
  r.loss = std::log(z) - shifted[label];
  r.grad_logits = r.probs;
  r.grad_logits[label] -= Scalar(1);
  return r;
}

}  // namespace eegroar

#endif  // EEGROAR_LAYERS_HPP
