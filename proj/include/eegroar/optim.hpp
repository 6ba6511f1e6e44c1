#ifndef EEGROAR_OPTIM_HPP
#define EEGROAR_OPTIM_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "eegroar/random.hpp"
#include "eegroar/tensor.hpp"

namespace eegroar {

/// Fan extents for weight initialization. Rank-4 kernels [F,C,kh,kw] use the
/// receptive-field convention; rank-2 weights [m,n] use the layer widths.
inline std::pair<Index, Index> fan_extents(const Shape& shape) {
  switch (shape.size()) {
    case 4:
      return {shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3]};
    case 2:
      return {shape[1], shape[0]};
    case 1:
      return {shape[0], shape[0]};
    default:
      throw std::invalid_argument("no fan convention for shape " +
                                  shape_to_string(shape));
  }
}

/// Uniform on +-sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
Tensor<Scalar> glorot_init(const Shape& shape, Rng& rng) {
  const auto [fan_in, fan_out] = fan_extents(shape);
  const Scalar limit =
      std::sqrt(Scalar(6) / static_cast<Scalar>(fan_in + fan_out));
  Tensor<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
  return t;
}

/// Uniform with the requested mean and standard deviation
/// (half-width sigma * sqrt(3)).
template <typename Scalar>
Tensor<Scalar> uniform_init(const Shape& shape, Scalar mu, Scalar sigma,
                            Rng& rng) {
  const Scalar half = sigma * std::sqrt(Scalar(3));
  Tensor<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<Scalar>(rng.uniform(mu - half, mu + half));
  return t;
}

struct AdamConfig {
  Real lr = 1e-5;
  Real decay = 1e-6;  // linear learning-rate decay per step, floored at 0
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
};

/// Moment buffers for one parameter list; step count is shared.
class AdamState {
 public:
  AdamState() = default;

  AdamState(AdamConfig cfg, const std::vector<const Tensord*>& params)
      : cfg_(cfg) {
    if (cfg_.lr <= 0) throw std::invalid_argument("adam lr must be > 0");
    if (cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 < 0 || cfg_.beta2 >= 1)
      throw std::invalid_argument("adam betas must be in [0,1)");
    first_.reserve(params.size());
    second_.reserve(params.size());
    for (const Tensord* p : params) {
      first_.emplace_back(p->shape());
      second_.emplace_back(p->shape());
    }
  }

  long step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  /// Learning rate used by the upcoming step.
  Real effective_lr() const {
    const Real lr = cfg_.lr - cfg_.decay * static_cast<Real>(step_);
    return lr > 0 ? lr : 0;
  }

  friend void adam_step(const std::vector<Tensord*>& params,
                        const std::vector<Tensord>& grads, AdamState& state);

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Tensord> first_;
  std::vector<Tensord> second_;
};

/// Bias-corrected Adam update applied in place.
inline void adam_step(const std::vector<Tensord*>& params,
                      const std::vector<Tensord>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_.size())
    throw std::invalid_argument("adam parameter/gradient count mismatch");
  const Real lr = state.effective_lr();
  state.step_ += 1;
  const Real t = static_cast<Real>(state.step_);
  const Real c1 = 1.0 - std::pow(state.cfg_.beta1, t);
  const Real c2 = 1.0 - std::pow(state.cfg_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensord& p = *params[k];
    const Tensord& g = grads[k];
    if (!p.same_shape(g) || !p.same_shape(state.first_[k]))
      throw std::invalid_argument("adam moment shape mismatch");
    auto& m = state.first_[k].array();
    auto& v = state.second_[k].array();
    m = state.cfg_.beta1 * m + (1.0 - state.cfg_.beta1) * g.array();
    v = state.cfg_.beta2 * v + (1.0 - state.cfg_.beta2) * g.array().square();
    p.array() -= lr * (m / c1) / ((v / c2).sqrt() + state.cfg_.epsilon);
  }
}

}  // namespace eegroar

#endif  // EEGROAR_OPTIM_HPP
