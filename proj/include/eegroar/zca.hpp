#ifndef EEGROAR_ZCA_HPP
#define EEGROAR_ZCA_HPP

#include "eegroar/data.hpp"
#include "eegroar/tensor.hpp"

namespace eegroar {

/// What counts as one observation when fitting the whitening transform.
/// kPerChannel treats every channel row (over time) as an observation and
/// shares one transform across channels; kJoint flattens whole trials,
/// which is only practical under the dimension cap.
enum class WhitenScope { kPerChannel, kJoint };

struct WhiteningTransform {
  ColMatrix<Real> eigenvectors;  // orthonormal columns
  Vector<Real> eigenvalues;      // ascending, clamped at 0
  Real epsilon = 0.01;
  WhitenScope scope = WhitenScope::kPerChannel;

  Index dim() const { return eigenvectors.rows(); }
};

inline constexpr Index kJointWhitenDimCap = 4096;

/// Eigendecomposition of the mean-centered covariance of the fit
/// observations. Throws on fewer than 2 trials, a zero covariance
/// (all-identical observations), or a joint dimension above the cap.
WhiteningTransform fit_zca(const TrialSet& trials, Real epsilon,
                           WhitenScope scope = WhitenScope::kPerChannel,
                           Index dim_cap = kJointWhitenDimCap);

/// Fit from raw observations (rows). Used directly by tests and by callers
/// with bespoke observation layouts.
WhiteningTransform fit_zca_observations(const ColMatrix<Real>& observations,
                                        Real epsilon,
                                        WhitenScope scope = WhitenScope::kJoint);

/// V diag(1/sqrt(D + eps)) V^T; directions with D + eps below 1e-300 are
/// zeroed (pseudo-inverse convention).
ColMatrix<Real> zca_matrix(const WhiteningTransform& transform);

/// Whitens one trial image, preserving its shape.
Tensord apply_zca(const WhiteningTransform& transform,
                  const Tensord& trial_data);

/// Convenience: whiten every trial of a set with a transform fit on it.
std::vector<Tensord> whiten_all(const WhiteningTransform& transform,
                                const TrialSet& set);

}  // namespace eegroar

#endif  // EEGROAR_ZCA_HPP
