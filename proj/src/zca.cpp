#include "eegroar/zca.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace eegroar {

WhiteningTransform fit_zca_observations(const ColMatrix<Real>& observations,
                                        Real epsilon, WhitenScope scope) {
  if (observations.rows() < 2)
    throw std::invalid_argument("fit_zca needs at least 2 observations");
  if (epsilon < 0) throw std::invalid_argument("epsilon_zca must be >= 0");

  ColMatrix<Real> centered = observations;
  centered.rowwise() -= observations.colwise().mean();
  ColMatrix<Real> cov =
      centered.transpose() * centered /
      static_cast<Real>(observations.rows() - 1);

  if (cov.cwiseAbs().maxCoeff() <= 0)
    throw std::invalid_argument(
        "fit_zca: zero covariance (all observations identical)");

  Eigen::SelfAdjointEigenSolver<ColMatrix<Real>> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("fit_zca: eigendecomposition failed");

  WhiteningTransform t;
  t.eigenvectors = solver.eigenvectors();
  t.eigenvalues = solver.eigenvalues().cwiseMax(0.0);
  t.epsilon = epsilon;
  t.scope = scope;
  return t;
}

WhiteningTransform fit_zca(const TrialSet& trials, Real epsilon,
                           WhitenScope scope, Index dim_cap) {
  if (trials.trials.size() < 2)
    throw std::invalid_argument("fit_zca needs at least 2 trials");
  trials.validate();
  const Index ch = trials.channels(), sm = trials.samples();

  if (scope == WhitenScope::kJoint) {
    const Index d = ch * sm;
    if (d > dim_cap)
      throw std::invalid_argument(
          "fit_zca: joint dimension " + std::to_string(d) +
          " exceeds the cap " + std::to_string(dim_cap) +
          "; use per-channel whitening");
    ColMatrix<Real> obs(static_cast<Index>(trials.trials.size()), d);
    for (std::size_t i = 0; i < trials.trials.size(); ++i)
      obs.row(static_cast<Index>(i)) = trials.trials[i].data.as_vector();
    return fit_zca_observations(obs, epsilon, scope);
  }

  ColMatrix<Real> obs(static_cast<Index>(trials.trials.size()) * ch, sm);
  Index row = 0;
  for (const EegTrial& t : trials.trials)
    for (Index c = 0; c < ch; ++c)
      obs.row(row++) = t.data.as_matrix(ch, sm).row(c);
  return fit_zca_observations(obs, epsilon, scope);
}

ColMatrix<Real> zca_matrix(const WhiteningTransform& t) {
  Vector<Real> inv_sqrt(t.eigenvalues.size());
  for (Index i = 0; i < t.eigenvalues.size(); ++i) {
    const Real denom = t.eigenvalues[i] + t.epsilon;
    inv_sqrt[i] = denom > 1e-300 ? Real(1) / std::sqrt(denom) : Real(0);
  }
  return t.eigenvectors * inv_sqrt.asDiagonal() * t.eigenvectors.transpose();
}

Tensord apply_zca(const WhiteningTransform& t, const Tensord& trial_data) {
  const ColMatrix<Real> w = zca_matrix(t);
  if (t.scope == WhitenScope::kJoint) {
    if (trial_data.size() != t.dim())
      throw std::invalid_argument(
          "apply_zca: trial extent " + std::to_string(trial_data.size()) +
          " does not match transform dimension " + std::to_string(t.dim()));
    Tensord out(trial_data.shape());
    out.as_vector().noalias() = w * trial_data.as_vector();
    return out;
  }
  if (trial_data.rank() != 2 || trial_data.extent(1) != t.dim())
    throw std::invalid_argument(
        "apply_zca: per-channel transform of dimension " +
        std::to_string(t.dim()) + " cannot whiten trial with shape " +
        shape_to_string(trial_data.shape()));
  Tensord out(trial_data.shape());
  const Index ch = trial_data.extent(0), sm = trial_data.extent(1);
  out.as_matrix(ch, sm).noalias() =
      trial_data.as_matrix(ch, sm) * w.transpose();
  return out;
}

std::vector<Tensord> whiten_all(const WhiteningTransform& transform,
                                const TrialSet& set) {
  std::vector<Tensord> out;
  out.reserve(set.trials.size());
  for (const EegTrial& t : set.trials)
    out.push_back(apply_zca(transform, t.data));
  return out;
}

}  // namespace eegroar
