#ifndef EEGROAR_ATTRIBUTION_HPP
#define EEGROAR_ATTRIBUTION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "eegroar/network.hpp"
#include "eegroar/tensor.hpp"

namespace eegroar {

/// Per-trial (or averaged) attribution image over [channels, samples].
struct RelevanceMap {
  Tensord data;
  int target_class = -1;
  std::string method;
  bool normalized = false;
};

struct SmoothGradConfig {
  int samples = 25;
  Real sigma = 0.1;  // noise sd as a fraction of the trial's dynamic range
  bool squared = false;
  std::uint64_t seed = 0;
};

struct LrpConfig {
  Real epsilon = 1e-7;  // sign-preserving stabilizer for dense layers
  Real alpha = 2.0;     // positive-contribution weight for conv layers
  Real beta = 1.0;      // negative-contribution weight (alpha - beta = 1)
};

/// Signal estimators congruent with each weighted layer's kernel tensor;
/// entries for unweighted layers stay empty.
struct PatternSet {
  std::vector<Tensord> patterns;
  int zero_denominator_count = 0;
};

/// Gradient of the target logit with respect to the input (dropout off).
RelevanceMap gradient_saliency(const Network& net, const Tensord& trial,
                               int target_class);

/// Mean (squared mean when cfg.squared) of gradient maps at Gaussian
/// perturbed copies of the input. Noise sd is cfg.sigma times the trial's
/// max-min range; N=1 with sigma=0 reproduces gradient_saliency exactly.
RelevanceMap smooth_grad(const Network& net, const Tensord& trial,
                         int target_class, const SmoothGradConfig& cfg);

/// Layer-wise relevance propagation seeded with the target logit value:
/// epsilon rule on dense layers, alpha-beta rule on conv layers, argmax
/// routing through pools, pass-through for activations.
RelevanceMap lrp(const Network& net, const Tensord& trial, int target_class,
                 const LrpConfig& cfg);

/// Positive-regime signal estimators, one per weighted layer, from forward
/// statistics over the given inputs. Neurons never active get a zero
/// pattern; near-zero estimator denominators are zeroed and counted.
PatternSet estimate_patterns(const Network& net,
                             const std::vector<Tensord>& inputs);

/// Gradient-structured backward pass with the layer weights replaced by the
/// estimated patterns. Patterns equal to the weights reproduce
/// gradient_saliency bit-exactly.
RelevanceMap patternnet(const Network& net, const PatternSet& patterns,
                        const Tensord& trial, int target_class);

/// As patternnet but propagating the elementwise product weight * pattern.
RelevanceMap pattern_attribution(const Network& net, const PatternSet& patterns,
                                 const Tensord& trial, int target_class);

/// Scales into [-1, 1] by the max absolute value; all-zero maps pass
/// through. Idempotent; preserves signs and extrema locations.
RelevanceMap normalize_relevance(RelevanceMap map);

/// Arithmetic mean of congruent maps. Throws on an empty list.
RelevanceMap average_relevance(const std::vector<RelevanceMap>& maps);

struct ClassAverages {
  std::vector<RelevanceMap> per_class;  // may be empty for absent classes
  RelevanceMap overall;                 // equal-weight mean of class means
};

/// Groups maps by target class, averages within each class, then averages
/// the per-class means with equal weight.
ClassAverages average_by_class(const std::vector<RelevanceMap>& maps,
                               int class_count);

/// Channels x windows matrix of window means.
ColMatrix<Real> window_aggregate(
    const RelevanceMap& map,
    const std::vector<std::pair<Index, Index>>& windows);

/// Millisecond ranges to sample ranges [floor(b/1000*fs), floor(e/1000*fs)),
/// clamped to the trial length.
std::vector<std::pair<Index, Index>> windows_from_ms(
    const std::vector<std::pair<double, double>>& windows_ms,
    double sample_rate, Index samples);

/// The five default report windows in milliseconds.
std::vector<std::pair<double, double>> default_windows_ms();

}  // namespace eegroar

#endif  // EEGROAR_ATTRIBUTION_HPP
