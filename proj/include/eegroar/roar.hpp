#ifndef EEGROAR_ROAR_HPP
#define EEGROAR_ROAR_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eegroar/attribution.hpp"
#include "eegroar/data.hpp"
#include "eegroar/model.hpp"

namespace eegroar {

/// Feature-admission mask: 1 keeps a pixel, 0 removes it.
struct BinaryMask {
  Tensord data;  // [channels, samples], values in {0,1}
  Real removal_rate = 0;
  std::string source;

  bool all_ones() const { return (data.array() == 1.0).all(); }
};

enum class MaskMode {
  kRank,            // remove the top-r fraction by relevance rank
  kValueThreshold,  // literal variant: admit values <= r
};

enum class FillPolicy { kZero, kChannelMean };

/// Removes the round(r * pixels) highest-relevance pixels; ties break on
/// row-major index, so masks nest as r grows.
BinaryMask make_mask(const RelevanceMap& avg_relevance, Real r,
                     MaskMode mode = MaskMode::kRank);

/// Admitted pixels pass through; removed pixels are zeroed or replaced by
/// their channel's mean over the original trial.
Tensord apply_mask(const Tensord& trial, const BinaryMask& mask,
                   FillPolicy fill = FillPolicy::kZero);

/// Exactly round(r * pixels) zeros at uniformly drawn positions.
BinaryMask uniform_random_mask(Index channels, Index samples, Real r,
                               Rng& rng);

enum class SliceOrder { kRandom, kMethodSorted };

/// Tiles each channel into slice_len-sample slices (last slice may be
/// shorter), ranks them randomly or by mean relevance descending, and
/// removes the top-r fraction of slices whole.
BinaryMask slice_mask(Index channels, Index samples, Index slice_len,
                      SliceOrder order, const RelevanceMap* relevance, Real r,
                      Rng* rng);

struct RoarCurvePoint {
  Real r = 0;
  Real mean_accuracy = 0;
  Real std_accuracy = 0;
  std::vector<Real> per_subject;
  bool partial = false;  // some fold failed during a retrain
};

struct RoarCurve {
  std::string tag;
  std::vector<RoarCurvePoint> points;  // sorted by r ascending
};

struct RoarConfig {
  std::vector<Real> r_values = {0, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9, 1};
  std::vector<std::string> methods = {"smoothgrad", "smoothgrad_sq", "lrp_b",
                                      "patternnet", "patternattr"};
  bool baseline_uniform = true;
  bool baseline_random_slices = true;
  bool baseline_method_slices = true;
  bool baseline_ground_truth = true;  // used when the set carries a mask
  Index slice_len = 47;
  FillPolicy fill = FillPolicy::kZero;
  MaskMode mask_mode = MaskMode::kRank;
  SmoothGradConfig smoothgrad;
  LrpConfig lrp;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Names every curve run_roar would produce for this configuration, in
/// output order.
std::vector<std::string> roar_curve_tags(const RoarConfig& cfg,
                                         bool have_ground_truth);

/// Per-fold relevance of one trial for one method tag. `patterns` may be
/// null for gradient-family methods.
RelevanceMap attribute_trial(const Network& net, const Tensord& input,
                             int target_class, const std::string& method,
                             const SmoothGradConfig& smoothgrad_cfg,
                             const LrpConfig& lrp_cfg,
                             const PatternSet* patterns);

bool method_needs_patterns(const std::string& method);

/// Loads or returns a fold's trained network; called from worker threads.
using FoldNetSource = std::function<Network(std::size_t fold)>;

/// Base cross-validation results plus the relevance of each held-out trial
/// under every requested method (normalized per fold).
struct AttributionRun {
  std::string subject_id;
  LotoResult base;
  std::vector<std::vector<RelevanceMap>> fold_maps;  // [method][fold]
};

/// Trains a fresh leave-one-out base for one subject and attributes every
/// held-out trial. Smooth-Grad fold seeds derive from (cfg.seed, fold,
/// method), so results are schedule-independent.
AttributionRun attribute_subject(const std::vector<Tensord>& inputs,
                                 const std::vector<int>& labels,
                                 const std::vector<std::string>& trial_ids,
                                 Index classes, const ArchitectureConfig& arch,
                                 const TrainConfig& cfg,
                                 const std::vector<std::string>& methods,
                                 const SmoothGradConfig& smoothgrad_cfg,
                                 const LrpConfig& lrp_cfg, int jobs);

/// Same, but over an existing base run whose fold networks come from
/// `nets` (e.g. deserialized models). Skips retraining.
AttributionRun attribute_subject_with(
    const FoldNetSource& nets, LotoResult base,
    const std::vector<Tensord>& inputs, const std::vector<int>& labels,
    Index classes, const TrainConfig& cfg,
    const std::vector<std::string>& methods,
    const SmoothGradConfig& smoothgrad_cfg, const LrpConfig& lrp_cfg,
    int jobs);

/// One subject's inputs to the masked-retrain stage.
struct SubjectAttribution {
  std::string subject_id;
  LotoResult base;
  // per method tag: across-class averaged relevance, normalized
  std::vector<std::pair<std::string, RelevanceMap>> relevance;
};

/// Collapses per-fold maps into the emotion-averaged relevance per method.
SubjectAttribution summarize_attribution(const AttributionRun& run,
                                         const std::vector<std::string>& methods,
                                         int class_count);

struct MaskGrid {
  std::string tag;
  std::vector<BinaryMask> by_r;  // aligned with RoarConfig::r_values
};

struct SubjectRoar {
  SubjectAttribution attribution;
  std::vector<MaskGrid> masks;
};

struct RoarOutcome {
  std::vector<RoarCurve> curves;
  std::vector<SubjectRoar> subjects;
};

/// Masked-retrain stage: builds one mask per (curve, r) from the supplied
/// base attributions, retrains over the masked trials, and aggregates
/// accuracy curves. Identity masks reuse the base accuracy, so r = 0
/// reproduces it exactly. Retrain fold seeds equal the base run's.
RoarOutcome run_roar_from_base(const TrialSet& set,
                               const ArchitectureConfig& arch,
                               const TrainConfig& train_cfg,
                               const RoarConfig& cfg,
                               std::vector<SubjectAttribution> bases);

/// Full sweep: per subject, a base run with attributions followed by the
/// masked-retrain stage. Deterministic under cfg.seed for any jobs value.
RoarOutcome run_roar(const TrialSet& set, const ArchitectureConfig& arch,
                     const TrainConfig& train_cfg, const RoarConfig& cfg);

/// Per-subject training seed used by both stages.
std::uint64_t subject_train_seed(std::uint64_t master_seed,
                                 const std::string& subject_id);

}  // namespace eegroar

#endif  // EEGROAR_ROAR_HPP
