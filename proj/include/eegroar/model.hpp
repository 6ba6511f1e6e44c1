#ifndef EEGROAR_MODEL_HPP
#define EEGROAR_MODEL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eegroar/network.hpp"
#include "eegroar/optim.hpp"
#include "eegroar/stats.hpp"

namespace eegroar {

/// One conv-pool block. Kernel and pool extents are given as
/// (time, channels); trials are laid out [1, channels, samples].
struct ConvBlockConfig {
  Index kernel_time = 0;
  Index kernel_channels = 0;
  Index filters = 0;
  Index pool_time = 0;
  Index pool_channels = 0;
  bool normalize = true;
};

struct ArchitectureConfig {
  std::vector<ConvBlockConfig> blocks;
  Index fc_units = 1024;
  Index classes = 4;
  Real dropout_p = 0.25;

  /// Three blocks sized for 30-channel x 752-sample trials.
  static ArchitectureConfig paper_scale();
  /// Reduced blocks sized for 16-channel x 128-sample trials.
  static ArchitectureConfig desk_scale();
};

/// Conv-pool blocks with ReLU and per-block amplitude normalization,
/// followed by a sigmoid dense layer, dropout, and the class logits.
/// Kernels are Glorot-initialized, biases uniform with mean 0, sd 0.1.
Network build_network(const ArchitectureConfig& arch, Index channels,
                      Index samples, Rng& rng);

struct EarlyStopPolicy {
  bool enabled = true;
  int patience = 25;       // iterations without improvement before stopping
  Real min_delta = 1e-4;   // required loss improvement
};

struct TrainConfig {
  Real lr = 1e-5;
  Real decay = 1e-6;  // linear learning-rate decay per iteration
  int batch_size = 4;
  int max_iterations = 500;
  EarlyStopPolicy early_stop;
  std::uint64_t seed = 0;
  Real adam_beta1 = 0.9;
  Real adam_beta2 = 0.999;
  Real adam_epsilon = 1e-8;
};

struct TrainHistory {
  std::vector<Real> loss;  // one entry per iteration run
  int iterations = 0;
  bool stopped_early = false;
};

/// Mini-batch Adam training over (input, label) pairs, in place.
/// Deterministic given cfg.seed; aborts with a diagnostic when the loss
/// turns non-finite.
TrainHistory train(Network& net, const std::vector<Tensord>& inputs,
                   const std::vector<int>& labels, const TrainConfig& cfg);

struct Prediction {
  int predicted = -1;
  Tensord probs;
};

/// Class probabilities with dropout disabled; argmax ties take the lowest
/// class index.
Prediction predict(const Network& net, const Tensord& trial);

Real training_accuracy(const Network& net, const std::vector<Tensord>& inputs,
                       const std::vector<int>& labels);

struct FoldResult {
  std::string trial_id;
  int true_label = -1;
  int predicted = -1;
  Tensord probs;
  int iterations = 0;
  bool stopped_early = false;
  bool failed = false;
  std::string error;
};

struct LotoResult {
  std::vector<FoldResult> folds;
  ConfusionMatrix confusion;
  int failed_folds = 0;

  Real accuracy() const;
};

/// Invoked after each fold trains, before its network is discarded.
/// Runs on the fold's worker thread; implementations must confine writes
/// to per-fold slots.
using FoldHook =
    std::function<void(std::size_t fold, const Network& trained,
                       const FoldResult& result)>;

/// Leave-one-trial-out cross-validation: one fold per trial, each trained
/// from scratch on the remaining trials. Fold seeds are derived by hashing
/// (cfg.seed, fold index), so results do not depend on the parallel
/// schedule. A fold that throws is reported as failed and excluded from
/// the confusion matrix.
LotoResult run_loto(const std::vector<Tensord>& inputs,
                    const std::vector<int>& labels,
                    const std::vector<std::string>& trial_ids, Index classes,
                    const ArchitectureConfig& arch, const TrainConfig& cfg,
                    int jobs = 1, const FoldHook& hook = nullptr);

}  // namespace eegroar

#endif  // EEGROAR_MODEL_HPP
