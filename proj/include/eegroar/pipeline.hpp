#ifndef EEGROAR_PIPELINE_HPP
#define EEGROAR_PIPELINE_HPP

#include <string>

#include "eegroar/config.hpp"

namespace eegroar {

/// Generates a synthetic dataset directory (manifest, trial CSVs, ground
/// truth mask, resolved config).
void cmd_synth(const RunConfig& cfg, const std::string& out_dir);

/// Loads a dataset, preprocesses per config, runs leave-one-trial-out
/// cross-validation per subject, and writes metrics/confusion/fold tables
/// plus per-fold models (when train.save_models is on).
void cmd_train(const RunConfig& cfg, const std::string& dataset_dir,
               const std::string& out_dir);

/// Computes per-method relevance maps (per class and averaged), window
/// aggregates, and heatmaps. When base_dir points at a train run with
/// saved models, those folds are reused instead of retraining.
void cmd_attribute(const RunConfig& cfg, const std::string& dataset_dir,
                   const std::string& base_dir, const std::string& out_dir);

/// Full remove-and-retrain sweep: base run (or reuse of base_dir), masks,
/// retrains, accuracy curves, and the statistical comparison report.
void cmd_roar(const RunConfig& cfg, const std::string& dataset_dir,
              const std::string& base_dir, const std::string& out_dir);

/// Rebuilds the statistical comparison report from a previous roar run's
/// outputs.
void cmd_report(const RunConfig& cfg, const std::string& roar_dir,
                const std::string& out_dir);

}  // namespace eegroar

#endif  // EEGROAR_PIPELINE_HPP
