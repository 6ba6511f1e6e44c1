#ifndef EEGROAR_DATA_HPP
#define EEGROAR_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eegroar/random.hpp"
#include "eegroar/tensor.hpp"

namespace eegroar {

/// One channels x samples trial image with its class label.
struct EegTrial {
  std::string trial_id;
  std::string subject_id;
  int label = 0;
  double sample_rate = 0;  // Hz
  Tensord data;            // [channels, samples]

  Index channels() const { return data.extent(0); }
  Index samples() const { return data.extent(1); }
};

struct TrialSet {
  std::vector<EegTrial> trials;
  int class_count = 0;
  std::vector<std::string> class_names;
  std::optional<Tensord> ground_truth_mask;  // binary [channels, samples]

  Index channels() const {
    return trials.empty() ? 0 : trials.front().channels();
  }
  Index samples() const {
    return trials.empty() ? 0 : trials.front().samples();
  }

  std::vector<std::string> subject_ids() const;
  TrialSet subject_subset(const std::string& subject_id) const;

  /// Throws when trial extents disagree or a label is out of range.
  void validate() const;
};

/// Subtracts, per channel, the least-squares line fitted over
/// baseline samples [span_begin, span_end) and extended across the whole
/// trial. A single-sample span subtracts a constant.
Tensord linear_detrend(const Tensord& trial_data, Index span_begin,
                       Index span_end);

struct SynthBurst {
  Index channel_begin = 0;  // channel group [begin, end)
  Index channel_end = 0;
  Real time_center = 0;     // fraction of the trial length in [0,1]
  Real envelope_width = 0;  // Gaussian sigma, fraction of trial length
  Real cycles = 4;          // oscillation cycles across the envelope
};

struct SynthConfig {
  Index channels = 16;
  Index samples = 128;
  int classes = 4;
  int trials_per_class = 12;
  int subjects = 1;
  Real snr = 4.0;            // burst amplitude over unit noise sd
  Real amplitude_jitter = 0.1;
  double sample_rate = 0;    // 0: derived so the trial spans 1.5 s
  std::vector<std::vector<SynthBurst>> class_bursts;  // empty: defaults

  static SynthConfig desk_scale() { return SynthConfig{}; }
};

/// Synthetic trial set: class-specific Gaussian-windowed oscillatory bursts
/// over 1/f background noise, with the planted supports recorded in
/// ground_truth_mask. Deterministic under the supplied rng.
TrialSet generate_synthetic(const SynthConfig& cfg, Rng& rng);

/// Directory layout: manifest.csv (trial_id,subject_id,label,path), one CSV
/// per trial (one row per channel, no header), and ground_truth_mask.csv
/// when the set has one. Values are written with 17 significant digits so
/// a round trip is bit-exact.
void save_trialset(const TrialSet& set, const std::string& dir);
TrialSet load_trialset(const std::string& manifest_path);

Tensord load_matrix_csv(const std::string& path);
void save_matrix_csv(const Tensord& matrix, const std::string& path);

}  // namespace eegroar

#endif  // EEGROAR_DATA_HPP
