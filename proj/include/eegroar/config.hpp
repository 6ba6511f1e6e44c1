#ifndef EEGROAR_CONFIG_HPP
#define EEGROAR_CONFIG_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegroar/data.hpp"
#include "eegroar/model.hpp"
#include "eegroar/roar.hpp"
#include "eegroar/zca.hpp"

namespace eegroar {

/// Invalid keys or values in run configuration; mapped to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every knob of every command, resolved. Files use flat `section.key = value`
/// lines; command-line overrides use the same keys and win over the file.
struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 1;

  SynthConfig synth;

  std::string arch_preset = "desk";  // desk | paper | custom
  ArchitectureConfig arch = ArchitectureConfig::desk_scale();

  TrainConfig train = default_train();
  bool save_models = true;

  bool prep_detrend = false;
  Index prep_baseline_begin = 0;
  Index prep_baseline_end = 16;
  bool prep_zca = false;
  Real prep_zca_epsilon = 0.01;
  WhitenScope prep_zca_scope = WhitenScope::kPerChannel;

  std::vector<std::string> methods = {"smoothgrad", "smoothgrad_sq", "lrp_b",
                                      "patternnet", "patternattr"};
  SmoothGradConfig smoothgrad;
  LrpConfig lrp;
  std::vector<std::pair<double, double>> windows_ms = default_windows_ms();

  std::vector<Real> roar_r_values = {0, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9, 1};
  std::vector<std::string> roar_baselines = {"uniform", "random_slices",
                                             "method_slices", "ground_truth"};
  Index roar_slice_len = 47;
  FillPolicy roar_fill = FillPolicy::kZero;
  MaskMode roar_mask_mode = MaskMode::kRank;

  static TrainConfig default_train() {
    TrainConfig t;
    t.lr = 1e-5;
    t.decay = 1e-6;
    t.batch_size = 4;
    t.max_iterations = 500;
    return t;
  }

  RoarConfig roar_config() const;
};

/// Parses `key = value` lines ('#' comments, blank lines ignored).
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Applies entries onto cfg; throws ConfigError naming any unknown key or
/// unparsable value.
void apply_config(RunConfig& cfg,
                  const std::map<std::string, std::string>& entries);

/// One `key=value` string, as given on the command line.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Fully resolved key-value view, alphabetical, suitable for reruns.
std::map<std::string, std::string> config_entries(const RunConfig& cfg);

void write_config(const RunConfig& cfg, const std::string& path);

}  // namespace eegroar

#endif  // EEGROAR_CONFIG_HPP
