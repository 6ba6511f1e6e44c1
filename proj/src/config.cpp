#include "eegroar/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "eegroar/export.hpp"

namespace eegroar {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, sep)) out.push_back(trim(tok));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& hint) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value +
                    "' (" + hint + ")");
}

long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    bad_value(key, value, "expected an integer");
  }
}

double to_real(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') bad_value(key, value, "expected a number");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  bad_value(key, value, "expected 0/1");
}

std::vector<Real> to_real_list(const std::string& key,
                               const std::string& value) {
  std::vector<Real> out;
  for (const std::string& tok : split(value, ','))
    out.push_back(to_real(key, tok));
  return out;
}

/// "16x4,8x2" -> {(16,4),(8,2)}
std::vector<std::pair<Index, Index>> to_pair_list(const std::string& key,
                                                  const std::string& value) {
  std::vector<std::pair<Index, Index>> out;
  for (const std::string& tok : split(value, ',')) {
    const auto x = tok.find('x');
    if (x == std::string::npos) bad_value(key, value, "expected AxB pairs");
    out.emplace_back(to_int(key, tok.substr(0, x)),
                     to_int(key, tok.substr(x + 1)));
  }
  return out;
}

/// "0:500,250:750" -> {(0,500),(250,750)}
std::vector<std::pair<double, double>> to_range_list(const std::string& key,
                                                     const std::string& value) {
  std::vector<std::pair<double, double>> out;
  for (const std::string& tok : split(value, ',')) {
    const auto c = tok.find(':');
    if (c == std::string::npos) bad_value(key, value, "expected B:E ranges");
    out.emplace_back(to_real(key, tok.substr(0, c)),
                     to_real(key, tok.substr(c + 1)));
  }
  return out;
}

const std::vector<std::string> kKnownMethods = {
    "saliency", "smoothgrad", "smoothgrad_sq", "lrp_b", "patternnet",
    "patternattr"};

void resize_blocks(ArchitectureConfig& arch, std::size_t n) {
  if (arch.blocks.size() < n) arch.blocks.resize(n);
}

}  // namespace

RoarConfig RunConfig::roar_config() const {
  RoarConfig rc;
  rc.r_values = roar_r_values;
  rc.methods = methods;
  rc.baseline_uniform = false;
  rc.baseline_random_slices = false;
  rc.baseline_method_slices = false;
  rc.baseline_ground_truth = false;
  for (const std::string& b : roar_baselines) {
    if (b == "uniform")
      rc.baseline_uniform = true;
    else if (b == "random_slices")
      rc.baseline_random_slices = true;
    else if (b == "method_slices")
      rc.baseline_method_slices = true;
    else if (b == "ground_truth")
      rc.baseline_ground_truth = true;
    else
      throw ConfigError("config key 'roar.baselines': unknown baseline '" +
                        b + "'");
  }
  rc.slice_len = roar_slice_len;
  rc.fill = roar_fill;
  rc.mask_mode = roar_mask_mode;
  rc.smoothgrad = smoothgrad;
  rc.lrp = lrp;
  rc.seed = seed;
  rc.jobs = jobs;
  return rc;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    entries[key] = value;
  }
  return entries;
}

namespace {

void apply_one(RunConfig& cfg, const std::string& key,
               const std::string& value) {
  // global
  if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "jobs") {
    cfg.jobs = static_cast<int>(to_int(key, value));
    if (cfg.jobs < 1) bad_value(key, value, "jobs must be >= 1");

    // synth
  } else if (key == "synth.channels") {
    cfg.synth.channels = to_int(key, value);
  } else if (key == "synth.samples") {
    cfg.synth.samples = to_int(key, value);
  } else if (key == "synth.classes") {
    cfg.synth.classes = static_cast<int>(to_int(key, value));
  } else if (key == "synth.trials_per_class") {
    cfg.synth.trials_per_class = static_cast<int>(to_int(key, value));
  } else if (key == "synth.subjects") {
    cfg.synth.subjects = static_cast<int>(to_int(key, value));
  } else if (key == "synth.snr") {
    cfg.synth.snr = to_real(key, value);
  } else if (key == "synth.amplitude_jitter") {
    cfg.synth.amplitude_jitter = to_real(key, value);
  } else if (key == "synth.sample_rate") {
    cfg.synth.sample_rate = to_real(key, value);

    // architecture
  } else if (key == "arch.preset") {
    if (value == "desk") {
      cfg.arch = ArchitectureConfig::desk_scale();
    } else if (value == "paper") {
      cfg.arch = ArchitectureConfig::paper_scale();
    } else {
      bad_value(key, value, "expected desk or paper");
    }
    cfg.arch_preset = value;
  } else if (key == "arch.kernels") {
    const auto pairs = to_pair_list(key, value);
    resize_blocks(cfg.arch, pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      cfg.arch.blocks[i].kernel_time = pairs[i].first;
      cfg.arch.blocks[i].kernel_channels = pairs[i].second;
    }
    cfg.arch_preset = "custom";
  } else if (key == "arch.pools") {
    const auto pairs = to_pair_list(key, value);
    resize_blocks(cfg.arch, pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      cfg.arch.blocks[i].pool_time = pairs[i].first;
      cfg.arch.blocks[i].pool_channels = pairs[i].second;
    }
    cfg.arch_preset = "custom";
  } else if (key == "arch.filters") {
    const auto list = split(value, ',');
    resize_blocks(cfg.arch, list.size());
    for (std::size_t i = 0; i < list.size(); ++i)
      cfg.arch.blocks[i].filters = to_int(key, list[i]);
    cfg.arch_preset = "custom";
  } else if (key == "arch.normalize") {
    const auto list = split(value, ',');
    resize_blocks(cfg.arch, list.size());
    for (std::size_t i = 0; i < list.size(); ++i)
      cfg.arch.blocks[i].normalize = to_bool(key, list[i]);
    cfg.arch_preset = "custom";
  } else if (key == "arch.fc_units") {
    cfg.arch.fc_units = to_int(key, value);
  } else if (key == "arch.classes") {
    cfg.arch.classes = to_int(key, value);
  } else if (key == "arch.dropout") {
    cfg.arch.dropout_p = to_real(key, value);

    // training
  } else if (key == "train.lr") {
    cfg.train.lr = to_real(key, value);
  } else if (key == "train.decay") {
    cfg.train.decay = to_real(key, value);
  } else if (key == "train.batch_size") {
    cfg.train.batch_size = static_cast<int>(to_int(key, value));
  } else if (key == "train.max_iterations") {
    cfg.train.max_iterations = static_cast<int>(to_int(key, value));
  } else if (key == "train.early_stop") {
    cfg.train.early_stop.enabled = to_bool(key, value);
  } else if (key == "train.patience") {
    cfg.train.early_stop.patience = static_cast<int>(to_int(key, value));
  } else if (key == "train.min_delta") {
    cfg.train.early_stop.min_delta = to_real(key, value);
  } else if (key == "train.save_models") {
    cfg.save_models = to_bool(key, value);

    // preprocessing
  } else if (key == "prep.detrend") {
    cfg.prep_detrend = to_bool(key, value);
  } else if (key == "prep.baseline") {
    const auto c = value.find(':');
    if (c == std::string::npos) bad_value(key, value, "expected B:E");
    cfg.prep_baseline_begin = to_int(key, value.substr(0, c));
    cfg.prep_baseline_end = to_int(key, value.substr(c + 1));
  } else if (key == "prep.zca") {
    cfg.prep_zca = to_bool(key, value);
  } else if (key == "prep.zca_epsilon") {
    cfg.prep_zca_epsilon = to_real(key, value);
  } else if (key == "prep.zca_scope") {
    if (value == "per_channel")
      cfg.prep_zca_scope = WhitenScope::kPerChannel;
    else if (value == "joint")
      cfg.prep_zca_scope = WhitenScope::kJoint;
    else
      bad_value(key, value, "expected per_channel or joint");

    // attribution
  } else if (key == "attr.methods") {
    cfg.methods = split(value, ',');
    for (const std::string& m : cfg.methods)
      if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) ==
          kKnownMethods.end())
        throw ConfigError("config key 'attr.methods': unknown method '" + m +
                          "'");
  } else if (key == "attr.sg_samples") {
    cfg.smoothgrad.samples = static_cast<int>(to_int(key, value));
  } else if (key == "attr.sg_sigma") {
    cfg.smoothgrad.sigma = to_real(key, value);
  } else if (key == "attr.lrp_epsilon") {
    cfg.lrp.epsilon = to_real(key, value);
  } else if (key == "attr.lrp_alpha") {
    cfg.lrp.alpha = to_real(key, value);
    cfg.lrp.beta = cfg.lrp.alpha - 1;
  } else if (key == "attr.windows_ms") {
    cfg.windows_ms = to_range_list(key, value);

    // roar
  } else if (key == "roar.r_values") {
    cfg.roar_r_values = to_real_list(key, value);
  } else if (key == "roar.baselines") {
    cfg.roar_baselines = value.empty() ? std::vector<std::string>{}
                                       : split(value, ',');
  } else if (key == "roar.slice_len") {
    cfg.roar_slice_len = to_int(key, value);
  } else if (key == "roar.fill") {
    if (value == "zero")
      cfg.roar_fill = FillPolicy::kZero;
    else if (value == "channel_mean")
      cfg.roar_fill = FillPolicy::kChannelMean;
    else
      bad_value(key, value, "expected zero or channel_mean");
  } else if (key == "roar.mask_mode") {
    if (value == "rank")
      cfg.roar_mask_mode = MaskMode::kRank;
    else if (value == "threshold")
      cfg.roar_mask_mode = MaskMode::kValueThreshold;
    else
      bad_value(key, value, "expected rank or threshold");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string bool_str(bool b) { return b ? "1" : "0"; }

}  // namespace

void apply_config(RunConfig& cfg,
                  const std::map<std::string, std::string>& entries) {
  // arch.preset must land before per-field arch overrides
  if (auto it = entries.find("arch.preset"); it != entries.end())
    apply_one(cfg, it->first, it->second);
  for (const auto& [key, value] : entries) {
    if (key == "arch.preset") continue;
    apply_one(cfg, key, value);
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' is not key=value");
  std::string key = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);
  // trim
  while (!key.empty() && key.back() == ' ') key.pop_back();
  while (!value.empty() && value.front() == ' ') value.erase(value.begin());
  apply_one(cfg, key, value);
}

std::map<std::string, std::string> config_entries(const RunConfig& cfg) {
  std::map<std::string, std::string> e;
  e["seed"] = std::to_string(cfg.seed);
  e["jobs"] = std::to_string(cfg.jobs);

  e["synth.channels"] = std::to_string(cfg.synth.channels);
  e["synth.samples"] = std::to_string(cfg.synth.samples);
  e["synth.classes"] = std::to_string(cfg.synth.classes);
  e["synth.trials_per_class"] = std::to_string(cfg.synth.trials_per_class);
  e["synth.subjects"] = std::to_string(cfg.synth.subjects);
  e["synth.snr"] = format_real(cfg.synth.snr);
  e["synth.amplitude_jitter"] = format_real(cfg.synth.amplitude_jitter);
  e["synth.sample_rate"] = format_real(cfg.synth.sample_rate);

  {
    std::string kernels, pools, filters, normalize;
    for (std::size_t i = 0; i < cfg.arch.blocks.size(); ++i) {
      const ConvBlockConfig& b = cfg.arch.blocks[i];
      const std::string sep = i ? "," : "";
      kernels += sep + std::to_string(b.kernel_time) + "x" +
                 std::to_string(b.kernel_channels);
      pools += sep + std::to_string(b.pool_time) + "x" +
               std::to_string(b.pool_channels);
      filters += sep + std::to_string(b.filters);
      normalize += sep + bool_str(b.normalize);
    }
    e["arch.kernels"] = kernels;
    e["arch.pools"] = pools;
    e["arch.filters"] = filters;
    e["arch.normalize"] = normalize;
  }
  e["arch.fc_units"] = std::to_string(cfg.arch.fc_units);
  e["arch.classes"] = std::to_string(cfg.arch.classes);
  e["arch.dropout"] = format_real(cfg.arch.dropout_p);

  e["train.lr"] = format_real(cfg.train.lr);
  e["train.decay"] = format_real(cfg.train.decay);
  e["train.batch_size"] = std::to_string(cfg.train.batch_size);
  e["train.max_iterations"] = std::to_string(cfg.train.max_iterations);
  e["train.early_stop"] = bool_str(cfg.train.early_stop.enabled);
  e["train.patience"] = std::to_string(cfg.train.early_stop.patience);
  e["train.min_delta"] = format_real(cfg.train.early_stop.min_delta);
  e["train.save_models"] = bool_str(cfg.save_models);

  e["prep.detrend"] = bool_str(cfg.prep_detrend);
  e["prep.baseline"] = std::to_string(cfg.prep_baseline_begin) + ":" +
                       std::to_string(cfg.prep_baseline_end);
  e["prep.zca"] = bool_str(cfg.prep_zca);
  e["prep.zca_epsilon"] = format_real(cfg.prep_zca_epsilon);
  e["prep.zca_scope"] =
      cfg.prep_zca_scope == WhitenScope::kPerChannel ? "per_channel" : "joint";

  {
    std::string methods;
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
      methods += (i ? "," : "") + cfg.methods[i];
    e["attr.methods"] = methods;
  }
  e["attr.sg_samples"] = std::to_string(cfg.smoothgrad.samples);
  e["attr.sg_sigma"] = format_real(cfg.smoothgrad.sigma);
  e["attr.lrp_epsilon"] = format_real(cfg.lrp.epsilon);
  e["attr.lrp_alpha"] = format_real(cfg.lrp.alpha);
  {
    std::string w;
    for (std::size_t i = 0; i < cfg.windows_ms.size(); ++i)
      w += (i ? "," : "") + format_real(cfg.windows_ms[i].first) + ":" +
           format_real(cfg.windows_ms[i].second);
    e["attr.windows_ms"] = w;
  }

  {
    std::string rv;
    for (std::size_t i = 0; i < cfg.roar_r_values.size(); ++i)
      rv += (i ? "," : "") + format_real(cfg.roar_r_values[i]);
    e["roar.r_values"] = rv;
    std::string bl;
    for (std::size_t i = 0; i < cfg.roar_baselines.size(); ++i)
      bl += (i ? "," : "") + cfg.roar_baselines[i];
    e["roar.baselines"] = bl;
  }
  e["roar.slice_len"] = std::to_string(cfg.roar_slice_len);
  e["roar.fill"] =
      cfg.roar_fill == FillPolicy::kZero ? "zero" : "channel_mean";
  e["roar.mask_mode"] =
      cfg.roar_mask_mode == MaskMode::kRank ? "rank" : "threshold";
  return e;
}

void write_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& [key, value] : config_entries(cfg))
    os << key << " = " << value << "\n";
  if (!os) throw std::runtime_error("failed writing " + path);
}

}  // namespace eegroar
