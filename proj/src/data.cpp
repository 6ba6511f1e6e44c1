#include "eegroar/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace eegroar {

namespace fs = std::filesystem;

std::vector<std::string> TrialSet::subject_ids() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const EegTrial& t : trials)
    if (seen.insert(t.subject_id).second) ids.push_back(t.subject_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

TrialSet TrialSet::subject_subset(const std::string& subject_id) const {
  TrialSet out;
  out.class_count = class_count;
  out.class_names = class_names;
  out.ground_truth_mask = ground_truth_mask;
  for (const EegTrial& t : trials)
    if (t.subject_id == subject_id) out.trials.push_back(t);
  return out;
}

void TrialSet::validate() const {
  if (trials.empty()) return;
  const Index ch = trials.front().channels();
  const Index sm = trials.front().samples();
  for (const EegTrial& t : trials) {
    if (t.data.rank() != 2)
      throw std::invalid_argument("trial " + t.trial_id + " is not rank 2");
    if (t.channels() != ch || t.samples() != sm)
      throw std::invalid_argument(
          "trial " + t.trial_id + " extents " +
          shape_to_string(t.data.shape()) + " disagree with the set's " +
          std::to_string(ch) + "x" + std::to_string(sm));
    if (t.label < 0 || t.label >= class_count)
      throw std::invalid_argument("trial " + t.trial_id + " label " +
                                  std::to_string(t.label) +
                                  " outside class range");
  }
  if (ground_truth_mask) {
    if (ground_truth_mask->shape() != Shape{ch, sm})
      throw std::invalid_argument("ground truth mask extents mismatch");
    for (Index i = 0; i < ground_truth_mask->size(); ++i) {
      const Real v = (*ground_truth_mask)[i];
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument("ground truth mask is not binary");
    }
  }
}

Tensord linear_detrend(const Tensord& trial_data, Index span_begin,
                       Index span_end) {
  if (trial_data.rank() != 2)
    throw std::invalid_argument("linear_detrend expects [channels, samples]");
  const Index ch = trial_data.extent(0), sm = trial_data.extent(1);
  if (span_begin < 0 || span_end > sm || span_begin >= span_end)
    throw std::invalid_argument("baseline span [" +
                                std::to_string(span_begin) + "," +
                                std::to_string(span_end) +
                                ") is empty or outside the trial");
  const Index len = span_end - span_begin;
  Tensord out = trial_data;
  for (Index c = 0; c < ch; ++c) {
    Real slope = 0, intercept = 0;
    if (len == 1) {
      intercept = trial_data(c, span_begin);
    } else {
      // least-squares line over the baseline span
      Real st = 0, sx = 0, stt = 0, stx = 0;
      for (Index t = span_begin; t < span_end; ++t) {
        const Real tt = static_cast<Real>(t);
        const Real x = trial_data(c, t);
        st += tt;
        sx += x;
        stt += tt * tt;
        stx += tt * x;
      }
      const Real n = static_cast<Real>(len);
      const Real denom = n * stt - st * st;
      slope = denom != 0 ? (n * stx - st * sx) / denom : 0;
      intercept = (sx - slope * st) / n;
    }
    for (Index t = 0; t < sm; ++t)
      out(c, t) -= intercept + slope * static_cast<Real>(t);
  }
  return out;
}

namespace {

std::vector<std::vector<SynthBurst>> default_bursts(const SynthConfig& cfg) {
  std::vector<std::vector<SynthBurst>> bursts(cfg.classes);
  const Index group = std::max<Index>(1, cfg.channels / cfg.classes);
  for (int c = 0; c < cfg.classes; ++c) {
    SynthBurst b;
    b.channel_begin = std::min<Index>(c * group, cfg.channels - 1);
    b.channel_end = std::min<Index>(b.channel_begin + group, cfg.channels);
    b.time_center = static_cast<Real>(c + 1) / static_cast<Real>(cfg.classes + 1);
    b.envelope_width = 0.05;
    b.cycles = 3.0 + static_cast<Real>(c);
    bursts[c].push_back(b);
  }
  return bursts;
}

/// Class template at unit peak amplitude plus its binary support.
void render_class_template(const SynthConfig& cfg,
                           const std::vector<SynthBurst>& bursts,
                           Tensord& signal, Tensord& support) {
  signal = Tensord({cfg.channels, cfg.samples});
  support = Tensord({cfg.channels, cfg.samples});
  constexpr Real kPi = 3.14159265358979323846;
  for (const SynthBurst& b : bursts) {
    if (b.channel_begin < 0 || b.channel_end > cfg.channels ||
        b.channel_begin >= b.channel_end)
      throw std::invalid_argument("synthetic burst channel group out of range");
    const Real center = b.time_center * static_cast<Real>(cfg.samples - 1);
    const Real sigma =
        std::max<Real>(1.0, b.envelope_width * static_cast<Real>(cfg.samples));
    const Real omega = 2.0 * kPi * b.cycles / (6.0 * sigma);
    for (Index c = b.channel_begin; c < b.channel_end; ++c) {
      for (Index t = 0; t < cfg.samples; ++t) {
        const Real dt = static_cast<Real>(t) - center;
        const Real env = std::exp(-dt * dt / (2.0 * sigma * sigma));
        if (env <= 0.05) continue;
        signal(c, t) += env * std::cos(omega * dt);
        support(c, t) = 1.0;
      }
    }
  }
}

/// Background with a 1/f amplitude spectrum: random-phase cosine sum,
/// scaled to unit standard deviation.
void add_pink_noise(Tensord& data, Rng& rng) {
  constexpr Real kPi = 3.14159265358979323846;
  const Index ch = data.extent(0), sm = data.extent(1);
  const Index modes = sm / 2;
  Real var = 0;
  for (Index k = 1; k <= modes; ++k) var += 0.5 / static_cast<Real>(k);
  const Real scale = 1.0 / std::sqrt(var);
  for (Index c = 0; c < ch; ++c) {
    for (Index k = 1; k <= modes; ++k) {
      const Real amp = scale / std::sqrt(static_cast<Real>(k));
      const Real phase = rng.uniform(0.0, 2.0 * kPi);
      const Real w = 2.0 * kPi * static_cast<Real>(k) / static_cast<Real>(sm);
      for (Index t = 0; t < sm; ++t)
        data(c, t) += amp * std::cos(w * static_cast<Real>(t) + phase);
    }
  }
}

std::string two_digit(int v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", v);
  return buf;
}

}  // namespace

TrialSet generate_synthetic(const SynthConfig& cfg, Rng& rng) {
  if (cfg.channels < 1 || cfg.samples < 8)
    throw std::invalid_argument("synthetic set needs channels >= 1, samples >= 8");
  if (cfg.classes < 2 || cfg.trials_per_class < 1 || cfg.subjects < 1)
    throw std::invalid_argument("synthetic set needs >= 2 classes and >= 1 trial");

  const auto bursts =
      cfg.class_bursts.empty() ? default_bursts(cfg) : cfg.class_bursts;
  if (static_cast<int>(bursts.size()) != cfg.classes)
    throw std::invalid_argument("class_bursts must list one entry per class");

  std::vector<Tensord> templates(cfg.classes), supports(cfg.classes);
  Tensord mask({cfg.channels, cfg.samples});
  bool overlap = false;
  for (int c = 0; c < cfg.classes; ++c) {
    render_class_template(cfg, bursts[c], templates[c], supports[c]);
    for (Index i = 0; i < mask.size(); ++i) {
      if (supports[c][i] > 0) {
        if (mask[i] > 0) overlap = true;
        mask[i] = 1.0;
      }
    }
  }
  if (overlap)
    std::cerr << "warning: synthetic class loci overlap; classes share "
                 "planted features\n";

  TrialSet set;
  set.class_count = cfg.classes;
  if (cfg.classes == 4) {
    set.class_names = {"happy", "sad", "anger", "fear"};
  } else {
    for (int c = 0; c < cfg.classes; ++c)
      set.class_names.push_back("class" + std::to_string(c));
  }
  set.ground_truth_mask = mask;

  const double fs = cfg.sample_rate > 0
                        ? cfg.sample_rate
                        : static_cast<double>(cfg.samples) / 1.5;
  for (int s = 0; s < cfg.subjects; ++s) {
    const std::string subject = "s" + two_digit(s);
    for (int rep = 0; rep < cfg.trials_per_class; ++rep) {
      for (int c = 0; c < cfg.classes; ++c) {
        EegTrial trial;
        trial.subject_id = subject;
        trial.trial_id = subject + "_t" + two_digit(rep * cfg.classes + c) +
                         "_c" + std::to_string(c);
        trial.label = c;
        trial.sample_rate = fs;
        trial.data = Tensord({cfg.channels, cfg.samples});
        add_pink_noise(trial.data, rng);
        const Real amp =
            cfg.snr * (1.0 + cfg.amplitude_jitter * rng.uniform(-1.0, 1.0));
        trial.data.array() += amp * templates[c].array();
        set.trials.push_back(std::move(trial));
      }
    }
  }
  set.validate();
  return set;
}

// --- CSV serialization -------------------------------------------------------

namespace {

std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Real parse_real(const std::string& tok, const std::string& path,
                std::size_t line) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::runtime_error(path + ":" + std::to_string(line) +
                             ": cannot parse number '" + tok + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Tensord load_matrix_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trial file " + path);
  std::vector<std::vector<Real>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    std::vector<Real> row;
    row.reserve(fields.size());
    for (const std::string& f : fields)
      row.push_back(parse_real(f, path, line_no));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": ragged row (" + std::to_string(row.size()) +
                               " values, expected " +
                               std::to_string(rows.front().size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  Tensord t({static_cast<Index>(rows.size()),
             static_cast<Index>(rows.front().size())});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      t(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return t;
}

void save_matrix_csv(const Tensord& matrix, const std::string& path) {
  if (matrix.rank() != 2)
    throw std::invalid_argument("save_matrix_csv expects a rank-2 tensor");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (Index r = 0; r < matrix.extent(0); ++r) {
    for (Index c = 0; c < matrix.extent(1); ++c) {
      if (c) os << ",";
      os << format_real(matrix(r, c));
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

void save_trialset(const TrialSet& set, const std::string& dir) {
  set.validate();
  fs::create_directories(fs::path(dir) / "trials");
  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest)
    throw std::runtime_error("cannot create manifest in " + dir);
  manifest << "trial_id,subject_id,label,path\n";
  for (const EegTrial& t : set.trials) {
    const std::string rel = "trials/" + t.trial_id + ".csv";
    save_matrix_csv(t.data, (fs::path(dir) / rel).string());
    manifest << t.trial_id << "," << t.subject_id << "," << t.label << ","
             << rel << "\n";
  }
  if (set.ground_truth_mask)
    save_matrix_csv(*set.ground_truth_mask,
                    (fs::path(dir) / "ground_truth_mask.csv").string());

  std::ofstream meta(fs::path(dir) / "trialset.meta");
  meta << "classes " << set.class_count << "\n";
  meta << "class_names";
  for (const auto& n : set.class_names) meta << " " << n;
  meta << "\n";
  if (!set.trials.empty())
    meta << "sample_rate " << format_real(set.trials.front().sample_rate)
         << "\n";
}

TrialSet load_trialset(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("cannot open manifest " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  TrialSet set;
  std::string line;
  std::size_t line_no = 0;
  double sample_rate = 0;

  // optional sidecar with class metadata and sample rate
  {
    std::ifstream meta(base / "trialset.meta");
    std::string key;
    while (meta >> key) {
      if (key == "classes") {
        meta >> set.class_count;
      } else if (key == "class_names") {
        std::string rest;
        std::getline(meta, rest);
        std::istringstream rs(rest);
        std::string name;
        while (rs >> name) set.class_names.push_back(name);
      } else if (key == "sample_rate") {
        meta >> sample_rate;
      } else {
        std::string rest;
        std::getline(meta, rest);
      }
    }
  }

  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("trial_id,", 0) == 0) continue;  // header
    const auto fields = split_csv_line(line);
    if (fields.size() != 4)
      throw std::runtime_error(manifest_path + ":" + std::to_string(line_no) +
                               ": expected 4 columns, got " +
                               std::to_string(fields.size()));
    EegTrial trial;
    trial.trial_id = fields[0];
    trial.subject_id = fields[1];
    try {
      std::size_t used = 0;
      trial.label = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error(manifest_path + ":" + std::to_string(line_no) +
                               ": unknown label '" + fields[2] + "'");
    }
    if (trial.label < 0)
      throw std::runtime_error(manifest_path + ":" + std::to_string(line_no) +
                               ": unknown label '" + fields[2] + "'");
    const fs::path trial_path =
        fs::path(fields[3]).is_absolute() ? fs::path(fields[3])
                                          : base / fields[3];
    if (!fs::exists(trial_path))
      throw std::runtime_error(manifest_path + ":" + std::to_string(line_no) +
                               ": trial file not found: " +
                               trial_path.string());
    trial.data = load_matrix_csv(trial_path.string());
    trial.sample_rate = sample_rate;
    set.trials.push_back(std::move(trial));
  }

  if (set.class_count == 0) {
    int max_label = -1;
    for (const EegTrial& t : set.trials) max_label = std::max(max_label, t.label);
    set.class_count = std::max(2, max_label + 1);
  }
  if (set.class_names.empty()) {
    if (set.class_count == 4) {
      set.class_names = {"happy", "sad", "anger", "fear"};
    } else {
      for (int c = 0; c < set.class_count; ++c)
        set.class_names.push_back("class" + std::to_string(c));
    }
  }

  const fs::path mask_path = base / "ground_truth_mask.csv";
  if (fs::exists(mask_path))
    set.ground_truth_mask = load_matrix_csv(mask_path.string());

  set.validate();
  return set;
}

}  // namespace eegroar
