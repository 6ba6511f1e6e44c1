#include "eegroar/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "eegroar/export.hpp"
#include "eegroar/parallel.hpp"

namespace eegroar {

namespace fs = std::filesystem;

namespace {

std::string format_r(Real r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", r);
  return buf;
}

TrialSet load_and_preprocess(const RunConfig& cfg,
                             const std::string& dataset_dir) {
  TrialSet set = load_trialset(
      (fs::path(dataset_dir) / "manifest.csv").string());
  if (cfg.prep_detrend) {
    for (EegTrial& t : set.trials)
      t.data = linear_detrend(t.data, cfg.prep_baseline_begin,
                              cfg.prep_baseline_end);
  }
  if (cfg.prep_zca) {
    for (const std::string& subject : set.subject_ids()) {
      const TrialSet sub = set.subject_subset(subject);
      const WhiteningTransform w =
          fit_zca(sub, cfg.prep_zca_epsilon, cfg.prep_zca_scope);
      for (EegTrial& t : set.trials)
        if (t.subject_id == subject) t.data = apply_zca(w, t.data);
    }
  }
  return set;
}

struct SubjectData {
  std::string subject_id;
  std::vector<Tensord> inputs;  // [1, channels, samples]
  std::vector<int> labels;
  std::vector<std::string> ids;
};

SubjectData collect_subject(const TrialSet& set, const std::string& subject) {
  SubjectData d;
  d.subject_id = subject;
  const Index ch = set.channels(), sm = set.samples();
  for (const EegTrial& t : set.trials) {
    if (t.subject_id != subject) continue;
    d.inputs.push_back(t.data.reshaped({1, ch, sm}));
    d.labels.push_back(t.label);
    d.ids.push_back(t.trial_id);
  }
  return d;
}

double dataset_sample_rate(const TrialSet& set) {
  const double fs =
      set.trials.empty() ? 0.0 : set.trials.front().sample_rate;
  if (fs > 0) return fs;
  // fall back: treat the trial as spanning 1.5 s
  return static_cast<double>(set.samples()) / 1.5;
}

std::string model_filename(const std::string& subject, std::size_t fold) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_fold%03zu.net", fold);
  return subject + buf;
}

void write_metrics_csv(const std::vector<std::pair<std::string, LotoResult>>& results,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "subject,trials,failed_folds,accuracy,precision,recall,f1\n";
  for (const auto& [subject, res] : results) {
    const MacroMetrics m = macro_metrics(res.confusion);
    os << subject << "," << res.folds.size() << "," << res.failed_folds << ","
       << format_real(m.accuracy) << "," << format_real(m.precision) << ","
       << format_real(m.recall) << "," << format_real(m.f1) << "\n";
  }
}

void write_confusion_csv(const std::vector<std::pair<std::string, LotoResult>>& results,
                         int classes, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "subject,true_class,predicted_class,count\n";
  for (const auto& [subject, res] : results)
    for (int t = 0; t < classes; ++t)
      for (int p = 0; p < classes; ++p)
        os << subject << "," << t << "," << p << ","
           << res.confusion.at(t, p) << "\n";
}

void write_folds_csv(const std::vector<std::pair<std::string, LotoResult>>& results,
                     int classes, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "subject,fold,trial_id,true_label,predicted,iterations,stopped_early,"
        "failed";
  for (int k = 0; k < classes; ++k) os << ",p" << k;
  os << "\n";
  for (const auto& [subject, res] : results) {
    for (std::size_t f = 0; f < res.folds.size(); ++f) {
      const FoldResult& fr = res.folds[f];
      os << subject << "," << f << "," << fr.trial_id << "," << fr.true_label
         << "," << fr.predicted << "," << fr.iterations << ","
         << (fr.stopped_early ? 1 : 0) << "," << (fr.failed ? 1 : 0);
      for (int k = 0; k < classes; ++k)
        os << ","
           << format_real(fr.probs.size() == classes ? fr.probs[k] : 0.0);
      os << "\n";
    }
  }
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  return out;
}

/// Reads a train run's folds.csv back into per-subject results.
std::map<std::string, LotoResult> load_folds_csv(const std::string& path,
                                                 int classes) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open base fold table " + path);
  std::map<std::string, LotoResult> out;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() < 8 + static_cast<std::size_t>(classes))
      throw std::runtime_error(path + ": malformed fold row '" + line + "'");
    FoldResult fr;
    const std::string subject = f[0];
    fr.trial_id = f[2];
    fr.true_label = std::stoi(f[3]);
    fr.predicted = std::stoi(f[4]);
    fr.iterations = std::stoi(f[5]);
    fr.stopped_early = f[6] == "1";
    fr.failed = f[7] == "1";
    fr.probs = Tensord({classes});
    for (int k = 0; k < classes; ++k)
      fr.probs[k] = std::strtod(f[8 + static_cast<std::size_t>(k)].c_str(),
                                nullptr);
    auto [it, inserted] = out.try_emplace(subject);
    if (inserted) it->second.confusion = ConfusionMatrix(classes);
    it->second.folds.push_back(std::move(fr));
  }
  for (auto& [subject, res] : out) {
    for (const FoldResult& fr : res.folds) {
      if (fr.failed) {
        ++res.failed_folds;
        continue;
      }
      res.confusion.record(fr.true_label, fr.predicted);
    }
  }
  return out;
}

AttributionRun subject_attribution_run(const RunConfig& cfg,
                                       const TrialSet& set,
                                       const SubjectData& data,
                                       const std::string& base_dir) {
  TrainConfig subject_cfg = cfg.train;
  subject_cfg.seed = subject_train_seed(cfg.seed, data.subject_id);
  AttributionRun run;
  if (base_dir.empty()) {
    run = attribute_subject(data.inputs, data.labels, data.ids,
                            set.class_count, cfg.arch, subject_cfg,
                            cfg.methods, cfg.smoothgrad, cfg.lrp, cfg.jobs);
  } else {
    auto bases = load_folds_csv(
        (fs::path(base_dir) / "folds.csv").string(), set.class_count);
    const auto it = bases.find(data.subject_id);
    if (it == bases.end())
      throw std::runtime_error("base run has no folds for subject " +
                               data.subject_id);
    const fs::path models = fs::path(base_dir) / "models";
    FoldNetSource source = [models, subject = data.subject_id](
                               std::size_t fold) {
      const fs::path p = models / model_filename(subject, fold);
      if (!fs::exists(p))
        throw std::runtime_error(
            "base run is missing the fold model " + p.string() +
            "; rerun train with train.save_models = 1");
      return load_network(p.string());
    };
    run = attribute_subject_with(source, std::move(it->second), data.inputs,
                                 data.labels, set.class_count, subject_cfg,
                                 cfg.methods, cfg.smoothgrad, cfg.lrp,
                                 cfg.jobs);
  }
  run.subject_id = data.subject_id;
  return run;
}

void export_relevance(const RelevanceMap& map, const fs::path& stem,
                      std::uint64_t seed) {
  write_relevance_csv(map, (stem.string() + ".csv"), seed);
  write_pgm(map.data, stem.string() + ".pgm");
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
  write_config(cfg, (fs::path(out_dir) / "config.resolved").string());
}

}  // namespace

void cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  Rng rng(cfg.seed);
  const TrialSet set = generate_synthetic(cfg.synth, rng);
  save_trialset(set, out_dir);
  write_resolved_config(cfg, out_dir);
}

void cmd_train(const RunConfig& cfg, const std::string& dataset_dir,
               const std::string& out_dir) {
  fs::create_directories(out_dir);
  const TrialSet set = load_and_preprocess(cfg, dataset_dir);
  if (set.trials.empty()) throw std::runtime_error("dataset has no trials");
  if (cfg.save_models)
    fs::create_directories(fs::path(out_dir) / "models");

  std::vector<std::pair<std::string, LotoResult>> results;
  for (const std::string& subject : set.subject_ids()) {
    const SubjectData data = collect_subject(set, subject);
    TrainConfig subject_cfg = cfg.train;
    subject_cfg.seed = subject_train_seed(cfg.seed, subject);
    FoldHook hook;
    if (cfg.save_models) {
      const fs::path models = fs::path(out_dir) / "models";
      hook = [&, models](std::size_t fold, const Network& net,
                         const FoldResult&) {
        save_network(net, (models / model_filename(subject, fold)).string());
      };
    }
    LotoResult res = run_loto(data.inputs, data.labels, data.ids,
                              set.class_count, cfg.arch, subject_cfg,
                              cfg.jobs, hook);
    results.emplace_back(subject, std::move(res));
  }

  write_metrics_csv(results, (fs::path(out_dir) / "metrics.csv").string());
  write_confusion_csv(results, set.class_count,
                      (fs::path(out_dir) / "confusion.csv").string());
  write_folds_csv(results, set.class_count,
                  (fs::path(out_dir) / "folds.csv").string());
  write_resolved_config(cfg, out_dir);
}

void cmd_attribute(const RunConfig& cfg, const std::string& dataset_dir,
                   const std::string& base_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path rel_dir = fs::path(out_dir) / "relevance";
  const fs::path win_dir = fs::path(out_dir) / "windows";
  fs::create_directories(rel_dir);
  fs::create_directories(win_dir);

  const TrialSet set = load_and_preprocess(cfg, dataset_dir);
  if (set.trials.empty()) throw std::runtime_error("dataset has no trials");
  const double fs_rate = dataset_sample_rate(set);
  const auto windows = windows_from_ms(cfg.windows_ms, fs_rate, set.samples());

  std::vector<std::pair<std::string, LotoResult>> results;
  for (const std::string& subject : set.subject_ids()) {
    const SubjectData data = collect_subject(set, subject);
    AttributionRun run = subject_attribution_run(cfg, set, data, base_dir);
    results.emplace_back(subject, run.base);

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const std::string& method = cfg.methods[mi];
      std::vector<RelevanceMap> usable;
      for (std::size_t f = 0; f < run.base.folds.size(); ++f)
        if (!run.base.folds[f].failed) usable.push_back(run.fold_maps[mi][f]);
      if (usable.empty()) continue;
      const ClassAverages averages =
          average_by_class(usable, set.class_count);
      for (int k = 0; k < set.class_count; ++k) {
        const auto& cm = averages.per_class[static_cast<std::size_t>(k)];
        if (cm.data.size() == 0) continue;
        RelevanceMap normalized = normalize_relevance(cm);
        normalized.method = method;
        export_relevance(normalized,
                         rel_dir / (subject + "_" + method + "_class" +
                                    std::to_string(k)),
                         cfg.seed);
      }
      RelevanceMap overall = normalize_relevance(averages.overall);
      overall.method = method;
      export_relevance(overall, rel_dir / (subject + "_" + method + "_avg"),
                       cfg.seed);
      write_window_aggregate_csv(
          window_aggregate(overall, windows), windows,
          (win_dir / (subject + "_" + method + ".csv")).string());
    }
  }

  write_metrics_csv(results, (fs::path(out_dir) / "metrics.csv").string());
  write_folds_csv(results, set.class_count,
                  (fs::path(out_dir) / "folds.csv").string());
  write_resolved_config(cfg, out_dir);
}

// --- statistical comparison report -------------------------------------------

namespace {

struct ReportRow {
  std::string test;        // anova | ks
  std::string comparison;  // e.g. lrp_b_vs_uniform
  std::string scope;       // r=0.5 or window label
  double statistic = 0;
  double df1 = 0, df2 = 0;
  double p_raw = 1;
  double p_adjusted = 1;
  bool degenerate = false;
  std::string note;
};

void write_report_csv(const std::vector<ReportRow>& rows,
                      const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "test,comparison,scope,statistic,df1,df2,p_raw,p_adjusted,note\n";
  for (const ReportRow& r : rows) {
    os << r.test << "," << r.comparison << "," << r.scope << ",";
    if (r.note.empty()) {
      os << format_real(r.statistic) << "," << format_r(r.df1) << ","
         << format_r(r.df2) << "," << format_real(r.p_raw) << ","
         << format_real(r.p_adjusted);
    } else {
      os << ",,,,";
    }
    os << "," << r.note << "\n";
  }
}

/// ANOVA of method-vs-baseline accuracies at each removal rate, adjusted
/// across rates; KS similarity of window-aggregated relevance between
/// method pairs, adjusted across windows.
std::vector<ReportRow> build_report(
    const std::vector<RoarCurve>& curves,
    const std::vector<std::string>& methods,
    const std::map<std::string, std::vector<std::vector<Real>>>&
        window_values,  // method -> per window -> values
    const std::vector<std::string>& window_labels, double alpha) {
  std::vector<ReportRow> rows;

  auto curve_of = [&](const std::string& tag) -> const RoarCurve* {
    for (const RoarCurve& c : curves)
      if (c.tag == tag) return &c;
    return nullptr;
  };

  std::vector<std::string> baselines;
  for (const RoarCurve& c : curves)
    if (std::find(methods.begin(), methods.end(), c.tag) == methods.end())
      baselines.push_back(c.tag);

  for (const std::string& method : methods) {
    const RoarCurve* mc = curve_of(method);
    if (!mc) continue;
    for (const std::string& baseline : baselines) {
      const RoarCurve* bc = curve_of(baseline);
      if (!bc || bc->points.size() != mc->points.size()) continue;
      std::vector<ReportRow> family;
      std::vector<double> p_raw;
      for (std::size_t ri = 0; ri < mc->points.size(); ++ri) {
        ReportRow row;
        row.test = "anova";
        row.comparison = method + "_vs_" + baseline;
        row.scope = "r=" + format_r(mc->points[ri].r);
        const auto& a = mc->points[ri].per_subject;
        const auto& b = bc->points[ri].per_subject;
        bool identical = true;
        for (std::size_t i = 0; identical && i < a.size(); ++i)
          identical = a[i] == a[0] && b[i] == a[0];
        if (a.size() < 2 || b.size() < 2) {
          row.note = "insufficient_subjects";
        } else if (identical) {
          row.note = "identical_values";
        } else {
          const TestResult t = anova_oneway({a, b});
          row.statistic = t.statistic;
          row.df1 = t.df1;
          row.df2 = t.df2;
          row.p_raw = t.p_value;
          if (t.degenerate) row.note = "zero_within_group_variance";
          p_raw.push_back(t.p_value);
        }
        family.push_back(std::move(row));
      }
      const HolmResult holm = holm_correction(p_raw, alpha);
      std::size_t pi = 0;
      for (ReportRow& row : family) {
        if (row.note.empty() || row.note == "zero_within_group_variance")
          row.p_adjusted = holm.adjusted[pi++];
        rows.push_back(std::move(row));
      }
    }
  }

  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      const auto ai = window_values.find(methods[i]);
      const auto aj = window_values.find(methods[j]);
      if (ai == window_values.end() || aj == window_values.end()) continue;
      std::vector<ReportRow> family;
      std::vector<double> p_raw;
      for (std::size_t w = 0; w < window_labels.size(); ++w) {
        ReportRow row;
        row.test = "ks";
        row.comparison = methods[i] + "_vs_" + methods[j];
        row.scope = window_labels[w];
        const auto& a = ai->second[w];
        const auto& b = aj->second[w];
        if (a.size() < 2 || b.size() < 2) {
          row.note = "insufficient_values";
        } else {
          const TestResult t = ks_two_sample(a, b);
          row.statistic = t.statistic;
          row.df1 = t.df1;
          row.df2 = t.df2;
          row.p_raw = t.p_value;
          p_raw.push_back(t.p_value);
        }
        family.push_back(std::move(row));
      }
      const HolmResult holm = holm_correction(p_raw, alpha);
      std::size_t pi = 0;
      for (ReportRow& row : family) {
        if (row.note.empty()) row.p_adjusted = holm.adjusted[pi++];
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<std::string> window_labels_for(
    const std::vector<std::pair<Index, Index>>& windows) {
  std::vector<std::string> labels;
  for (const auto& [b, e] : windows)
    labels.push_back("w" + std::to_string(b) + "_" + std::to_string(e));
  return labels;
}

}  // namespace

void cmd_roar(const RunConfig& cfg, const std::string& dataset_dir,
              const std::string& base_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path rel_dir = fs::path(out_dir) / "relevance";
  const fs::path win_dir = fs::path(out_dir) / "windows";
  const fs::path mask_dir = fs::path(out_dir) / "masks";
  fs::create_directories(rel_dir);
  fs::create_directories(win_dir);
  fs::create_directories(mask_dir);

  const TrialSet set = load_and_preprocess(cfg, dataset_dir);
  if (set.trials.empty()) throw std::runtime_error("dataset has no trials");
  const double fs_rate = dataset_sample_rate(set);
  const auto windows = windows_from_ms(cfg.windows_ms, fs_rate, set.samples());
  const auto labels = window_labels_for(windows);

  std::vector<SubjectAttribution> bases;
  for (const std::string& subject : set.subject_ids()) {
    const SubjectData data = collect_subject(set, subject);
    AttributionRun run = subject_attribution_run(cfg, set, data, base_dir);
    bases.push_back(summarize_attribution(run, cfg.methods, set.class_count));
  }

  RoarOutcome outcome = run_roar_from_base(set, cfg.arch, cfg.train,
                                           cfg.roar_config(), std::move(bases));

  // per-subject exports
  std::vector<std::pair<std::string, LotoResult>> results;
  std::map<std::string, std::vector<std::vector<Real>>> window_values;
  for (const SubjectRoar& sr : outcome.subjects) {
    const SubjectAttribution& sa = sr.attribution;
    results.emplace_back(sa.subject_id, sa.base);
    for (const auto& [method, map] : sa.relevance) {
      export_relevance(map, rel_dir / (sa.subject_id + "_" + method + "_avg"),
                       cfg.seed);
      const ColMatrix<Real> agg = window_aggregate(map, windows);
      write_window_aggregate_csv(
          agg, windows,
          (win_dir / (sa.subject_id + "_" + method + ".csv")).string());
      auto& buckets = window_values[method];
      buckets.resize(windows.size());
      for (Index w = 0; w < agg.cols(); ++w)
        for (Index c = 0; c < agg.rows(); ++c)
          buckets[static_cast<std::size_t>(w)].push_back(agg(c, w));
    }
    for (const MaskGrid& grid : sr.masks) {
      for (std::size_t ri = 0; ri < grid.by_r.size(); ++ri) {
        const fs::path stem =
            mask_dir / (sa.subject_id + "_" + grid.tag + "_r" +
                        std::to_string(ri));
        write_mask_csv(grid.by_r[ri], stem.string() + ".csv");
        write_pgm(grid.by_r[ri].data, stem.string() + ".pgm");
      }
    }
  }

  std::vector<std::string> subjects = set.subject_ids();
  write_curves_csv(outcome.curves, subjects,
                   (fs::path(out_dir) / "roar_curves.csv").string());
  write_curve_summary_csv(outcome.curves,
                          (fs::path(out_dir) / "roar_summary.csv").string());
  write_metrics_csv(results, (fs::path(out_dir) / "metrics.csv").string());
  write_folds_csv(results, set.class_count,
                  (fs::path(out_dir) / "folds.csv").string());

  const auto rows =
      build_report(outcome.curves, cfg.methods, window_values, labels, 0.05);
  write_report_csv(rows, (fs::path(out_dir) / "report.csv").string());
  write_resolved_config(cfg, out_dir);
}

void cmd_report(const RunConfig& cfg, const std::string& roar_dir,
                const std::string& out_dir) {
  fs::create_directories(out_dir);

  // curves back from the long-format table
  std::map<std::string, std::map<Real, std::vector<Real>>> table;
  std::vector<std::string> tag_order;
  {
    const std::string path =
        (fs::path(roar_dir) / "roar_curves.csv").string();
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (line.empty()) continue;
      const auto f = split_line(line);
      if (f.size() != 4)
        throw std::runtime_error(path + ": malformed row '" + line + "'");
      const Real r = std::strtod(f[1].c_str(), nullptr);
      if (table.find(f[0]) == table.end()) tag_order.push_back(f[0]);
      table[f[0]][r].push_back(std::strtod(f[3].c_str(), nullptr));
    }
  }
  std::vector<RoarCurve> curves;
  for (const std::string& tag : tag_order) {
    RoarCurve c;
    c.tag = tag;
    for (const auto& [r, accs] : table[tag]) {
      RoarCurvePoint p;
      p.r = r;
      p.per_subject = accs;
      c.points.push_back(std::move(p));
    }
    curves.push_back(std::move(c));
  }

  // window aggregates from the attribute/roar exports
  std::map<std::string, std::vector<std::vector<Real>>> window_values;
  std::vector<std::string> labels;
  const fs::path win_dir = fs::path(roar_dir) / "windows";
  if (fs::exists(win_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(win_dir))
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
      // <subject>_<method>.csv
      const std::string stem = file.stem().string();
      const auto us = stem.find('_');
      if (us == std::string::npos) continue;
      const std::string method = stem.substr(us + 1);
      std::ifstream is(file);
      std::string line;
      bool header = true;
      std::vector<std::string> file_labels;
      while (std::getline(is, line)) {
        const auto f = split_line(line);
        if (header) {
          header = false;
          file_labels.assign(f.begin() + 1, f.end());
          if (labels.empty()) labels = file_labels;
          continue;
        }
        if (f.size() != file_labels.size() + 1) continue;
        auto& buckets = window_values[method];
        buckets.resize(file_labels.size());
        for (std::size_t w = 0; w < file_labels.size(); ++w)
          buckets[w].push_back(std::strtod(f[w + 1].c_str(), nullptr));
      }
    }
  }

  const auto rows =
      build_report(curves, cfg.methods, window_values, labels, 0.05);
  write_report_csv(rows, (fs::path(out_dir) / "report.csv").string());
}

}  // namespace eegroar
