#include "eegroar/roar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "eegroar/parallel.hpp"

namespace eegroar {

BinaryMask make_mask(const RelevanceMap& avg_relevance, Real r,
                     MaskMode mode) {
  if (r < 0 || r > 1)
    throw std::invalid_argument("removal rate must be in [0,1]");
  const Tensord& rel = avg_relevance.data;
  BinaryMask mask;
  mask.removal_rate = r;
  mask.source = avg_relevance.method;

  if (mode == MaskMode::kValueThreshold) {
    mask.data = Tensord(rel.shape());
    for (Index i = 0; i < rel.size(); ++i)
      mask.data[i] = rel[i] <= r ? 1.0 : 0.0;
    return mask;
  }

  const Index n = rel.size();
  const Index remove =
      static_cast<Index>(std::lround(r * static_cast<Real>(n)));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return rel[a] > rel[b]; });
  mask.data = Tensord::constant(rel.shape(), 1.0);
  for (Index k = 0; k < remove; ++k)
    mask.data[order[static_cast<std::size_t>(k)]] = 0.0;
  return mask;
}

Tensord apply_mask(const Tensord& trial, const BinaryMask& mask,
                   FillPolicy fill) {
  if (trial.rank() != 2 || !trial.same_shape(mask.data))
    throw std::invalid_argument("apply_mask: trial/mask extent mismatch");
  Tensord out = trial;
  const Index ch = trial.extent(0), sm = trial.extent(1);
  for (Index c = 0; c < ch; ++c) {
    Real fill_value = 0;
    if (fill == FillPolicy::kChannelMean) {
      Real sum = 0;
      for (Index t = 0; t < sm; ++t) sum += trial(c, t);
      fill_value = sum / static_cast<Real>(sm);
    }
    for (Index t = 0; t < sm; ++t)
      if (mask.data(c, t) == 0.0) out(c, t) = fill_value;
  }
  return out;
}

BinaryMask uniform_random_mask(Index channels, Index samples, Real r,
                               Rng& rng) {
  if (r < 0 || r > 1)
    throw std::invalid_argument("removal rate must be in [0,1]");
  const Index n = channels * samples;
  const auto remove =
      static_cast<std::size_t>(std::lround(r * static_cast<Real>(n)));
  BinaryMask mask;
  mask.removal_rate = r;
  mask.source = "uniform";
  mask.data = Tensord::constant({channels, samples}, 1.0);
  for (std::size_t idx :
       rng.sample_indices(static_cast<std::size_t>(n), remove))
    mask.data[static_cast<Index>(idx)] = 0.0;
  return mask;
}

BinaryMask slice_mask(Index channels, Index samples, Index slice_len,
                      SliceOrder order, const RelevanceMap* relevance, Real r,
                      Rng* rng) {
  if (r < 0 || r > 1)
    throw std::invalid_argument("removal rate must be in [0,1]");
  if (slice_len < 1 || slice_len > samples)
    throw std::invalid_argument("slice length must be in [1, samples]");
  if (order == SliceOrder::kMethodSorted && !relevance)
    throw std::invalid_argument("method-sorted slices require a relevance map");
  if (order == SliceOrder::kRandom && !rng)
    throw std::invalid_argument("random slices require a random source");
  if (relevance && relevance->data.shape() != Shape{channels, samples})
    throw std::invalid_argument("slice relevance extent mismatch");

  const Index per_channel = (samples + slice_len - 1) / slice_len;
  const Index total = channels * per_channel;

  struct Slice {
    Index channel, begin, end;
  };
  std::vector<Slice> slices;
  slices.reserve(static_cast<std::size_t>(total));
  for (Index c = 0; c < channels; ++c)
    for (Index s = 0; s < per_channel; ++s)
      slices.push_back(
          {c, s * slice_len, std::min(samples, (s + 1) * slice_len)});

  std::vector<Index> rank(slices.size());
  std::iota(rank.begin(), rank.end(), Index{0});
  if (order == SliceOrder::kRandom) {
    rng->shuffle(rank);
  } else {
    std::vector<Real> score(slices.size());
    for (std::size_t k = 0; k < slices.size(); ++k) {
      const Slice& s = slices[k];
      Real sum = 0;
      for (Index t = s.begin; t < s.end; ++t)
        sum += relevance->data(s.channel, t);
      score[k] = sum / static_cast<Real>(s.end - s.begin);
    }
    std::stable_sort(rank.begin(), rank.end(),
                     [&](Index a, Index b) { return score[a] > score[b]; });
  }

  const Index remove =
      static_cast<Index>(std::lround(r * static_cast<Real>(total)));
  BinaryMask mask;
  mask.removal_rate = r;
  mask.source =
      order == SliceOrder::kRandom ? "slices_random" : "slices_sorted";
  mask.data = Tensord::constant({channels, samples}, 1.0);
  for (Index k = 0; k < remove; ++k) {
    const Slice& s = slices[static_cast<std::size_t>(rank[k])];
    for (Index t = s.begin; t < s.end; ++t) mask.data(s.channel, t) = 0.0;
  }
  return mask;
}

bool method_needs_patterns(const std::string& method) {
  return method == "patternnet" || method == "patternattr";
}

RelevanceMap attribute_trial(const Network& net, const Tensord& input,
                             int target_class, const std::string& method,
                             const SmoothGradConfig& smoothgrad_cfg,
                             const LrpConfig& lrp_cfg,
                             const PatternSet* patterns) {
  if (method == "saliency")
    return gradient_saliency(net, input, target_class);
  if (method == "smoothgrad" || method == "smoothgrad_sq") {
    SmoothGradConfig cfg = smoothgrad_cfg;
    cfg.squared = method == "smoothgrad_sq";
    return smooth_grad(net, input, target_class, cfg);
  }
  if (method == "lrp_b") return lrp(net, input, target_class, lrp_cfg);
  if (method == "patternnet" || method == "patternattr") {
    if (!patterns)
      throw std::invalid_argument("method " + method +
                                  " needs estimated patterns");
    return method == "patternnet"
               ? patternnet(net, *patterns, input, target_class)
               : pattern_attribution(net, *patterns, input, target_class);
  }
  throw std::invalid_argument("unknown attribution method '" + method + "'");
}

std::uint64_t subject_train_seed(std::uint64_t master_seed,
                                 const std::string& subject_id) {
  return combine_seed(master_seed, string_hash(subject_id));
}

namespace {

/// Attributes one fold's held-out trial for every method; estimates
/// patterns from the fold's training inputs when needed.
void attribute_fold(const Network& net, std::size_t fold,
                    const std::vector<Tensord>& inputs, int target,
                    const TrainConfig& cfg,
                    const std::vector<std::string>& methods,
                    const SmoothGradConfig& smoothgrad_cfg,
                    const LrpConfig& lrp_cfg,
                    std::vector<std::vector<RelevanceMap>>& fold_maps) {
  const bool want_patterns =
      std::any_of(methods.begin(), methods.end(), method_needs_patterns);
  PatternSet patterns;
  if (want_patterns) {
    std::vector<Tensord> train_inputs;
    train_inputs.reserve(inputs.size() - 1);
    for (std::size_t i = 0; i < inputs.size(); ++i)
      if (i != fold) train_inputs.push_back(inputs[i]);
    patterns = estimate_patterns(net, train_inputs);
  }
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    SmoothGradConfig sg = smoothgrad_cfg;
    sg.seed = combine_seed(combine_seed(cfg.seed, fold),
                           string_hash(methods[mi]));
    fold_maps[mi][fold] = normalize_relevance(
        attribute_trial(net, inputs[fold], target, methods[mi], sg, lrp_cfg,
                        want_patterns ? &patterns : nullptr));
  }
}

}  // namespace

AttributionRun attribute_subject(const std::vector<Tensord>& inputs,
                                 const std::vector<int>& labels,
                                 const std::vector<std::string>& trial_ids,
                                 Index classes, const ArchitectureConfig& arch,
                                 const TrainConfig& cfg,
                                 const std::vector<std::string>& methods,
                                 const SmoothGradConfig& smoothgrad_cfg,
                                 const LrpConfig& lrp_cfg, int jobs) {
  AttributionRun run;
  run.fold_maps.assign(methods.size(),
                       std::vector<RelevanceMap>(inputs.size()));
  FoldHook hook;
  if (!methods.empty()) {
    hook = [&](std::size_t fold, const Network& net, const FoldResult& fr) {
      attribute_fold(net, fold, inputs, fr.true_label, cfg, methods,
                     smoothgrad_cfg, lrp_cfg, run.fold_maps);
    };
  }
  run.base = run_loto(inputs, labels, trial_ids, classes, arch, cfg, jobs,
                      hook);
  return run;
}

AttributionRun attribute_subject_with(
    const FoldNetSource& nets, LotoResult base,
    const std::vector<Tensord>& inputs, const std::vector<int>& labels,
    Index classes, const TrainConfig& cfg,
    const std::vector<std::string>& methods,
    const SmoothGradConfig& smoothgrad_cfg, const LrpConfig& lrp_cfg,
    int jobs) {
  (void)classes;
  if (base.folds.size() != inputs.size())
    throw std::invalid_argument(
        "attribute_subject_with: base run does not match the trial count");
  AttributionRun run;
  run.fold_maps.assign(methods.size(),
                       std::vector<RelevanceMap>(inputs.size()));
  run.base = std::move(base);
  if (!methods.empty()) {
    parallel_for(inputs.size(), jobs, [&](std::size_t fold) {
      if (run.base.folds[fold].failed) return;
      const Network net = nets(fold);
      attribute_fold(net, fold, inputs, labels[fold], cfg, methods,
                     smoothgrad_cfg, lrp_cfg, run.fold_maps);
    });
  }
  return run;
}

SubjectAttribution summarize_attribution(const AttributionRun& run,
                                         const std::vector<std::string>& methods,
                                         int class_count) {
  SubjectAttribution out;
  out.subject_id = run.subject_id;
  out.base = run.base;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::vector<RelevanceMap> usable;
    for (std::size_t f = 0; f < run.base.folds.size(); ++f)
      if (!run.base.folds[f].failed) usable.push_back(run.fold_maps[mi][f]);
    if (usable.empty())
      throw std::runtime_error("no usable relevance maps for method " +
                               methods[mi]);
    RelevanceMap avg = normalize_relevance(
        average_by_class(usable, class_count).overall);
    avg.method = methods[mi];
    out.relevance.emplace_back(methods[mi], std::move(avg));
  }
  return out;
}

std::vector<std::string> roar_curve_tags(const RoarConfig& cfg,
                                         bool have_ground_truth) {
  std::vector<std::string> tags = cfg.methods;
  if (cfg.baseline_ground_truth && have_ground_truth)
    tags.push_back("ground_truth");
  if (cfg.baseline_uniform) tags.push_back("uniform");
  if (cfg.baseline_random_slices) tags.push_back("slices_random");
  if (cfg.baseline_method_slices)
    for (const std::string& m : cfg.methods) tags.push_back("slices_" + m);
  return tags;
}

namespace {

Real population_std(const std::vector<Real>& v, Real mean) {
  if (v.size() < 2) return 0;
  Real ss = 0;
  for (Real x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<Real>(v.size()));
}

}  // namespace

RoarOutcome run_roar_from_base(const TrialSet& set,
                               const ArchitectureConfig& arch,
                               const TrainConfig& train_cfg,
                               const RoarConfig& cfg,
                               std::vector<SubjectAttribution> bases) {
  set.validate();
  for (Real r : cfg.r_values)
    if (r < 0 || r > 1)
      throw std::invalid_argument("run_roar: removal rates must be in [0,1]");
  if (!std::is_sorted(cfg.r_values.begin(), cfg.r_values.end()))
    throw std::invalid_argument("run_roar: r_values must be ascending");

  const bool have_gt = set.ground_truth_mask.has_value();
  const auto tags = roar_curve_tags(cfg, have_gt);
  const Index ch = set.channels(), sm = set.samples();

  struct CurveAccumulator {
    std::vector<std::vector<Real>> accuracy;  // [r][subject]
    std::vector<bool> partial;
  };
  std::vector<CurveAccumulator> acc(tags.size());
  for (auto& a : acc) {
    a.accuracy.assign(cfg.r_values.size(), {});
    a.partial.assign(cfg.r_values.size(), false);
  }

  RoarOutcome outcome;

  for (SubjectAttribution& sa : bases) {
    const TrialSet sub = set.subject_subset(sa.subject_id);
    const std::size_t n = sub.trials.size();
    if (sa.base.folds.size() != n)
      throw std::invalid_argument("base run for subject " + sa.subject_id +
                                  " does not match the trial count");
    std::vector<Tensord> inputs;
    std::vector<int> labels;
    std::vector<std::string> ids;
    inputs.reserve(n);
    for (const EegTrial& t : sub.trials) {
      inputs.push_back(t.data.reshaped({1, ch, sm}));
      labels.push_back(t.label);
      ids.push_back(t.trial_id);
    }

    TrainConfig subject_cfg = train_cfg;
    subject_cfg.seed = subject_train_seed(train_cfg.seed, sa.subject_id);
    const Real base_accuracy = sa.base.accuracy();

    RelevanceMap gt_map;
    if (have_gt) {
      gt_map.data = *set.ground_truth_mask;
      gt_map.method = "ground_truth";
      gt_map.normalized = true;
    }

    auto find_relevance = [&](const std::string& m) -> const RelevanceMap& {
      for (const auto& [tag, map] : sa.relevance)
        if (tag == m) return map;
      throw std::invalid_argument("roar: relevance for method '" + m +
                                  "' is not part of the base attribution");
    };

    SubjectRoar sr;
    // identical masks (e.g. r = 1 across curves) retrain identically
    std::map<std::string, std::pair<Real, bool>> retrain_cache;
    for (std::size_t ti = 0; ti < tags.size(); ++ti) {
      const std::string& tag = tags[ti];
      MaskGrid grid;
      grid.tag = tag;
      for (std::size_t ri = 0; ri < cfg.r_values.size(); ++ri) {
        const Real r = cfg.r_values[ri];
        BinaryMask mask;
        if (tag == "uniform") {
          Rng rng(combine_seed(combine_seed(subject_cfg.seed, ri),
                               string_hash(tag)));
          mask = uniform_random_mask(ch, sm, r, rng);
        } else if (tag == "slices_random") {
          Rng rng(combine_seed(combine_seed(subject_cfg.seed, ri),
                               string_hash(tag)));
          mask = slice_mask(ch, sm, std::min(cfg.slice_len, sm),
                            SliceOrder::kRandom, nullptr, r, &rng);
        } else if (tag.rfind("slices_", 0) == 0) {
          mask = slice_mask(ch, sm, std::min(cfg.slice_len, sm),
                            SliceOrder::kMethodSorted,
                            &find_relevance(tag.substr(7)), r, nullptr);
        } else if (tag == "ground_truth") {
          mask = make_mask(gt_map, r, cfg.mask_mode);
        } else {
          mask = make_mask(find_relevance(tag), r, cfg.mask_mode);
        }
        mask.source = tag;

        Real accuracy;
        bool partial = false;
        if (mask.all_ones()) {
          // identical training data; the base run already is this result
          accuracy = base_accuracy;
          partial = sa.base.failed_folds > 0;
        } else {
          std::string key(static_cast<std::size_t>(mask.data.size()), '0');
          for (Index i = 0; i < mask.data.size(); ++i)
            if (mask.data[i] != 0.0) key[static_cast<std::size_t>(i)] = '1';
          if (const auto hit = retrain_cache.find(key);
              hit != retrain_cache.end()) {
            accuracy = hit->second.first;
            partial = hit->second.second;
          } else {
            std::vector<Tensord> masked;
            masked.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
              masked.push_back(
                  apply_mask(inputs[i].reshaped({ch, sm}), mask, cfg.fill)
                      .reshaped({1, ch, sm}));
            const LotoResult res = run_loto(masked, labels, ids,
                                            set.class_count, arch,
                                            subject_cfg, cfg.jobs);
            accuracy = res.accuracy();
            partial = res.failed_folds > 0;
            retrain_cache.emplace(std::move(key), std::make_pair(accuracy,
                                                                 partial));
          }
        }
        acc[ti].accuracy[ri].push_back(accuracy);
        if (partial) acc[ti].partial[ri] = true;
        grid.by_r.push_back(std::move(mask));
      }
      sr.masks.push_back(std::move(grid));
    }
    sr.attribution = std::move(sa);
    outcome.subjects.push_back(std::move(sr));
  }

  for (std::size_t ti = 0; ti < tags.size(); ++ti) {
    RoarCurve curve;
    curve.tag = tags[ti];
    for (std::size_t ri = 0; ri < cfg.r_values.size(); ++ri) {
      RoarCurvePoint p;
      p.r = cfg.r_values[ri];
      p.per_subject = acc[ti].accuracy[ri];
      const Real mean = p.per_subject.empty()
                            ? 0
                            : std::accumulate(p.per_subject.begin(),
                                              p.per_subject.end(), Real(0)) /
                                  static_cast<Real>(p.per_subject.size());
      p.mean_accuracy = mean;
      p.std_accuracy = population_std(p.per_subject, mean);
      p.partial = acc[ti].partial[ri];
      curve.points.push_back(std::move(p));
    }
    outcome.curves.push_back(std::move(curve));
  }
  return outcome;
}

RoarOutcome run_roar(const TrialSet& set, const ArchitectureConfig& arch,
                     const TrainConfig& train_cfg, const RoarConfig& cfg) {
  set.validate();
  if (set.trials.empty()) throw std::invalid_argument("run_roar: empty set");

  const Index ch = set.channels(), sm = set.samples();
  std::vector<SubjectAttribution> bases;
  for (const std::string& subject : set.subject_ids()) {
    const TrialSet sub = set.subject_subset(subject);
    std::vector<Tensord> inputs;
    std::vector<int> labels;
    std::vector<std::string> ids;
    inputs.reserve(sub.trials.size());
    for (const EegTrial& t : sub.trials) {
      inputs.push_back(t.data.reshaped({1, ch, sm}));
      labels.push_back(t.label);
      ids.push_back(t.trial_id);
    }
    TrainConfig subject_cfg = train_cfg;
    subject_cfg.seed = subject_train_seed(train_cfg.seed, subject);
    AttributionRun run = attribute_subject(
        inputs, labels, ids, set.class_count, arch, subject_cfg, cfg.methods,
        cfg.smoothgrad, cfg.lrp, cfg.jobs);
    run.subject_id = subject;
    bases.push_back(
        summarize_attribution(run, cfg.methods, set.class_count));
  }
  return run_roar_from_base(set, arch, train_cfg, cfg, std::move(bases));
}

}  // namespace eegroar
