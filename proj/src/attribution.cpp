#include "eegroar/attribution.hpp"

#include <cmath>
#include <stdexcept>

namespace eegroar {

namespace {

Shape map_shape(const Tensord& trial) {
  const Index r = trial.rank();
  if (r < 2) throw std::invalid_argument("trial must have at least 2 axes");
  return {trial.extent(r - 2), trial.extent(r - 1)};
}

Tensord one_hot(Index classes, int target) {
  if (target < 0 || target >= classes)
    throw std::invalid_argument("target class " + std::to_string(target) +
                                " out of range");
  Tensord t({classes});
  t[target] = 1.0;
  return t;
}

RelevanceMap input_gradient(const Network& net, const Tensord& trial,
                            int target_class,
                            const std::vector<Tensord>* weight_override,
                            const std::string& method) {
  std::vector<LayerCache> caches;
  forward(net, trial, {}, &caches);
  const Tensord seed = one_hot(net.class_count(), target_class);
  Tensord g = backward_input(net, caches, seed, weight_override);
  RelevanceMap map;
  map.data = g.reshaped(map_shape(trial));
  map.target_class = target_class;
  map.method = method;
  return map;
}

}  // namespace

RelevanceMap gradient_saliency(const Network& net, const Tensord& trial,
                               int target_class) {
  return input_gradient(net, trial, target_class, nullptr, "saliency");
}

RelevanceMap smooth_grad(const Network& net, const Tensord& trial,
                         int target_class, const SmoothGradConfig& cfg) {
  if (cfg.samples < 1)
    throw std::invalid_argument("smooth_grad needs samples >= 1");
  if (cfg.sigma < 0)
    throw std::invalid_argument("smooth_grad needs sigma >= 0");

  const Real range = trial.max() - trial.min();
  const Real noise_sd = cfg.sigma * range;
  Rng rng(cfg.seed);

  RelevanceMap out;
  out.data = Tensord(map_shape(trial));
  out.target_class = target_class;
  out.method = cfg.squared ? "smoothgrad_sq" : "smoothgrad";

  Tensord noisy = trial;
  for (int s = 0; s < cfg.samples; ++s) {
    if (noise_sd > 0) {
      noisy = trial;
      for (Index i = 0; i < noisy.size(); ++i)
        noisy[i] += noise_sd * rng.normal();
    }
    RelevanceMap g = input_gradient(net, noisy, target_class, nullptr,
                                    out.method);
    if (cfg.samples == 1 && !cfg.squared) {
      out.data = std::move(g.data);
      return out;
    }
    if (cfg.squared)
      out.data.array() += g.data.array().square();
    else
      out.data.array() += g.data.array();
  }
  out.data.array() /= static_cast<Real>(cfg.samples);
  return out;
}

// --- layer-wise relevance propagation ---------------------------------------

namespace {

/// Epsilon rule: contributions x_i * w_ji normalized by the unit's
/// pre-activation, stabilized away from zero with a sign-preserving epsilon.
Tensord lrp_dense(const Layer& layer, const LayerCache& cache,
                  const Tensord& relevance, Real epsilon) {
  const Index m = layer.weights.extent(0), n = layer.weights.extent(1);
  Vector<Real> scaled(m);
  for (Index j = 0; j < m; ++j) {
    const Real denom = cache.output[j];
    const Real stabilized =
        denom >= 0 ? denom + epsilon : denom - epsilon;
    scaled[j] = stabilized != 0 ? relevance[j] / stabilized : 0.0;
  }
  Tensord out(cache.input.shape());
  out.as_vector().noalias() =
      layer.weights.as_matrix(m, n).transpose() * scaled;
  out.array() *= cache.input.array();
  return out;
}

/// Alpha-beta rule: positive and negative contribution shares weighted by
/// alpha and beta; bias parts enter the normalizers only.
Tensord lrp_conv(const Layer& layer, const LayerCache& cache,
                 const Tensord& relevance, Real alpha, Real beta) {
  const auto d = conv2d_dims(cache.input, layer.weights,
                             layer.spec.stride_rows, layer.spec.stride_cols);
  Tensord out(cache.input.shape());
  const Tensord& in = cache.input;
  const Real* w_base = layer.weights.data();
  const Index patch = d.in_c * d.kh * d.kw;

  for (Index f = 0; f < d.filters; ++f) {
    const Real* w = w_base + f * patch;
    const Real bias = layer.bias[f];
    for (Index oh = 0; oh < d.out_h; ++oh) {
      for (Index ow = 0; ow < d.out_w; ++ow) {
        const Real r_out =
            relevance[(f * d.out_h + oh) * d.out_w + ow];
        if (r_out == 0) continue;
        Real pos = bias > 0 ? bias : 0;
        Real neg = bias < 0 ? bias : 0;
        for (Index c = 0; c < d.in_c; ++c) {
          for (Index i = 0; i < d.kh; ++i) {
            const Index in_base =
                (c * d.in_h + oh * d.sr + i) * d.in_w + ow * d.sc;
            const Index w_base_k = (c * d.kh + i) * d.kw;
            for (Index j = 0; j < d.kw; ++j) {
              const Real z = in[in_base + j] * w[w_base_k + j];
              if (z > 0)
                pos += z;
              else
                neg += z;
            }
          }
        }
        const Real pos_scale = pos > 0 ? alpha * r_out / pos : 0.0;
        const Real neg_scale = neg < 0 ? beta * r_out / neg : 0.0;
        if (pos_scale == 0 && neg_scale == 0) continue;
        for (Index c = 0; c < d.in_c; ++c) {
          for (Index i = 0; i < d.kh; ++i) {
            const Index in_base =
                (c * d.in_h + oh * d.sr + i) * d.in_w + ow * d.sc;
            const Index w_base_k = (c * d.kh + i) * d.kw;
            for (Index j = 0; j < d.kw; ++j) {
              const Real z = in[in_base + j] * w[w_base_k + j];
              out[in_base + j] += z > 0 ? pos_scale * z : neg_scale * z;
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

RelevanceMap lrp(const Network& net, const Tensord& trial, int target_class,
                 const LrpConfig& cfg) {
  if (cfg.epsilon <= 0) throw std::invalid_argument("lrp epsilon must be > 0");
  std::vector<LayerCache> caches;
  const Tensord logits = forward(net, trial, {}, &caches);
  if (target_class < 0 || target_class >= logits.size())
    throw std::invalid_argument("target class out of range");

  Tensord relevance({logits.size()});
  relevance[target_class] = logits[target_class];

  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const Layer& layer = net.layers()[li];
    const LayerCache& cache = caches[li];
    switch (layer.spec.kind) {
      case LayerKind::kDense:
        relevance = lrp_dense(layer, cache,
                              relevance.reshaped({relevance.size()}),
                              cfg.epsilon);
        break;
      case LayerKind::kConv2d:
        relevance = lrp_conv(layer, cache, relevance, cfg.alpha, cfg.beta);
        break;
      case LayerKind::kMaxPool2d: {
        Tensord routed(cache.input.shape());
        for (std::size_t k = 0; k < cache.pool_argmax.size(); ++k)
          routed[cache.pool_argmax[k]] += relevance[static_cast<Index>(k)];
        relevance = std::move(routed);
        break;
      }
      case LayerKind::kFlatten:
        relevance = relevance.reshaped(cache.input.shape());
        break;
      case LayerKind::kRelu:
      case LayerKind::kSigmoid:
      case LayerKind::kDropout:
      case LayerKind::kAmplitudeNorm:
        break;  // relevance passes through one-to-one connections
      default:
        throw std::invalid_argument(
            std::string("lrp: unsupported layer kind ") +
            layer_kind_name(layer.spec.kind));
    }
  }

  RelevanceMap map;
  map.data = relevance.reshaped(map_shape(trial));
  map.target_class = target_class;
  map.method = "lrp_b";
  return map;
}

// --- pattern estimation ------------------------------------------------------

PatternSet estimate_patterns(const Network& net,
                             const std::vector<Tensord>& inputs) {
  if (inputs.size() < 2)
    throw std::invalid_argument("estimate_patterns needs at least 2 trials");

  struct LayerStats {
    // per neuron: sums of x*z, x over the active regime, plus z sums/counts
    ColMatrix<Real> sum_xz;
    ColMatrix<Real> sum_x;
    Vector<Real> sum_z;
    Vector<Real> count;
  };

  const auto& layers = net.layers();
  std::vector<LayerStats> stats(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    if (!l.spec.has_weights()) continue;
    const Index units = l.weights.extent(0);
    const Index patch = l.weights.size() / units;
    stats[li].sum_xz = ColMatrix<Real>::Zero(units, patch);
    stats[li].sum_x = ColMatrix<Real>::Zero(units, patch);
    stats[li].sum_z = Vector<Real>::Zero(units);
    stats[li].count = Vector<Real>::Zero(units);
  }

  std::vector<LayerCache> caches;
  for (const Tensord& input : inputs) {
    forward(net, input, {}, &caches);
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const Layer& l = layers[li];
      if (!l.spec.has_weights()) continue;
      LayerStats& st = stats[li];
      if (l.spec.kind == LayerKind::kDense) {
        const auto x = caches[li].input.as_vector();
        const auto z = caches[li].output.as_vector();
        for (Index j = 0; j < z.size(); ++j) {
          if (z[j] <= 0) continue;
          st.sum_xz.row(j) += (x * z[j]).transpose();
          st.sum_x.row(j) += x.transpose();
          st.sum_z[j] += z[j];
          st.count[j] += 1;
        }
      } else {
        const auto d = conv2d_dims(caches[li].input, l.weights,
                                   l.spec.stride_rows, l.spec.stride_cols);
        const Index patch = d.in_c * d.kh * d.kw;
        const Index cells = d.out_h * d.out_w;
        const RowMatrix<Real>& col = caches[li].conv_cols;
        const auto zmat = caches[li].output.as_matrix(d.filters, cells);
        for (Index f = 0; f < d.filters; ++f) {
          for (Index p = 0; p < cells; ++p) {
            const Real z = zmat(f, p);
            if (z <= 0) continue;
            st.sum_z[f] += z;
            st.count[f] += 1;
          }
          for (Index r = 0; r < patch; ++r) {
            Real xz = 0, xs = 0;
            const Real* crow = col.data() + r * cells;
            for (Index p = 0; p < cells; ++p) {
              const Real z = zmat(f, p);
              if (z <= 0) continue;
              xz += crow[p] * z;
              xs += crow[p];
            }
            st.sum_xz(f, r) += xz;
            st.sum_x(f, r) += xs;
          }
        }
      }
    }
  }

  PatternSet result;
  result.patterns.resize(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    if (!l.spec.has_weights()) continue;
    const Index units = l.weights.extent(0);
    const Index patch = l.weights.size() / units;
    Tensord pattern(l.weights.shape());
    auto pmat = pattern.as_matrix(units, patch);
    const auto wmat = l.weights.as_matrix(units, patch);
    for (Index j = 0; j < units; ++j) {
      const Real m = stats[li].count[j];
      if (m <= 0) continue;  // never active: zero pattern
      const Vector<Real> mean_xz = stats[li].sum_xz.row(j).transpose() / m;
      const Vector<Real> mean_x = stats[li].sum_x.row(j).transpose() / m;
      const Real mean_z = stats[li].sum_z[j] / m;
      const Vector<Real> numerator = mean_xz - mean_x * mean_z;
      const Real denom = wmat.row(j).dot(numerator);
      if (std::abs(denom) < 1e-12) {
        ++result.zero_denominator_count;
        continue;
      }
      pmat.row(j) = (numerator / denom).transpose();
    }
    result.patterns[li] = std::move(pattern);
  }
  return result;
}

namespace {

void check_patterns(const Network& net, const PatternSet& patterns) {
  if (patterns.patterns.size() != net.layers().size())
    throw std::invalid_argument(
        "pattern set does not match the network's layer count");
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const Layer& l = net.layers()[li];
    if (!l.spec.has_weights()) continue;
    if (patterns.patterns[li].size() == 0)
      throw std::invalid_argument("missing pattern for layer " +
                                  std::to_string(li) + " (" +
                                  layer_kind_name(l.spec.kind) + ")");
    if (!patterns.patterns[li].same_shape(l.weights))
      throw std::invalid_argument("pattern shape mismatch at layer " +
                                  std::to_string(li));
  }
}

}  // namespace

RelevanceMap patternnet(const Network& net, const PatternSet& patterns,
                        const Tensord& trial, int target_class) {
  check_patterns(net, patterns);
  RelevanceMap map =
      input_gradient(net, trial, target_class, &patterns.patterns,
                     "patternnet");
  return map;
}

RelevanceMap pattern_attribution(const Network& net, const PatternSet& patterns,
                                 const Tensord& trial, int target_class) {
  check_patterns(net, patterns);
  std::vector<Tensord> theta(net.layers().size());
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const Layer& l = net.layers()[li];
    if (!l.spec.has_weights()) continue;
    theta[li] = Tensord(l.weights.shape(),
                        l.weights.array() * patterns.patterns[li].array());
  }
  RelevanceMap map =
      input_gradient(net, trial, target_class, &theta, "patternattr");
  return map;
}

// --- map post-processing -----------------------------------------------------

RelevanceMap normalize_relevance(RelevanceMap map) {
  const Real peak = map.data.max_abs();
  if (peak > 0) map.data.array() /= peak;
  map.normalized = true;
  return map;
}

RelevanceMap average_relevance(const std::vector<RelevanceMap>& maps) {
  if (maps.empty())
    throw std::invalid_argument("average_relevance on an empty list");
  RelevanceMap out;
  out.data = Tensord(maps.front().data.shape());
  out.method = maps.front().method;
  out.target_class = maps.front().target_class;
  for (const RelevanceMap& m : maps) {
    if (!m.data.same_shape(out.data))
      throw std::invalid_argument("average_relevance: extent mismatch");
    if (m.target_class != out.target_class) out.target_class = -1;
    out.data.array() += m.data.array();
  }
  out.data.array() /= static_cast<Real>(maps.size());
  return out;
}

ClassAverages average_by_class(const std::vector<RelevanceMap>& maps,
                               int class_count) {
  if (maps.empty())
    throw std::invalid_argument("average_by_class on an empty list");
  if (class_count < 1)
    throw std::invalid_argument("average_by_class needs class_count >= 1");
  ClassAverages out;
  out.per_class.resize(static_cast<std::size_t>(class_count));
  std::vector<std::vector<RelevanceMap>> buckets(
      static_cast<std::size_t>(class_count));
  for (const RelevanceMap& m : maps) {
    if (m.target_class < 0 || m.target_class >= class_count)
      throw std::invalid_argument("map target class outside class range");
    buckets[static_cast<std::size_t>(m.target_class)].push_back(m);
  }
  out.overall.data = Tensord(maps.front().data.shape());
  out.overall.method = maps.front().method;
  int present = 0;
  for (int c = 0; c < class_count; ++c) {
    auto& bucket = buckets[static_cast<std::size_t>(c)];
    if (bucket.empty()) continue;
    out.per_class[static_cast<std::size_t>(c)] = average_relevance(bucket);
    out.overall.data.array() +=
        out.per_class[static_cast<std::size_t>(c)].data.array();
    ++present;
  }
  if (present == 0)
    throw std::invalid_argument("average_by_class: no class has maps");
  out.overall.data.array() /= static_cast<Real>(present);
  return out;
}

ColMatrix<Real> window_aggregate(
    const RelevanceMap& map,
    const std::vector<std::pair<Index, Index>>& windows) {
  if (map.data.rank() != 2)
    throw std::invalid_argument("window_aggregate expects a 2-D map");
  if (windows.empty())
    throw std::invalid_argument("window_aggregate needs at least one window");
  const Index ch = map.data.extent(0), sm = map.data.extent(1);
  ColMatrix<Real> out(ch, static_cast<Index>(windows.size()));
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto [b, e] = windows[w];
    if (b < 0 || e > sm || b >= e)
      throw std::invalid_argument("window [" + std::to_string(b) + "," +
                                  std::to_string(e) +
                                  ") is empty or outside the trial");
    for (Index c = 0; c < ch; ++c) {
      Real sum = 0;
      for (Index t = b; t < e; ++t) sum += map.data(c, t);
      out(c, static_cast<Index>(w)) = sum / static_cast<Real>(e - b);
    }
  }
  return out;
}

std::vector<std::pair<Index, Index>> windows_from_ms(
    const std::vector<std::pair<double, double>>& windows_ms,
    double sample_rate, Index samples) {
  if (sample_rate <= 0)
    throw std::invalid_argument("windows_from_ms needs a positive sample rate");
  std::vector<std::pair<Index, Index>> out;
  out.reserve(windows_ms.size());
  for (const auto& [bms, ems] : windows_ms) {
    Index b = static_cast<Index>(std::floor(bms / 1000.0 * sample_rate));
    Index e = static_cast<Index>(std::floor(ems / 1000.0 * sample_rate));
    b = std::max<Index>(0, std::min(b, samples));
    e = std::max<Index>(0, std::min(e, samples));
    if (b >= e)
      throw std::invalid_argument("window " + std::to_string(bms) + "-" +
                                  std::to_string(ems) +
                                  " ms is empty at this sample rate");
    out.emplace_back(b, e);
  }
  return out;
}

std::vector<std::pair<double, double>> default_windows_ms() {
  return {{0, 500}, {250, 750}, {500, 1000}, {750, 1250}, {1000, 1500}};
}

}  // namespace eegroar
