#include "eegroar/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "eegroar/parallel.hpp"

namespace eegroar {

ArchitectureConfig ArchitectureConfig::paper_scale() {
  ArchitectureConfig a;
  a.blocks = {
      {100, 10, 32, 5, 2, true},
      {20, 5, 64, 2, 2, true},
      {10, 2, 128, 2, 2, false},
  };
  a.fc_units = 1024;
  a.classes = 4;
  a.dropout_p = 0.25;
  return a;
}

ArchitectureConfig ArchitectureConfig::desk_scale() {
  ArchitectureConfig a;
  a.blocks = {
      {16, 4, 8, 4, 2, true},
      {8, 2, 16, 2, 2, true},
      {4, 2, 32, 2, 1, false},
  };
  a.fc_units = 64;
  a.classes = 4;
  a.dropout_p = 0.25;
  return a;
}

Network build_network(const ArchitectureConfig& arch, Index channels,
                      Index samples, Rng& rng) {
  if (arch.blocks.empty())
    throw std::invalid_argument("architecture needs at least one block");
  if (arch.classes < 2)
    throw std::invalid_argument("architecture needs at least two classes");
  Network net({1, channels, samples});
  for (const ConvBlockConfig& b : arch.blocks) {
    net.add(LayerSpec::conv2d(b.filters, b.kernel_channels, b.kernel_time));
    net.add(LayerSpec::relu());
    net.add(LayerSpec::maxpool2d(b.pool_channels, b.pool_time));
    if (b.normalize) net.add(LayerSpec::amplitude_norm());
  }
  net.add(LayerSpec::flatten());
  net.add(LayerSpec::dense(arch.fc_units));
  net.add(LayerSpec::sigmoid());
  if (arch.dropout_p > 0) net.add(LayerSpec::dropout(arch.dropout_p));
  net.add(LayerSpec::dense(arch.classes));

  for (Layer& l : net.layers()) {
    if (!l.spec.has_weights()) continue;
    l.weights = glorot_init<Real>(l.weights.shape(), rng);
    l.bias = uniform_init<Real>(l.bias.shape(), 0.0, 0.1, rng);
  }
  return net;
}

TrainHistory train(Network& net, const std::vector<Tensord>& inputs,
                   const std::vector<int>& labels, const TrainConfig& cfg) {
  if (inputs.size() != labels.size())
    throw std::invalid_argument("train: input/label count mismatch");
  if (cfg.batch_size < 1 || cfg.max_iterations < 1)
    throw std::invalid_argument("train: batch size and iterations must be >= 1");
  if (inputs.size() < static_cast<std::size_t>(cfg.batch_size))
    throw std::invalid_argument("train: need at least batch_size trials");
  if (cfg.lr < 0) throw std::invalid_argument("train: negative learning rate");

  Rng rng(cfg.seed);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr > 0 ? cfg.lr : 1.0;  // placeholder when updates are off
  adam_cfg.decay = cfg.decay;
  adam_cfg.beta1 = cfg.adam_beta1;
  adam_cfg.beta2 = cfg.adam_beta2;
  adam_cfg.epsilon = cfg.adam_epsilon;
  std::vector<Tensord*> params = net.parameters();
  AdamState adam(adam_cfg,
                 std::vector<const Tensord*>(params.begin(), params.end()));
  const bool update = cfg.lr > 0;

  TrainHistory history;
  Real best = std::numeric_limits<Real>::infinity();
  int plateau = 0;

  std::vector<Tensord> grads(params.size());
  std::vector<LayerCache> caches;
  ForwardOptions fwd;
  fwd.train_mode = true;
  fwd.rng = &rng;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    const auto batch = rng.sample_indices(
        inputs.size(), static_cast<std::size_t>(cfg.batch_size));
    for (std::size_t k = 0; k < params.size(); ++k)
      grads[k] = Tensord(params[k]->shape());

    Real loss = 0;
    for (std::size_t idx : batch) {
      const Tensord logits = forward(net, inputs[idx], fwd, &caches);
      const auto sce = softmax_cross_entropy(logits, labels[idx]);
      loss += sce.loss;
      NetworkGrads g = backward(net, caches, sce.grad_logits);
      std::size_t slot = 0;
      for (std::size_t li = 0; li < net.layers().size(); ++li) {
        if (!net.layers()[li].spec.has_weights()) continue;
        grads[slot].array() += g.weights[li].array();
        grads[slot + 1].array() += g.biases[li].array();
        slot += 2;
      }
    }
    const Real scale = Real(1) / static_cast<Real>(batch.size());
    loss *= scale;
    for (Tensord& g : grads) g.array() *= scale;

    if (!std::isfinite(loss))
      throw std::runtime_error("training diverged: non-finite loss at iteration " +
                               std::to_string(iter));

    if (update) adam_step(params, grads, adam);

    history.loss.push_back(loss);
    history.iterations = iter;

    if (loss < best - cfg.early_stop.min_delta) {
      best = loss;
      plateau = 0;
    } else if (cfg.early_stop.enabled &&
               ++plateau >= cfg.early_stop.patience) {
      history.stopped_early = true;
      break;
    }
  }
  return history;
}

Prediction predict(const Network& net, const Tensord& trial) {
  Prediction p;
  const Tensord logits = forward(net, trial);
  p.probs = softmax(logits);
  p.predicted = 0;
  for (Index i = 1; i < p.probs.size(); ++i)
    if (p.probs[i] > p.probs[p.predicted]) p.predicted = static_cast<int>(i);
  return p;
}

Real training_accuracy(const Network& net, const std::vector<Tensord>& inputs,
                       const std::vector<int>& labels) {
  if (inputs.empty()) return 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (predict(net, inputs[i]).predicted == labels[i]) ++hits;
  return static_cast<Real>(hits) / static_cast<Real>(inputs.size());
}

Real LotoResult::accuracy() const {
  return confusion.total() > 0 ? macro_metrics(confusion).accuracy : 0.0;
}

LotoResult run_loto(const std::vector<Tensord>& inputs,
                    const std::vector<int>& labels,
                    const std::vector<std::string>& trial_ids, Index classes,
                    const ArchitectureConfig& arch, const TrainConfig& cfg,
                    int jobs, const FoldHook& hook) {
  const std::size_t n = inputs.size();
  if (n < 2) throw std::invalid_argument("run_loto needs at least 2 trials");
  if (labels.size() != n || trial_ids.size() != n)
    throw std::invalid_argument("run_loto: trial metadata count mismatch");

  LotoResult result;
  result.folds.resize(n);
  result.confusion = ConfusionMatrix(static_cast<int>(classes));

  const Index channels = inputs.front().extent(inputs.front().rank() - 2);
  const Index samples = inputs.front().extent(inputs.front().rank() - 1);

  parallel_for(n, jobs, [&](std::size_t fold) {
    FoldResult& fr = result.folds[fold];
    fr.trial_id = trial_ids[fold];
    fr.true_label = labels[fold];
    try {
      std::vector<Tensord> train_inputs;
      std::vector<int> train_labels;
      train_inputs.reserve(n - 1);
      train_labels.reserve(n - 1);
      for (std::size_t i = 0; i < n; ++i) {
        if (i == fold) continue;
        train_inputs.push_back(inputs[i]);
        train_labels.push_back(labels[i]);
      }
      const std::uint64_t fold_seed = combine_seed(cfg.seed, fold);
      Rng init_rng(combine_seed(fold_seed, 0));
      Network net = build_network(arch, channels, samples, init_rng);

      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = combine_seed(fold_seed, 1);
      const TrainHistory h = train(net, train_inputs, train_labels, fold_cfg);
      fr.iterations = h.iterations;
      fr.stopped_early = h.stopped_early;

      const Prediction p = predict(net, inputs[fold]);
      fr.predicted = p.predicted;
      fr.probs = p.probs;
      if (hook) hook(fold, net, fr);
    } catch (const std::exception& e) {
      fr.failed = true;
      fr.error = e.what();
    }
  });

  for (const FoldResult& fr : result.folds) {
    if (fr.failed) {
      ++result.failed_folds;
      continue;
    }
    result.confusion.record(fr.true_label, fr.predicted);
  }
  return result;
}

}  // namespace eegroar
