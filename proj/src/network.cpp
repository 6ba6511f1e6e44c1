#include "eegroar/network.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace eegroar {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kAmplitudeNorm: return "amplitude_norm";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv2d(Index filters, Index kernel_rows, Index kernel_cols,
                            Index stride_rows, Index stride_cols) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.filters = filters;
  s.kernel_rows = kernel_rows;
  s.kernel_cols = kernel_cols;
  s.stride_rows = stride_rows;
  s.stride_cols = stride_cols;
  return s;
}

LayerSpec LayerSpec::maxpool2d(Index pool_rows, Index pool_cols) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool2d;
  s.pool_rows = pool_rows;
  s.pool_cols = pool_cols;
  return s;
}

LayerSpec LayerSpec::dense(Index units) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::relu() { return {LayerKind::kRelu}; }
LayerSpec LayerSpec::sigmoid() { return {LayerKind::kSigmoid}; }

LayerSpec LayerSpec::dropout(Real p) {
  LayerSpec s;
  s.kind = LayerKind::kDropout;
  s.dropout_p = p;
  return s;
}

LayerSpec LayerSpec::amplitude_norm() { return {LayerKind::kAmplitudeNorm}; }
LayerSpec LayerSpec::flatten() { return {LayerKind::kFlatten}; }

Network::Network(Shape input_shape) : input_shape_(std::move(input_shape)) {
  Tensord::count(input_shape_);  // validates extents
}

const Shape& Network::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back().output_shape;
}

Index Network::class_count() const {
  const Shape& out = output_shape();
  if (out.size() != 1)
    throw std::logic_error("network does not end in a flat logit layer");
  return out[0];
}

namespace {

[[noreturn]] void layer_error(std::size_t index, const LayerSpec& spec,
                              const std::string& detail) {
  throw std::invalid_argument("layer " + std::to_string(index) + " (" +
                              layer_kind_name(spec.kind) + "): " + detail);
}

}  // namespace

Layer& Network::add(const LayerSpec& spec) {
  const Shape in = output_shape();
  const std::size_t index = layers_.size();
  Layer layer;
  layer.spec = spec;
  layer.input_shape = in;
  switch (spec.kind) {
    case LayerKind::kConv2d: {
      if (in.size() != 3)
        layer_error(index, spec, "expects rank-3 input, got " +
                                     shape_to_string(in));
      if (spec.filters < 1) layer_error(index, spec, "needs filters >= 1");
      if (spec.kernel_rows < 1 || spec.kernel_cols < 1)
        layer_error(index, spec, "kernel extents must be >= 1");
      if (spec.stride_rows < 1 || spec.stride_cols < 1)
        layer_error(index, spec, "stride must be >= 1");
      if (spec.kernel_rows > in[1] || spec.kernel_cols > in[2])
        layer_error(index, spec,
                    "kernel " + std::to_string(spec.kernel_rows) + "x" +
                        std::to_string(spec.kernel_cols) +
                        " exceeds input extents " + shape_to_string(in));
      const Index oh = (in[1] - spec.kernel_rows) / spec.stride_rows + 1;
      const Index ow = (in[2] - spec.kernel_cols) / spec.stride_cols + 1;
      layer.weights =
          Tensord({spec.filters, in[0], spec.kernel_rows, spec.kernel_cols});
      layer.bias = Tensord({spec.filters});
      layer.output_shape = {spec.filters, oh, ow};
      break;
    }
    case LayerKind::kMaxPool2d: {
      if (in.size() != 3)
        layer_error(index, spec, "expects rank-3 input, got " +
                                     shape_to_string(in));
      if (spec.pool_rows < 1 || spec.pool_cols < 1)
        layer_error(index, spec, "pool window must be >= 1");
      if (spec.pool_rows > in[1] || spec.pool_cols > in[2])
        layer_error(index, spec,
                    "pool window " + std::to_string(spec.pool_rows) + "x" +
                        std::to_string(spec.pool_cols) +
                        " exceeds input extents " + shape_to_string(in));
      layer.output_shape = {in[0], in[1] / spec.pool_rows,
                            in[2] / spec.pool_cols};
      break;
    }
    case LayerKind::kDense: {
      if (spec.units < 1) layer_error(index, spec, "needs units >= 1");
      const Index n = Tensord::count(in);
      layer.weights = Tensord({spec.units, n});
      layer.bias = Tensord({spec.units});
      layer.output_shape = {spec.units};
      break;
    }
    case LayerKind::kDropout: {
      if (spec.dropout_p < 0 || spec.dropout_p >= 1)
        layer_error(index, spec, "probability must be in [0,1)");
      layer.output_shape = in;
      break;
    }
    case LayerKind::kAmplitudeNorm: {
      if (in.size() != 3)
        layer_error(index, spec, "expects rank-3 input, got " +
                                     shape_to_string(in));
      layer.output_shape = in;
      break;
    }
    case LayerKind::kFlatten: {
      layer.output_shape = {Tensord::count(in)};
      break;
    }
    case LayerKind::kRelu:
    case LayerKind::kSigmoid: {
      layer.output_shape = in;
      break;
    }
  }
  layers_.push_back(std::move(layer));
  return layers_.back();
}

std::vector<Tensord*> Network::parameters() {
  std::vector<Tensord*> out;
  for (Layer& l : layers_) {
    if (!l.spec.has_weights()) continue;
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensord*> Network::parameters() const {
  std::vector<const Tensord*> out;
  for (const Layer& l : layers_) {
    if (!l.spec.has_weights()) continue;
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  return out;
}

bool Network::parameters_finite() const {
  for (const Layer& l : layers_) {
    if (!l.spec.has_weights()) continue;
    if (!l.weights.all_finite() || !l.bias.all_finite()) return false;
  }
  return true;
}

Tensord forward(const Network& net, const Tensord& input,
                const ForwardOptions& options,
                std::vector<LayerCache>* caches) {
  if (input.shape() != net.input_shape())
    throw std::invalid_argument("network input shape " +
                                shape_to_string(input.shape()) +
                                " does not match expected " +
                                shape_to_string(net.input_shape()));
  if (caches) {
    caches->clear();
    caches->resize(net.layers().size());
  }
  Tensord x = input;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const Layer& layer = net.layers()[i];
    LayerCache* cache = caches ? &(*caches)[i] : nullptr;
    if (cache) cache->input = x;
    switch (layer.spec.kind) {
      case LayerKind::kConv2d:
        x = conv2d_forward_with_col(x, layer.weights, layer.bias,
                                    layer.spec.stride_rows,
                                    layer.spec.stride_cols,
                                    cache ? &cache->conv_cols : nullptr);
        break;
      case LayerKind::kMaxPool2d: {
        auto r = maxpool2d_forward(x, layer.spec.pool_rows,
                                   layer.spec.pool_cols);
        x = std::move(r.output);
        if (cache) cache->pool_argmax = std::move(r.argmax);
        break;
      }
      case LayerKind::kDense:
        x = dense_forward(x.reshaped({x.size()}), layer.weights, layer.bias);
        break;
      case LayerKind::kRelu:
        x = relu_forward(x);
        break;
      case LayerKind::kSigmoid:
        x = sigmoid_forward(x);
        break;
      case LayerKind::kDropout:
        if (options.train_mode) {
          if (!options.rng)
            throw std::logic_error("dropout in train mode needs an rng");
          Tensord mask;
          x = dropout_forward(x, layer.spec.dropout_p, *options.rng, mask);
          if (cache) cache->dropout_mask = std::move(mask);
        }
        break;
      case LayerKind::kAmplitudeNorm: {
        AmplitudeNormState<Real> state;
        x = amplitude_norm_forward(x, state);
        if (cache) cache->norm = std::move(state);
        break;
      }
      case LayerKind::kFlatten:
        x = x.reshaped({x.size()});
        break;
    }
    if (cache) cache->output = x;
  }
  return x;
}

namespace {

Tensord layer_backward(const Layer& layer, const LayerCache& cache,
                       const Tensord& grad_out, const Tensord* weights,
                       Tensord* grad_weights, Tensord* grad_bias) {
  switch (layer.spec.kind) {
    case LayerKind::kConv2d: {
      if (grad_weights) {
        auto g = conv2d_backward(cache.input, *weights, grad_out,
                                 layer.spec.stride_rows,
                                 layer.spec.stride_cols, &cache.conv_cols);
        *grad_weights = std::move(g.weights);
        *grad_bias = std::move(g.bias);
        return std::move(g.input);
      }
      return conv2d_backward_input(*weights, grad_out, cache.input.shape(),
                                   layer.spec.stride_rows,
                                   layer.spec.stride_cols);
    }
    case LayerKind::kMaxPool2d:
      return maxpool2d_backward(cache.pool_argmax, grad_out,
                                cache.input.shape());
    case LayerKind::kDense: {
      const Tensord flat_in = cache.input.reshaped({cache.input.size()});
      if (grad_weights) {
        auto g = dense_backward(flat_in, *weights, grad_out);
        *grad_weights = std::move(g.weights);
        *grad_bias = std::move(g.bias);
        return g.input.reshaped(cache.input.shape());
      }
      return dense_backward_input(*weights, grad_out, {cache.input.size()})
          .reshaped(cache.input.shape());
    }
    case LayerKind::kRelu:
      return relu_backward(cache.input, grad_out);
    case LayerKind::kSigmoid:
      return sigmoid_backward(cache.output, grad_out);
    case LayerKind::kDropout:
      if (cache.dropout_mask.size() > 0)
        return dropout_backward(cache.dropout_mask, grad_out);
      return grad_out;
    case LayerKind::kAmplitudeNorm:
      return amplitude_norm_backward(cache.input, cache.norm, grad_out);
    case LayerKind::kFlatten:
      return grad_out.reshaped(cache.input.shape());
  }
  throw std::logic_error("unhandled layer kind in backward");
}

void check_caches(const Network& net, const std::vector<LayerCache>& caches) {
  if (caches.size() != net.layers().size())
    throw std::logic_error(
        "backward called without caches from a matching forward pass");
}

}  // namespace

NetworkGrads backward(const Network& net, const std::vector<LayerCache>& caches,
                      const Tensord& grad_logits) {
  check_caches(net, caches);
  NetworkGrads grads;
  grads.weights.resize(net.layers().size());
  grads.biases.resize(net.layers().size());
  Tensord g = grad_logits;
  for (std::size_t i = net.layers().size(); i-- > 0;) {
    const Layer& layer = net.layers()[i];
    Tensord* gw = layer.spec.has_weights() ? &grads.weights[i] : nullptr;
    Tensord* gb = layer.spec.has_weights() ? &grads.biases[i] : nullptr;
    g = layer_backward(layer, caches[i], g, &layer.weights, gw, gb);
  }
  grads.input = std::move(g);
  return grads;
}

Tensord backward_input(const Network& net,
                       const std::vector<LayerCache>& caches,
                       const Tensord& grad_logits,
                       const std::vector<Tensord>* weight_override) {
  check_caches(net, caches);
  if (weight_override && weight_override->size() != net.layers().size())
    throw std::invalid_argument(
        "weight override list must have one entry per layer");
  Tensord g = grad_logits;
  for (std::size_t i = net.layers().size(); i-- > 0;) {
    const Layer& layer = net.layers()[i];
    const Tensord* w = &layer.weights;
    if (weight_override && layer.spec.has_weights()) {
      const Tensord& sub = (*weight_override)[i];
      if (!sub.same_shape(layer.weights))
        throw std::invalid_argument(
            "weight override shape mismatch at layer " + std::to_string(i));
      w = &sub;
    }
    g = layer_backward(layer, caches[i], g, w, nullptr, nullptr);
  }
  return g;
}

// --- serialization ----------------------------------------------------------

namespace {

constexpr const char* kMagic = "eegroar-network";
constexpr int kVersion = 1;

void write_values(std::ostream& os, const Tensord& t) {
  char buf[32];
  for (Index i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", t[i]);
    os << buf << (i + 1 == t.size() ? "" : " ");
    if ((i + 1) % 8 == 0 && i + 1 != t.size()) os << "\n";
  }
  os << "\n";
}

Tensord read_values(std::istream& is, Shape shape) {
  Tensord t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) {
    if (!(is >> t[i]))
      throw std::runtime_error("network file truncated while reading values");
  }
  return t;
}

}  // namespace

void write_network(const Network& net, std::ostream& os) {
  os << kMagic << " " << kVersion << "\n";
  os << "input";
  for (Index e : net.input_shape()) os << " " << e;
  os << "\n";
  os << "layers " << net.layers().size() << "\n";
  for (const Layer& l : net.layers()) {
    os << "layer " << layer_kind_name(l.spec.kind);
    switch (l.spec.kind) {
      case LayerKind::kConv2d:
        os << " " << l.spec.filters << " " << l.spec.kernel_rows << " "
           << l.spec.kernel_cols << " " << l.spec.stride_rows << " "
           << l.spec.stride_cols;
        break;
      case LayerKind::kMaxPool2d:
        os << " " << l.spec.pool_rows << " " << l.spec.pool_cols;
        break;
      case LayerKind::kDense:
        os << " " << l.spec.units;
        break;
      case LayerKind::kDropout: {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", l.spec.dropout_p);
        os << " " << buf;
        break;
      }
      default:
        break;
    }
    os << "\n";
    if (l.spec.has_weights()) {
      write_values(os, l.weights);
      write_values(os, l.bias);
    }
  }
  os << "end\n";
}

Network read_network(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic)
    throw std::runtime_error("not a network file (bad magic)");
  if (version != kVersion)
    throw std::runtime_error("unsupported network file version " +
                             std::to_string(version));
  std::string tok;
  if (!(is >> tok) || tok != "input")
    throw std::runtime_error("network file: expected input shape");
  Shape input_shape;
  {
    std::string line;
    std::getline(is, line);
    std::istringstream ls(line);
    Index e;
    while (ls >> e) input_shape.push_back(e);
  }
  std::size_t layer_count = 0;
  if (!(is >> tok >> layer_count) || tok != "layers")
    throw std::runtime_error("network file: expected layer count");

  Network net(input_shape);
  for (std::size_t i = 0; i < layer_count; ++i) {
    std::string kind;
    if (!(is >> tok >> kind) || tok != "layer")
      throw std::runtime_error("network file: expected layer " +
                               std::to_string(i));
    LayerSpec spec;
    if (kind == "conv2d") {
      is >> spec.filters >> spec.kernel_rows >> spec.kernel_cols >>
          spec.stride_rows >> spec.stride_cols;
      spec.kind = LayerKind::kConv2d;
    } else if (kind == "maxpool2d") {
      is >> spec.pool_rows >> spec.pool_cols;
      spec.kind = LayerKind::kMaxPool2d;
    } else if (kind == "dense") {
      is >> spec.units;
      spec.kind = LayerKind::kDense;
    } else if (kind == "dropout") {
      is >> spec.dropout_p;
      spec.kind = LayerKind::kDropout;
    } else if (kind == "relu") {
      spec.kind = LayerKind::kRelu;
    } else if (kind == "sigmoid") {
      spec.kind = LayerKind::kSigmoid;
    } else if (kind == "amplitude_norm") {
      spec.kind = LayerKind::kAmplitudeNorm;
    } else if (kind == "flatten") {
      spec.kind = LayerKind::kFlatten;
    } else {
      throw std::runtime_error("network file: unknown layer kind '" + kind +
                               "'");
    }
    if (!is) throw std::runtime_error("network file: bad layer header");
    Layer& layer = net.add(spec);
    if (spec.has_weights()) {
      layer.weights = read_values(is, layer.weights.shape());
      layer.bias = read_values(is, layer.bias.shape());
    }
  }
  if (!(is >> tok) || tok != "end")
    throw std::runtime_error("network file: missing end marker");
  return net;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_network(net, os);
  if (!os) throw std::runtime_error("failed writing network to " + path);
}

Network load_network(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open network file " + path);
  return read_network(is);
}

}  // namespace eegroar
