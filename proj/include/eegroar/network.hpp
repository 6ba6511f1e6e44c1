#ifndef EEGROAR_NETWORK_HPP
#define EEGROAR_NETWORK_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "eegroar/layers.hpp"
#include "eegroar/tensor.hpp"

namespace eegroar {

enum class LayerKind {
  kConv2d,
  kMaxPool2d,
  kDense,
  kRelu,
  kSigmoid,
  kDropout,
  kAmplitudeNorm,
  kFlatten,
};

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  Index kernel_rows = 0, kernel_cols = 0;  // conv2d
  Index filters = 0;                       // conv2d
  Index stride_rows = 1, stride_cols = 1;  // conv2d
  Index pool_rows = 0, pool_cols = 0;      // maxpool2d
  Index units = 0;                         // dense
  Real dropout_p = 0.0;                    // dropout

  static LayerSpec conv2d(Index filters, Index kernel_rows, Index kernel_cols,
                          Index stride_rows = 1, Index stride_cols = 1);
  static LayerSpec maxpool2d(Index pool_rows, Index pool_cols);
  static LayerSpec dense(Index units);
  static LayerSpec relu();
  static LayerSpec sigmoid();
  static LayerSpec dropout(Real p);
  static LayerSpec amplitude_norm();
  static LayerSpec flatten();

  bool has_weights() const {
    return kind == LayerKind::kConv2d || kind == LayerKind::kDense;
  }
};

struct Layer {
  LayerSpec spec;
  Tensord weights;  // conv: [F,C,kh,kw]; dense: [units,n]
  Tensord bias;     // conv: [F]; dense: [units]
  Shape input_shape;
  Shape output_shape;
};

/// Per-layer forward state retained for backward and relevance passes.
/// Populated only by forward(..., caches != nullptr).
struct LayerCache {
  Tensord input;
  Tensord output;
  std::vector<Index> pool_argmax;
  Tensord dropout_mask;
  AmplitudeNormState<Real> norm;
  RowMatrix<Real> conv_cols;  // patch matrix kept for the weight gradient
};

/// Feed-forward layer stack ending at the class logits. Probabilities are
/// produced by the softmax head in the prediction/loss path.
class Network {
 public:
  Network() = default;
  explicit Network(Shape input_shape);

  /// Appends a layer, tracing extents through the stack. Throws
  /// std::invalid_argument naming the layer when the trace breaks.
  Layer& add(const LayerSpec& spec);

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;

  Index class_count() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<Tensord*> parameters();
  std::vector<const Tensord*> parameters() const;

  bool parameters_finite() const;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
};

struct ForwardOptions {
  bool train_mode = false;  // enables dropout; requires rng
  Rng* rng = nullptr;
};

/// Runs the stack and returns the logits. When `caches` is non-null one
/// cache per layer is recorded for the backward/relevance passes.
Tensord forward(const Network& net, const Tensord& input,
                const ForwardOptions& options = {},
                std::vector<LayerCache>* caches = nullptr);

struct NetworkGrads {
  std::vector<Tensord> weights;  // empty tensor for unweighted layers
  std::vector<Tensord> biases;
  Tensord input;
};

/// Full gradient pass: parameter gradients plus the input gradient.
NetworkGrads backward(const Network& net, const std::vector<LayerCache>& caches,
                      const Tensord& grad_logits);

/// Input gradient only. `weight_override`, when given, substitutes the
/// backward-direction weights of each weighted layer (indexed by layer);
/// passing the layer's own weights reproduces `backward`'s input gradient
/// exactly.
Tensord backward_input(const Network& net,
                       const std::vector<LayerCache>& caches,
                       const Tensord& grad_logits,
                       const std::vector<Tensord>* weight_override = nullptr);

/// Versioned text dump; parameters round-trip bit-exactly.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);
void write_network(const Network& net, std::ostream& os);
Network read_network(std::istream& is);

}  // namespace eegroar

#endif  // EEGROAR_NETWORK_HPP
