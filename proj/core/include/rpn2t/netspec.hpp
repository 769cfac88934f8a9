#pragma once

#include <string>
#include <vector>

#include "rpn2t/ops.hpp"
#include "rpn2t/tensor.hpp"
#include "rpn2t/weights.hpp"

namespace rpn2t {

enum class LayerKind { Conv, MaxPool, Relu };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int out_channels = 0;  // conv only
  bool ceil_mode = false;  // pool only

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Ordered chain of layers applied to a square input.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  int input_size = 0;
  int input_channels = 3;

  // Names unique, windows sane, every intermediate size positive at input_size.
  void validate() const;
  int index_of(const std::string& name) const;
  int count(LayerKind kind) const;
  // Channels produced by the last conv (or the input when there is none).
  int output_channels() const;

  // Text form: `input <size> [channels]` then one layer per line,
  // `name kind kernel stride pad channels [ceil]`. '#' starts a comment.
  std::string to_text() const;
  static NetworkSpec parse(const std::string& text);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct RFInfo {
  int rf = 1;
  int jump = 1;
  int size = 0;  // cells per axis at the spec's input size
};

RFInfo receptive_field(const NetworkSpec& spec, const std::string& upto_layer);

// Spatial size after every layer for the given input.
std::vector<int> layer_output_sizes(const NetworkSpec& spec, int input);
int output_size(const NetworkSpec& spec, int input);

// ZF-style backbone with the given conv widths (conv1..conv5), input 203.
NetworkSpec zf_teacher_spec(const std::vector<int>& widths);
NetworkSpec reference_teacher_spec();  // 96/256/384/384/256
NetworkSpec tiny_teacher_spec();       // 8/16/24/24/16

// The 3x3 score conv the tracking head places on top of the backbone.
inline constexpr const char* kScoreLayer = "score";
NetworkSpec with_score_layer(const NetworkSpec& backbone, int channels = 256);

/// Drops the first two max-pool layers and multiplies the stride of the first
/// conv that followed the first dropped pool by (product of dropped pool
/// strides) / 2. Kernels and channel counts are untouched. Throws UsageError
/// when fewer than two pools exist and DataError when the student at
/// `student_input` does not reproduce the teacher's output size.
NetworkSpec surgery(const NetworkSpec& teacher, int student_input = 107);

/// A NetworkSpec bound to concrete weights (`<layer>.weight`, `<layer>.bias`).
class Network {
 public:
  struct Trace {
    std::vector<Tensor> inputs;  // input of each layer
    std::vector<PoolResult<float>> pools;
    Tensor output;
  };

  Network(NetworkSpec spec, WeightSet weights);
  // He-normal weights, zero biases.
  static Network random(const NetworkSpec& spec, Rng& rng);
  static Network zeros(const NetworkSpec& spec);

  const NetworkSpec& spec() const { return spec_; }
  const WeightSet& weights() const { return weights_; }

  Tensor forward(const Tensor& input) const;
  Tensor forward(const Tensor& input, Trace& trace) const;
  // Accumulates parameter gradients; returns nothing for the input.
  void backward(const Trace& trace, const Tensor& grad_output);

  std::vector<Tensor*> parameters();
  void zero_grad();

 private:
  NetworkSpec spec_;
  WeightSet weights_;
};

// Shapes every conv in `spec` requires, in layer order.
std::vector<std::pair<std::string, std::vector<int>>> expected_weight_shapes(
    const NetworkSpec& spec);

}  // namespace rpn2t
