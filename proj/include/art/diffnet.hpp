#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "art/error.hpp"

namespace art {

using Vector = std::vector<double>;

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// One affine map `y = W x + b`, optionally followed by an element-wise ReLU.
struct LayerSpec {
  Matrix weights;  // out_dim x in_dim
  Vector bias;     // out_dim
  bool apply_relu = false;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }

  bool operator==(const LayerSpec&) const = default;
};

/// Fully-connected ReLU network `f_Q . relu . f_{Q-1} ... relu . f_1`.
///
/// Layers are validated on construction: dimensions must chain, every entry
/// must be finite and the last layer must not apply a ReLU. Every mutation
/// through `mutable_layer` assigns a fresh revision number, which caches
/// (e.g. region losses) use to detect staleness.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<LayerSpec> layers);

  /// Random network with the given layer widths `dims = {d, h1, ..., e}`.
  /// Hidden layers use ReLU; weights are uniform in +-1/sqrt(fan_in) and
  /// biases start at zero.
  static Network random(std::span<const std::size_t> dims, std::uint64_t seed);

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_parameters() const;

  const LayerSpec& layer(std::size_t k) const { return layers_.at(k); }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  LayerSpec& mutable_layer(std::size_t k);

  std::uint64_t revision() const { return revision_; }

  bool same_parameters(const Network& other) const { return layers_ == other.layers_; }

 private:
  std::vector<LayerSpec> layers_;
  std::uint64_t revision_ = 0;
};

/// Recorded forward pass. Concrete tapes only fill `lower`; interval tapes
/// fill both bounds. `activations[k]` is the input of layer k and
/// `activations[Q]` the network output; `pre[k]` is layer k's affine output
/// before the (optional) ReLU.
struct Tape {
  enum class Kind { concrete, interval };

  struct Values {
    Vector lower;
    Vector upper;
  };

  const Network* net = nullptr;
  Kind kind = Kind::concrete;
  std::vector<Values> activations;
  std::vector<Values> pre;

  bool has_loss = false;
  double loss = 0.0;
  Values loss_grad;  // d loss / d output (lower and, for intervals, upper)

  const Vector& output() const { return activations.back().lower; }
  const Vector& output_upper() const { return activations.back().upper; }

  /// Terminates the tape in a scalar loss with the given output gradient.
  void attach_loss(double value, Vector grad_lower, Vector grad_upper = {});
};

/// Gradients of a scalar loss. `d_input_*` are filled only for interval tapes.
struct GradientBundle {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_bias;
  Vector d_input_lower;
  Vector d_input_upper;

  static GradientBundle zeros_like(const Network& net);

  /// this += scale * other (weight and bias parts only).
  void accumulate(const GradientBundle& other, double scale = 1.0);
  double squared_norm() const;
};

struct ForwardResult {
  Vector output;
  Tape tape;
};

/// Concrete forward pass with a tape for `backward`.
ForwardResult forward(const Network& net, std::span<const double> x);

/// Concrete forward pass without recording.
Vector evaluate(const Network& net, std::span<const double> x);

/// Reverse sweep. The tape must carry a loss (see `Tape::attach_loss`);
/// `seed` scales the result. ReLU units whose pre-activation is exactly zero
/// pass no gradient.
GradientBundle backward(const Tape& tape, double seed = 1.0);

/// Plain gradient descent: every parameter moves by `-lr * gradient`.
Network sgd_step(const Network& net, const GradientBundle& grads, double lr);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

struct AdamResult {
  Network net;
  AdamState state;
};

/// Bias-corrected Adam update. An empty state is sized on first use.
AdamResult adam_step(AdamState state, const Network& net, const GradientBundle& grads, double lr);

// Plain-text network format (see network_io.cpp).
std::string network_to_text(const Network& net);
Network network_from_text(const std::string& text);
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace art
