#include "art/diffnet.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <string>

namespace art {

namespace {

std::atomic<std::uint64_t> g_next_revision{1};

std::uint64_t fresh_revision() { return g_next_revision.fetch_add(1, std::memory_order_relaxed); }

void check_finite(const std::vector<double>& values, const char* what, std::size_t layer) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("layer " + std::to_string(layer) + ": non-finite " + what);
    }
  }
}

void check_grad_shapes(const Network& net, const GradientBundle& grads) {
  if (grads.d_weights.size() != net.num_layers() || grads.d_bias.size() != net.num_layers()) {
    throw ShapeError("gradient bundle has " + std::to_string(grads.d_weights.size()) +
                     " layers, network has " + std::to_string(net.num_layers()));
  }
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const auto& layer = net.layer(k);
    if (grads.d_weights[k].rows != layer.out_dim() || grads.d_weights[k].cols != layer.in_dim() ||
        grads.d_bias[k].size() != layer.out_dim()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(k));
    }
  }
}

}  // namespace

Network::Network(std::vector<LayerSpec> layers) : layers_(std::move(layers)), revision_(fresh_revision()) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto& layer = layers_[k];
    if (layer.weights.rows == 0 || layer.weights.cols == 0 ||
        layer.weights.data.size() != layer.weights.rows * layer.weights.cols) {
      throw ShapeError("layer " + std::to_string(k) + ": empty or inconsistent weight matrix");
    }
    if (layer.bias.empty()) layer.bias.assign(layer.out_dim(), 0.0);
    if (layer.bias.size() != layer.out_dim()) {
      throw ShapeError("layer " + std::to_string(k) + ": bias has " + std::to_string(layer.bias.size()) +
                       " entries, expected " + std::to_string(layer.out_dim()));
    }
    if (k > 0 && layer.in_dim() != layers_[k - 1].out_dim()) {
      throw ShapeError("layer " + std::to_string(k) + ": input width " + std::to_string(layer.in_dim()) +
                       " does not match previous output width " + std::to_string(layers_[k - 1].out_dim()));
    }
    check_finite(layer.weights.data, "weight", k);
    check_finite(layer.bias, "bias", k);
  }
  if (layers_.back().apply_relu) throw ShapeError("the output layer must be linear");
}

Network Network::random(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw ShapeError("need at least input and output widths");
  std::mt19937_64 rng(seed);
  std::vector<LayerSpec> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t fan_in = dims[k];
    const std::size_t fan_out = dims[k + 1];
    if (fan_in == 0 || fan_out == 0) throw ShapeError("layer widths must be positive");
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    LayerSpec layer{Matrix(fan_out, fan_in), Vector(fan_out, 0.0), k + 2 < dims.size()};
    for (double& w : layer.weights.data) w = dist(rng);
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

std::size_t Network::num_parameters() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.data.size() + layer.bias.size();
  return n;
}

LayerSpec& Network::mutable_layer(std::size_t k) {
  revision_ = fresh_revision();
  return layers_.at(k);
}

void Tape::attach_loss(double value, Vector grad_lower, Vector grad_upper) {
  if (activations.empty()) throw UsageError("cannot attach a loss to an empty tape");
  const std::size_t e = activations.back().lower.size();
  if (grad_lower.size() != e) throw ShapeError("loss gradient does not match the output width");
  if (kind == Kind::interval) {
    if (grad_upper.size() != e) throw ShapeError("interval loss needs an upper-bound gradient");
  } else if (!grad_upper.empty()) {
    throw ShapeError("concrete tapes take a single output gradient");
  }
  has_loss = true;
  loss = value;
  loss_grad.lower = std::move(grad_lower);
  loss_grad.upper = std::move(grad_upper);
}

GradientBundle GradientBundle::zeros_like(const Network& net) {
  GradientBundle g;
  for (const auto& layer : net.layers()) {
    g.d_weights.emplace_back(layer.out_dim(), layer.in_dim());
    g.d_bias.emplace_back(layer.out_dim(), 0.0);
  }
  return g;
}

void GradientBundle::accumulate(const GradientBundle& other, double scale) {
  if (d_weights.empty()) {
    d_weights.reserve(other.d_weights.size());
    for (const auto& m : other.d_weights) d_weights.emplace_back(m.rows, m.cols);
    for (const auto& b : other.d_bias) d_bias.emplace_back(b.size(), 0.0);
  }
  if (other.d_weights.size() != d_weights.size()) throw ShapeError("cannot add gradients of different networks");
  for (std::size_t k = 0; k < d_weights.size(); ++k) {
    auto& w = d_weights[k].data;
    const auto& ow = other.d_weights[k].data;
    if (w.size() != ow.size() || d_bias[k].size() != other.d_bias[k].size()) {
      throw ShapeError("cannot add gradients of different networks");
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * ow[i];
    for (std::size_t j = 0; j < d_bias[k].size(); ++j) d_bias[k][j] += scale * other.d_bias[k][j];
  }
}

double GradientBundle::squared_norm() const {
  double s = 0.0;
  for (const auto& m : d_weights)
    for (double v : m.data) s += v * v;
  for (const auto& b : d_bias)
    for (double v : b) s += v * v;
  return s;
}

ForwardResult forward(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " entries, network expects " +
                     std::to_string(net.input_dim()));
  }
  Tape tape;
  tape.net = &net;
  tape.kind = Tape::Kind::concrete;
  tape.activations.reserve(net.num_layers() + 1);
  tape.pre.reserve(net.num_layers());
  tape.activations.push_back({Vector(x.begin(), x.end()), {}});

  for (const auto& layer : net.layers()) {
    const Vector& in = tape.activations.back().lower;
    Vector z(layer.out_dim());
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      double acc = layer.bias[j];
      const auto w = layer.weights.row(j);
      for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * in[i];
      z[j] = acc;
    }
    Vector a = z;
    if (layer.apply_relu) {
      for (double& v : a) v = v > 0.0 ? v : 0.0;
    }
    tape.pre.push_back({std::move(z), {}});
    tape.activations.push_back({std::move(a), {}});
  }
  Vector y = tape.activations.back().lower;
  return {std::move(y), std::move(tape)};
}

Vector evaluate(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim()) throw ShapeError("input dimension mismatch");
  Vector in(x.begin(), x.end());
  Vector out;
  for (const auto& layer : net.layers()) {
    out.assign(layer.out_dim(), 0.0);
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      double acc = layer.bias[j];
      const auto w = layer.weights.row(j);
      for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * in[i];
      out[j] = layer.apply_relu && !(acc > 0.0) ? 0.0 : acc;
    }
    in.swap(out);
  }
  return in;
}

namespace {

GradientBundle backward_concrete(const Tape& tape, double seed) {
  const Network& net = *tape.net;
  GradientBundle g = GradientBundle::zeros_like(net);
  Vector delta = tape.loss_grad.lower;
  for (double& v : delta) v *= seed;

  for (std::size_t k = net.num_layers(); k-- > 0;) {
    const auto& layer = net.layer(k);
    if (layer.apply_relu) {
      const Vector& z = tape.pre[k].lower;
      for (std::size_t j = 0; j < delta.size(); ++j) {
        if (!(z[j] > 0.0)) delta[j] = 0.0;
      }
    }
    const Vector& in = tape.activations[k].lower;
    Vector next(layer.in_dim(), 0.0);
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      const double dj = delta[j];
      g.d_bias[k][j] += dj;
      if (dj == 0.0) continue;
      for (std::size_t i = 0; i < layer.in_dim(); ++i) {
        g.d_weights[k](j, i) += dj * in[i];
        next[i] += dj * layer.weights(j, i);
      }
    }
    delta = std::move(next);
  }
  return g;
}

// Interval affine map: lower_j = b_j + sum_i (w >= 0 ? w lo_i : w hi_i) and
// symmetrically for upper_j. The reverse sweep routes each bound's gradient
// through whichever input bound was selected.
GradientBundle backward_interval(const Tape& tape, double seed) {
  const Network& net = *tape.net;
  GradientBundle g = GradientBundle::zeros_like(net);
  Vector d_lo = tape.loss_grad.lower;
  Vector d_hi = tape.loss_grad.upper;
  for (double& v : d_lo) v *= seed;
  for (double& v : d_hi) v *= seed;

  for (std::size_t k = net.num_layers(); k-- > 0;) {
    const auto& layer = net.layer(k);
    if (layer.apply_relu) {
      const auto& z = tape.pre[k];
      for (std::size_t j = 0; j < d_lo.size(); ++j) {
        if (!(z.lower[j] > 0.0)) d_lo[j] = 0.0;
        if (!(z.upper[j] > 0.0)) d_hi[j] = 0.0;
      }
    }
    const Vector& lo = tape.activations[k].lower;
    const Vector& hi = tape.activations[k].upper;
    Vector next_lo(layer.in_dim(), 0.0);
    Vector next_hi(layer.in_dim(), 0.0);
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
      const double gl = d_lo[j];
      const double gu = d_hi[j];
      g.d_bias[k][j] += gl + gu;
      if (gl == 0.0 && gu == 0.0) continue;
      for (std::size_t i = 0; i < layer.in_dim(); ++i) {
        const double w = layer.weights(j, i);
        if (w >= 0.0) {
          g.d_weights[k](j, i) += gl * lo[i] + gu * hi[i];
          next_lo[i] += gl * w;
          next_hi[i] += gu * w;
        } else {
          g.d_weights[k](j, i) += gl * hi[i] + gu * lo[i];
          next_hi[i] += gl * w;
          next_lo[i] += gu * w;
        }
      }
    }
    d_lo = std::move(next_lo);
    d_hi = std::move(next_hi);
  }
  g.d_input_lower = std::move(d_lo);
  g.d_input_upper = std::move(d_hi);
  return g;
}

}  // namespace

GradientBundle backward(const Tape& tape, double seed) {
  if (tape.net == nullptr || tape.activations.size() != tape.net->num_layers() + 1) {
    throw UsageError("backward needs a tape produced by forward or forward_box");
  }
  if (!tape.has_loss) throw UsageError("tape does not end in a scalar loss");
  if (!std::isfinite(seed)) throw std::invalid_argument("backward seed must be finite");
  return tape.kind == Tape::Kind::concrete ? backward_concrete(tape, seed) : backward_interval(tape, seed);
}

Network sgd_step(const Network& net, const GradientBundle& grads, double lr) {
  check_grad_shapes(net, grads);
  Network next = net;
  for (std::size_t k = 0; k < next.num_layers(); ++k) {
    auto& layer = next.mutable_layer(k);
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) layer.weights.data[i] -= lr * grads.d_weights[k].data[i];
    for (std::size_t j = 0; j < layer.bias.size(); ++j) layer.bias[j] -= lr * grads.d_bias[k][j];
  }
  return next;
}

AdamResult adam_step(AdamState state, const Network& net, const GradientBundle& grads, double lr) {
  check_grad_shapes(net, grads);
  const std::size_t n = net.num_parameters();
  if (state.first_moment.empty()) {
    state.first_moment.assign(n, 0.0);
    state.second_moment.assign(n, 0.0);
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ShapeError("Adam state does not match the network");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  Network next = net;
  std::vector<LayerSpec*> layers;
  for (std::size_t k = 0; k < next.num_layers(); ++k) layers.push_back(&next.mutable_layer(k));
  std::size_t flat = 0;
  auto update = [&](double& param, double grad) {
    double& m = state.first_moment[flat];
    double& v = state.second_moment[flat];
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad * grad;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    param -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    ++flat;
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& layer = *layers[k];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) update(layer.weights.data[i], grads.d_weights[k].data[i]);
    for (std::size_t j = 0; j < layer.bias.size(); ++j) update(layer.bias[j], grads.d_bias[k][j]);
  }
  return {std::move(next), std::move(state)};
}

}  // namespace art
