#include "art/interval.hpp"

#include <cmath>
#include <string>

namespace art {

Box::Box(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) throw ShapeError("box bounds have different lengths");
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i])) {
      throw std::invalid_argument("box bound " + std::to_string(i) + " is not finite");
    }
    if (lower_[i] > upper_[i]) {
      throw std::invalid_argument("box dimension " + std::to_string(i) + " has lower > upper");
    }
  }
}

Box Box::point(std::span<const double> x) { return Box(Vector(x.begin(), x.end()), Vector(x.begin(), x.end())); }

bool Box::contains(std::span<const double> x, double tolerance) const {
  if (x.size() != dim()) throw ShapeError("point and box dimensions differ");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (x[i] < lower_[i] - tolerance || x[i] > upper_[i] + tolerance) return false;
  }
  return true;
}

bool Box::contains(const Box& inner) const {
  if (inner.dim() != dim()) throw ShapeError("box dimensions differ");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (inner.lower_[i] < lower_[i] || inner.upper_[i] > upper_[i]) return false;
  }
  return true;
}

namespace {

void affine_bounds(const LayerSpec& layer, const Vector& lo, const Vector& hi, Vector& out_lo, Vector& out_hi) {
  out_lo.assign(layer.out_dim(), 0.0);
  out_hi.assign(layer.out_dim(), 0.0);
  for (std::size_t j = 0; j < layer.out_dim(); ++j) {
    double l = layer.bias[j];
    double u = layer.bias[j];
    const auto w = layer.weights.row(j);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] >= 0.0) {
        l += w[i] * lo[i];
        u += w[i] * hi[i];
      } else {
        l += w[i] * hi[i];
        u += w[i] * lo[i];
      }
    }
    out_lo[j] = l;
    out_hi[j] = u;
  }
}

void relu_bounds(Vector& lo, Vector& hi) {
  for (double& v : lo) v = v > 0.0 ? v : 0.0;
  for (double& v : hi) v = v > 0.0 ? v : 0.0;
}

void check_input(const Network& net, const Box& in) {
  if (in.dim() != net.input_dim()) {
    throw ShapeError("box has " + std::to_string(in.dim()) + " dimensions, network expects " +
                     std::to_string(net.input_dim()));
  }
}

}  // namespace

Box affine_abs(const LayerSpec& layer, const Box& in) {
  if (in.dim() != layer.in_dim()) throw ShapeError("box does not match layer input width");
  Vector lo, hi;
  affine_bounds(layer, in.lower(), in.upper(), lo, hi);
  return Box(std::move(lo), std::move(hi));
}

Box relu_abs(const Box& in) {
  Vector lo = in.lower();
  Vector hi = in.upper();
  relu_bounds(lo, hi);
  return Box(std::move(lo), std::move(hi));
}

BoxForwardResult forward_box(const Network& net, const Box& in) {
  check_input(net, in);
  Tape tape;
  tape.net = &net;
  tape.kind = Tape::Kind::interval;
  tape.activations.reserve(net.num_layers() + 1);
  tape.pre.reserve(net.num_layers());
  tape.activations.push_back({in.lower(), in.upper()});

  for (const auto& layer : net.layers()) {
    const auto& prev = tape.activations.back();
    Tape::Values z;
    affine_bounds(layer, prev.lower, prev.upper, z.lower, z.upper);
    Tape::Values a = z;
    if (layer.apply_relu) relu_bounds(a.lower, a.upper);
    tape.pre.push_back(std::move(z));
    tape.activations.push_back(std::move(a));
  }
  const auto& out = tape.activations.back();
  Box output(out.lower, out.upper);
  return {std::move(output), std::move(tape)};
}

Box evaluate_box(const Network& net, const Box& in) {
  check_input(net, in);
  Vector lo = in.lower();
  Vector hi = in.upper();
  Vector next_lo, next_hi;
  for (const auto& layer : net.layers()) {
    affine_bounds(layer, lo, hi, next_lo, next_hi);
    if (layer.apply_relu) relu_bounds(next_lo, next_hi);
    lo.swap(next_lo);
    hi.swap(next_hi);
  }
  return Box(std::move(lo), std::move(hi));
}

std::pair<Box, Box> bisect(const Box& b, std::size_t dim) {
  if (dim >= b.dim()) throw ShapeError("bisection dimension out of range");
  if (!(b.upper(dim) > b.lower(dim))) {
    throw std::invalid_argument("cannot bisect zero-width dimension " + std::to_string(dim));
  }
  const double mid = (b.lower(dim) + b.upper(dim)) / 2.0;
  Vector left_hi = b.upper();
  Vector right_lo = b.lower();
  left_hi[dim] = mid;
  right_lo[dim] = mid;
  return {Box(b.lower(), std::move(left_hi)), Box(std::move(right_lo), b.upper())};
}

}  // namespace art
