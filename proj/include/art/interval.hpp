#pragma once

#include <span>
#include <utility>

#include "art/diffnet.hpp"

namespace art {

/// Axis-aligned box `[lower_i, upper_i]`. Zero-width dimensions are allowed;
/// bounds must be finite and ordered. A box is both an abstract element and
/// a concrete input set, so abstraction is the identity and concretization
/// is membership.
class Box {
 public:
  Box() = default;
  Box(Vector lower, Vector upper);

  static Box point(std::span<const double> x);

  std::size_t dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  double lower(std::size_t i) const { return lower_[i]; }
  double upper(std::size_t i) const { return upper_[i]; }
  double width(std::size_t i) const { return upper_[i] - lower_[i]; }

  bool contains(std::span<const double> x, double tolerance = 0.0) const;
  bool contains(const Box& inner) const;

  bool operator==(const Box&) const = default;

 private:
  Vector lower_;
  Vector upper_;
};

/// Tightest box containing `W x + b` for x in `in`. The layer's ReLU flag is
/// ignored.
Box affine_abs(const LayerSpec& layer, const Box& in);

/// Element-wise `max(., 0)` on both bounds.
Box relu_abs(const Box& in);

struct BoxForwardResult {
  Box output;
  Tape tape;
};

/// Interval evaluation of the whole network. The tape is valid for as long
/// as `net` is alive and unmoved.
BoxForwardResult forward_box(const Network& net, const Box& in);

/// Interval evaluation without recording.
Box evaluate_box(const Network& net, const Box& in);

/// Splits `b` at the midpoint of dimension `dim`. Throws if that dimension
/// has zero width.
std::pair<Box, Box> bisect(const Box& b, std::size_t dim);

}  // namespace art
