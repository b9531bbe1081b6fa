#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "art/interval.hpp"

namespace art {

/// Linear inequality `a . y <= b`, or `a . y < b` when `strict`.
struct Atom {
  Vector a;
  double b = 0.0;
  bool strict = false;

  double norm() const;
  bool operator==(const Atom&) const = default;
};

/// Boolean combination of linear output constraints.
///
/// Negation is eliminated on construction: `negate` pushes it through And/Or
/// by De Morgan and flips atoms, so `not (a.y <= b)` becomes the strict atom
/// `-a.y < -b`. The tree therefore only holds atoms, conjunctions and
/// disjunctions.
class OutputPredicate {
 public:
  enum class Kind { atom, all_of, any_of };

  static OutputPredicate atom(Vector a, double b);
  static OutputPredicate atom(Atom atom);
  static OutputPredicate negate(const OutputPredicate& p);
  static OutputPredicate all_of(std::vector<OutputPredicate> children);
  static OutputPredicate any_of(std::vector<OutputPredicate> children);

  /// `y[i] > y[j]` over an output of width `e`.
  static OutputPredicate greater(std::size_t e, std::size_t i, std::size_t j);

  Kind kind() const { return kind_; }
  const Atom& as_atom() const { return atom_; }
  const std::vector<OutputPredicate>& children() const { return children_; }

  /// Output width every atom refers to.
  std::size_t output_dim() const;

  bool operator==(const OutputPredicate&) const = default;

 private:
  Kind kind_ = Kind::atom;
  Atom atom_;
  std::vector<OutputPredicate> children_;
};

struct CorrectnessProperty {
  Box input;
  OutputPredicate output;
};

bool satisfies(std::span<const double> y, const OutputPredicate& p);

/// Euclidean distance-style loss of a concrete output: per atom the distance
/// to the half-space, max over conjunctions, min over disjunctions. Zero
/// implies `satisfies` except on the boundary of strict atoms; a positive
/// `margin` is added to every strict atom's threshold to close that gap.
double dist_concrete(std::span<const double> y, const OutputPredicate& p, double margin = 0.0);

struct AbstractLoss {
  double value = 0.0;
  Vector d_lower;  // d value / d output lower bounds
  Vector d_upper;  // d value / d output upper bounds
};

/// Worst-case atom distance over an output box, combined like
/// `dist_concrete`. Subgradients of max/min go to the first extremal child.
AbstractLoss dist_abstract(const Box& out, const OutputPredicate& p, double margin = 0.0);

/// Evaluates `dist_abstract` on the output of an interval tape and attaches
/// it as the tape's loss. Returns the loss value.
double attach_abstract_loss(Tape& tape, const OutputPredicate& p, double margin = 0.0);

// JSON form. Predicates: {"op": "atom", "a": [...], "b": x} or
// {"op": "not"|"and"|"or", "args": [...]} ("not" takes exactly one argument).
// Property: {"input": {"lower": [...], "upper": [...]}, "output": <predicate>}.
// A document is either one property, a list of them, or
// {"format": "art-property", "version": 1, "properties": [...]}.
OutputPredicate predicate_from_json(const nlohmann::json& j);
nlohmann::json predicate_to_json(const OutputPredicate& p);
CorrectnessProperty property_from_json(const nlohmann::json& j);
nlohmann::json property_to_json(const CorrectnessProperty& p);

std::vector<CorrectnessProperty> properties_from_string(const std::string& text);
std::string properties_to_string(const std::vector<CorrectnessProperty>& props);
std::vector<CorrectnessProperty> load_properties(const std::string& path);
void save_properties(const std::vector<CorrectnessProperty>& props, const std::string& path);

}  // namespace art
