#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "art/trainer.hpp"

namespace art {

/// Uniform point in `box`, determined only by (seed, index). Sample i is the
/// same no matter how many threads draw the others.
Vector sample_point(const Box& box, std::uint64_t seed, std::uint64_t index);

struct SoundnessViolation {
  std::uint64_t sample = 0;
  Vector x;
  std::size_t output = 0;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Draws `n` uniform samples from `box` and reports every output coordinate
/// that leaves the interval bounds of `forward_box(net, box)` by more than
/// `tolerance`.
std::vector<SoundnessViolation> mc_soundness(const Network& net, const Box& box, std::size_t n, std::uint64_t seed,
                                             unsigned threads = 1, double tolerance = 1e-9);

/// Same check against caller-supplied output bounds.
std::vector<SoundnessViolation> check_output_bounds(const Network& net, const Box& inputs, const Box& claimed,
                                                    std::size_t n, std::uint64_t seed, unsigned threads = 1,
                                                    double tolerance = 1e-9);

/// Largest `dist_concrete` over a regular grid with `resolution` points per
/// dimension (both ends included). Refuses boxes with more than 4
/// dimensions.
double grid_worst_dist(const Network& net, const Box& box, const OutputPredicate& pred, std::size_t resolution,
                       double margin = 0.0);

inline constexpr std::size_t kMaxGridDim = 4;

struct Counterexample {
  std::uint64_t sample = 0;
  Vector x;
  Vector y;
  double dist = 0.0;
};

struct SatisfactionCheck {
  std::size_t samples = 0;
  std::size_t violations = 0;
  std::vector<Counterexample> examples;  // the first `keep` violations, by sample index
};

/// Samples the property's input box and counts outputs that fail its
/// predicate.
SatisfactionCheck sample_satisfaction(const Network& net, const CorrectnessProperty& prop, std::size_t n,
                                      std::uint64_t seed, std::size_t keep = 10, unsigned threads = 1);

enum class LabelPolarity { argmax, argmin };

struct LabelledSplit {
  Dataset train;
  Dataset test;
};

/// Uniformly samples `input_box` and labels each point with the oracle
/// network's best output.
LabelledSplit label_with_oracle(const Network& oracle, std::size_t n_train, std::size_t n_test, const Box& input_box,
                                std::uint64_t seed, LabelPolarity polarity = LabelPolarity::argmax);

// Dataset CSV: a "# art-dataset v1" line, a header "x0,...,x{d-1},label",
// then one row per sample.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace art
