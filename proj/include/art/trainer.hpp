#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "art/refine.hpp"

namespace art {

/// Labelled classification samples. Labels index the network outputs.
struct Dataset {
  std::vector<Vector> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
};

/// Checks sizes, input widths and label range against a network shape.
void validate_dataset(const Dataset& data, std::size_t input_dim, std::size_t output_dim);

enum class OptimizerKind { sgd, adam };

struct PlateauDecay {
  bool enabled = true;
  std::size_t patience = 10;
  double factor = 0.5;
};

struct TrainConfig {
  double lr = 0.001;
  std::size_t k = 200;
  std::size_t region_cap = 5000;
  double eps_accuracy = 0.1;
  std::size_t max_epochs = 100;
  OptimizerKind optimizer = OptimizerKind::adam;
  PlateauDecay lr_decay;
  std::uint64_t seed = 0;

  bool refine = true;
  double correctness_weight = 1.0;  // scales the abstract loss in the joint objective
  double margin = 0.0;              // slack for strict atoms
  unsigned threads = 1;
  bool record_time = false;  // wall-clock seconds in the report (breaks byte-identical reruns)
};

/// Throws std::invalid_argument on non-positive rates or counts.
void validate_config(const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_d = 0.0;
  double loss_a = 0.0;
  std::size_t regions = 0;
  double seconds = 0.0;
  double lr = 0.0;
};

enum class TrainOutcome { certified, budget_exhausted };

struct TrainReport {
  std::vector<EpochRecord> epochs;
  TrainOutcome outcome = TrainOutcome::budget_exhausted;
  double final_loss_d = 0.0;
  double final_loss_a = 0.0;
  std::size_t optimizer_steps = 0;
  std::size_t final_regions = 0;
  std::size_t splits = 0;
  std::size_t monotonicity_violations = 0;
  std::uint64_t seed = 0;
};

/// Accuracy loss: mean softmax cross-entropy over the dataset. Each tape
/// carries its sample's share (1/N) of the loss.
struct AccuracyLoss {
  double value = 0.0;
  std::vector<Tape> tapes;
};

AccuracyLoss accuracy_loss(const Network& net, const Dataset& data);

struct LossWithGradient {
  double value = 0.0;
  GradientBundle grad;
};

/// Cross-entropy value and weight gradient, computed in parallel with a
/// thread-count independent summation order.
LossWithGradient accuracy_loss_grad(const Network& net, const Dataset& data, unsigned threads = 1);

/// Fraction of samples whose argmax output equals the label.
double accuracy(const Network& net, const Dataset& data);

/// Thrown when a loss turns non-finite during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  Network net;
  TrainReport report;
};

/// Called after each epoch's losses are known (before any update).
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Abstraction-refinement training loop. Each epoch: evaluate the summed
/// abstract loss and the accuracy loss; stop if the abstract loss is exactly
/// zero and the accuracy loss is within `eps_accuracy`; otherwise take one
/// optimizer step on their sum and refine the worst regions. Stops after
/// `max_epochs` updates with outcome `budget_exhausted`.
TrainResult art_train(Network net, RegionSet& s, const Dataset& data, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {});

struct Certified {
  std::size_t splits = 0;
};

struct Unknown {
  double max_loss = 0.0;
  std::size_t splits = 0;
};

using CertifyResult = std::variant<Certified, Unknown>;

/// Branch-and-bound check with fixed weights: repeatedly bisects the worst
/// region until every region has zero abstract loss or `budget` splits have
/// been spent.
CertifyResult certify_only(const Network& net, RegionSet& s, std::size_t budget, const LossOptions& opts = {});

std::string report_csv(const TrainReport& report);
std::string report_json(const TrainReport& report);
const char* to_string(TrainOutcome outcome);

}  // namespace art
