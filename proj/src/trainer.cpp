#include "art/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>

#include "json.hpp"
#include "parallel.hpp"

namespace art {

void validate_dataset(const Dataset& data, std::size_t input_dim, std::size_t output_dim) {
  if (data.inputs.size() != data.labels.size()) throw ShapeError("dataset has mismatched input and label counts");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.inputs[i].size() != input_dim) {
      throw ShapeError("sample " + std::to_string(i) + " has " + std::to_string(data.inputs[i].size()) +
                       " features, network expects " + std::to_string(input_dim));
    }
    for (double v : data.inputs[i]) {
      if (!std::isfinite(v)) throw std::invalid_argument("sample " + std::to_string(i) + " is not finite");
    }
    if (data.labels[i] >= output_dim) {
      throw ShapeError("sample " + std::to_string(i) + " has label " + std::to_string(data.labels[i]) +
                       " but the network has " + std::to_string(output_dim) + " outputs");
    }
  }
}

void validate_config(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw std::invalid_argument("learning rate must be positive");
  if (cfg.k == 0) throw std::invalid_argument("k must be positive");
  if (cfg.region_cap == 0) throw std::invalid_argument("region cap must be positive");
  if (!(cfg.eps_accuracy >= 0.0)) throw std::invalid_argument("accuracy bound must be non-negative");
  if (cfg.max_epochs == 0) throw std::invalid_argument("max epochs must be positive");
  if (!(cfg.correctness_weight > 0.0)) throw std::invalid_argument("correctness weight must be positive");
  if (!(cfg.margin >= 0.0)) throw std::invalid_argument("margin must be non-negative");
  if (cfg.lr_decay.enabled && (cfg.lr_decay.patience == 0 || !(cfg.lr_decay.factor > 0.0 && cfg.lr_decay.factor < 1.0))) {
    throw std::invalid_argument("plateau decay needs positive patience and a factor in (0, 1)");
  }
}

namespace {

// Softmax cross-entropy of one sample: value and d/d logits.
double cross_entropy(const Vector& logits, std::size_t label, Vector& grad) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  grad.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    grad[j] = std::exp(logits[j] - top);
    sum += grad[j];
  }
  for (double& g : grad) g /= sum;
  grad[label] -= 1.0;
  return std::log(sum) + top - logits[label];
}

constexpr std::size_t kSampleBlock = 64;

}  // namespace

AccuracyLoss accuracy_loss(const Network& net, const Dataset& data) {
  validate_dataset(data, net.input_dim(), net.output_dim());
  AccuracyLoss result;
  if (data.empty()) return result;
  const double scale = 1.0 / static_cast<double>(data.size());
  result.tapes.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto [y, tape] = forward(net, data.inputs[i]);
    Vector grad;
    const double ce = cross_entropy(y, data.labels[i], grad);
    for (double& g : grad) g *= scale;
    tape.attach_loss(ce * scale, std::move(grad));
    result.value += ce * scale;
    result.tapes.push_back(std::move(tape));
  }
  return result;
}

LossWithGradient accuracy_loss_grad(const Network& net, const Dataset& data, unsigned threads) {
  validate_dataset(data, net.input_dim(), net.output_dim());
  LossWithGradient result{0.0, GradientBundle::zeros_like(net)};
  if (data.empty()) return result;
  const double scale = 1.0 / static_cast<double>(data.size());
  const std::size_t blocks = (data.size() + kSampleBlock - 1) / kSampleBlock;
  std::vector<LossWithGradient> partial(blocks);

  detail::parallel_for(blocks, threads, [&](std::size_t b) {
    LossWithGradient acc{0.0, GradientBundle::zeros_like(net)};
    for (std::size_t i = b * kSampleBlock; i < std::min(data.size(), (b + 1) * kSampleBlock); ++i) {
      auto [y, tape] = forward(net, data.inputs[i]);
      Vector grad;
      const double ce = cross_entropy(y, data.labels[i], grad);
      tape.attach_loss(ce, std::move(grad));
      acc.value += ce;
      acc.grad.accumulate(backward(tape));
    }
    partial[b] = std::move(acc);
  });

  double total = 0.0;
  for (const auto& p : partial) {
    total += p.value;
    result.grad.accumulate(p.grad, scale);
  }
  result.value = total * scale;
  return result;
}

double accuracy(const Network& net, const Dataset& data) {
  validate_dataset(data, net.input_dim(), net.output_dim());
  if (data.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector y = evaluate(net, data.inputs[i]);
    const auto best = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    hits += best == data.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult art_train(Network net, RegionSet& s, const Dataset& data, const TrainConfig& cfg,
                      const EpochCallback& on_epoch) {
  validate_config(cfg);
  validate_dataset(data, net.input_dim(), net.output_dim());
  for (const auto& origin : s.origins()) {
    if (origin.input.dim() != net.input_dim()) throw ShapeError("property input does not match the network");
    if (origin.output.output_dim() != net.output_dim()) throw ShapeError("property output does not match the network");
  }

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const LossOptions loss_opts{cfg.margin, cfg.threads, true};

  TrainReport report;
  report.seed = cfg.seed;
  AdamState adam;
  double lr = cfg.lr;
  double best_joint = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0;; ++epoch) {
    RegionLosses correctness;
    LossWithGradient acc;
    try {
      correctness = region_losses(net, s, loss_opts);
      acc = accuracy_loss_grad(net, data, cfg.threads);
    } catch (const std::invalid_argument& e) {
      throw DivergenceError(std::string("epoch ") + std::to_string(epoch) + ": " + e.what());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_d = correctness.total;
    rec.loss_a = acc.value;
    rec.regions = s.size();
    rec.lr = lr;
    if (cfg.record_time) rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (!std::isfinite(rec.loss_d) || !std::isfinite(rec.loss_a)) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": loss is not finite (weights diverged)");
    }
    report.final_loss_d = rec.loss_d;
    report.final_loss_a = rec.loss_a;
    report.final_regions = s.size();

    if (rec.loss_d == 0.0 && rec.loss_a <= cfg.eps_accuracy) {
      report.outcome = TrainOutcome::certified;
      break;
    }
    if (epoch == cfg.max_epochs) {
      report.outcome = TrainOutcome::budget_exhausted;
      break;
    }

    GradientBundle grad = GradientBundle::zeros_like(net);
    grad.accumulate(correctness.grad, cfg.correctness_weight);
    grad.accumulate(acc.grad);
    if (cfg.optimizer == OptimizerKind::adam) {
      auto stepped = adam_step(std::move(adam), net, grad, lr);
      net = std::move(stepped.net);
      adam = std::move(stepped.state);
    } else {
      net = sgd_step(net, grad, lr);
    }
    ++report.optimizer_steps;

    if (cfg.lr_decay.enabled) {
      const double joint = cfg.correctness_weight * rec.loss_d + rec.loss_a;
      if (joint < best_joint) {
        best_joint = joint;
        since_best = 0;
      } else if (++since_best >= cfg.lr_decay.patience) {
        lr *= cfg.lr_decay.factor;
        since_best = 0;
      }
    }

    if (cfg.refine) {
      const RefineStats stats = refine_topk(net, s, cfg.k, cfg.region_cap, loss_opts);
      report.splits += stats.splits;
      report.monotonicity_violations += stats.monotonicity_violations;
    }
  }
  return {std::move(net), std::move(report)};
}

CertifyResult certify_only(const Network& net, RegionSet& s, std::size_t budget, const LossOptions& opts) {
  LossOptions eval = opts;
  eval.with_gradient = false;
  region_losses(net, s, eval);

  // Max-heap on loss; among equal losses the lower index comes first.
  using Entry = std::pair<double, std::size_t>;
  auto cmp = [](const Entry& a, const Entry& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);
  for (std::size_t i = 0; i < s.size(); ++i) heap.emplace(s.regions()[i].loss, i);

  std::size_t splits = 0;
  while (!heap.empty()) {
    const auto [loss, idx] = heap.top();
    if (loss == 0.0) return Certified{splits};
    if (splits >= budget) return Unknown{loss, splits};
    const std::size_t dim = pick_dimension(score_dimensions(net, s, idx, opts.margin));
    // A point region is evaluated exactly, so a positive loss there is a
    // real violation and no amount of splitting will remove it.
    if (dim == kNoParent) return Unknown{loss, splits};
    heap.pop();
    const std::size_t right = s.split(idx, dim);
    ++splits;
    for (std::size_t child : {idx, right}) {
      Region& r = s.regions()[child];
      evaluate_region(net, s.predicate_of(r), r, opts.margin);
      heap.emplace(r.loss, child);
    }
  }
  return Certified{splits};  // empty region set
}

const char* to_string(TrainOutcome outcome) {
  return outcome == TrainOutcome::certified ? "certified" : "epoch-budget-exhausted";
}

std::string report_csv(const TrainReport& report) {
  std::string out = "# art-train-report v1\nepoch,loss_d,loss_a,regions,seconds\n";
  for (const auto& e : report.epochs) {
    out += std::to_string(e.epoch) + ',' + format_double(e.loss_d) + ',' + format_double(e.loss_a) + ',' +
           std::to_string(e.regions) + ',' + format_double(e.seconds) + '\n';
  }
  return out;
}

std::string report_json(const TrainReport& report) {
  nlohmann::ordered_json j;
  j["format"] = "art-train-report";
  j["version"] = 1;
  j["outcome"] = to_string(report.outcome);
  j["epochs"] = report.epochs.size();
  j["optimizer_steps"] = report.optimizer_steps;
  j["final_loss_d"] = report.final_loss_d;
  j["final_loss_a"] = report.final_loss_a;
  j["final_regions"] = report.final_regions;
  j["splits"] = report.splits;
  j["monotonicity_violations"] = report.monotonicity_violations;
  j["seed"] = report.seed;
  return j.dump(2) + "\n";
}

}  // namespace art
