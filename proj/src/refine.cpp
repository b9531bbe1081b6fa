#include "art/refine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "parallel.hpp"

namespace art {

RegionSet::RegionSet(std::vector<CorrectnessProperty> origins) : origins_(std::move(origins)) {
  regions_.reserve(origins_.size());
  for (std::size_t i = 0; i < origins_.size(); ++i) {
    if (origins_[i].input.dim() == 0) throw ShapeError("origin property has an empty input box");
    Region r;
    r.id = next_id_++;
    r.origin = i;
    r.box = origins_[i].input;
    regions_.push_back(std::move(r));
  }
}

std::size_t RegionSet::split(std::size_t index, std::size_t dim) {
  Region& parent = regions_.at(index);
  auto [left_box, right_box] = bisect(parent.box, dim);
  const double mid = left_box.upper(dim);

  Region left;
  left.id = next_id_++;
  left.parent = parent.id;
  left.origin = parent.origin;
  left.box = std::move(left_box);
  Region right;
  right.id = next_id_++;
  right.parent = parent.id;
  right.origin = parent.origin;
  right.box = std::move(right_box);

  split_log_.push_back({left.id, parent.id, dim, mid});
  split_log_.push_back({right.id, parent.id, dim, mid});
  regions_[index] = std::move(left);
  regions_.push_back(std::move(right));
  return regions_.size() - 1;
}

std::string RegionSet::split_log_csv() const {
  std::string out = "region,parent,dim,midpoint\n";
  for (const auto& s : split_log_) {
    out += std::to_string(s.region) + ',' + std::to_string(s.parent) + ',' + std::to_string(s.dim) + ',' +
           format_double(s.midpoint) + '\n';
  }
  return out;
}

void evaluate_region(const Network& net, const OutputPredicate& pred, Region& r, double margin) {
  auto [out, tape] = forward_box(net, r.box);
  attach_abstract_loss(tape, pred, margin);
  r.loss = tape.loss;
  if (r.loss > 0.0) {
    GradientBundle g = backward(tape);
    r.grad_lower = std::move(g.d_input_lower);
    r.grad_upper = std::move(g.d_input_upper);
  } else {
    r.grad_lower.assign(r.box.dim(), 0.0);
    r.grad_upper.assign(r.box.dim(), 0.0);
  }
  r.revision = net.revision();
  r.margin = margin;
}

namespace {

bool cache_fresh(const Network& net, const Region& r, double margin) {
  return r.revision == net.revision() && r.margin == margin;
}

// Regions are processed in fixed-size blocks; each block sums its weight
// gradients serially and blocks are added in order, so the floating-point
// result does not depend on the thread count.
constexpr std::size_t kBlock = 32;

}  // namespace

RegionLosses region_losses(const Network& net, RegionSet& s, const LossOptions& opts) {
  RegionLosses result;
  const std::size_t n = s.size();
  result.losses.assign(n, 0.0);
  if (n == 0) {
    if (opts.with_gradient) result.grad = GradientBundle::zeros_like(net);
    return result;
  }
  for (const auto& r : s.regions()) {
    if (r.box.dim() != net.input_dim()) throw ShapeError("region dimension does not match the network input");
  }

  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<GradientBundle> block_grads(opts.with_gradient ? blocks : 0);
  auto& regions = s.regions();

  detail::parallel_for(blocks, opts.threads, [&](std::size_t b) {
    GradientBundle acc;
    if (opts.with_gradient) acc = GradientBundle::zeros_like(net);
    for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) {
      Region& r = regions[i];
      const auto& pred = s.predicate_of(r);
      if (!opts.with_gradient && cache_fresh(net, r, opts.margin)) {
        result.losses[i] = r.loss;
        continue;
      }
      auto [out, tape] = forward_box(net, r.box);
      attach_abstract_loss(tape, pred, opts.margin);
      r.loss = tape.loss;
      r.revision = net.revision();
      r.margin = opts.margin;
      result.losses[i] = r.loss;
      if (r.loss > 0.0) {
        GradientBundle g = backward(tape);
        r.grad_lower = std::move(g.d_input_lower);
        r.grad_upper = std::move(g.d_input_upper);
        if (opts.with_gradient) acc.accumulate(g);
      } else {
        r.grad_lower.assign(r.box.dim(), 0.0);
        r.grad_upper.assign(r.box.dim(), 0.0);
      }
    }
    if (opts.with_gradient) block_grads[b] = std::move(acc);
  });

  for (double l : result.losses) {
    result.total += l;
    result.max = std::max(result.max, l);
  }
  if (opts.with_gradient) {
    result.grad = GradientBundle::zeros_like(net);
    for (const auto& g : block_grads) result.grad.accumulate(g);
  }
  return result;
}

Vector score_dimensions(const Network& net, RegionSet& s, std::size_t index, double margin) {
  Region& r = s.regions().at(index);
  if (!cache_fresh(net, r, margin)) evaluate_region(net, s.predicate_of(r), r, margin);
  Vector scores(r.box.dim());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double width = r.box.width(i);
    scores[i] = width > 0.0 ? (std::abs(r.grad_lower[i]) + std::abs(r.grad_upper[i])) * width
                            : -std::numeric_limits<double>::infinity();
  }
  return scores;
}

std::size_t pick_dimension(const Vector& scores) {
  std::size_t best = kNoParent;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == -std::numeric_limits<double>::infinity()) continue;
    if (best == kNoParent || scores[i] > scores[best]) best = i;
  }
  return best;
}

RefineStats refine_topk(const Network& net, RegionSet& s, std::size_t k, std::size_t cap, const LossOptions& opts) {
  RefineStats stats;
  if (k == 0 || s.size() >= cap) return stats;

  auto& regions = s.regions();
  detail::parallel_for(regions.size(), opts.threads, [&](std::size_t i) {
    if (!cache_fresh(net, regions[i], opts.margin)) evaluate_region(net, s.predicate_of(regions[i]), regions[i], opts.margin);
  });

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (regions[i].loss > 0.0) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return regions[a].loss > regions[b].loss; });

  const std::size_t budget = std::min(k, cap - s.size());
  std::vector<std::pair<std::size_t, std::size_t>> plan;  // (region index, dim)
  for (std::size_t idx : candidates) {
    if (plan.size() == budget) break;
    const std::size_t dim = pick_dimension(score_dimensions(net, s, idx, opts.margin));
    if (dim == kNoParent) continue;  // point box, nothing to split
    plan.emplace_back(idx, dim);
  }

  std::vector<std::pair<std::size_t, double>> touched;  // (index, parent loss)
  for (auto [idx, dim] : plan) {
    const double parent_loss = regions[idx].loss;
    const std::size_t right = s.split(idx, dim);
    touched.emplace_back(idx, parent_loss);
    touched.emplace_back(right, parent_loss);
    ++stats.splits;
  }

  std::vector<unsigned char> worse(touched.size(), 0);
  detail::parallel_for(touched.size(), opts.threads, [&](std::size_t t) {
    Region& child = s.regions()[touched[t].first];
    evaluate_region(net, s.predicate_of(child), child, opts.margin);
    worse[t] = child.loss > touched[t].second;
  });
  stats.monotonicity_violations = static_cast<std::size_t>(std::count(worse.begin(), worse.end(), 1));
  return stats;
}

std::string check_cover(const RegionSet& s) {
  std::map<std::size_t, Box> boxes;
  std::map<std::size_t, std::size_t> origin_of;
  for (const auto& r : s.regions()) {
    if (!boxes.emplace(r.id, r.box).second) return "duplicate region id " + std::to_string(r.id);
    origin_of[r.id] = r.origin;
    if (s.origins().at(r.origin).output != s.predicate_of(r)) return "predicate mismatch";
  }

  const auto& log = s.split_log();
  if (log.size() % 2 != 0) return "split log has an odd number of entries";
  for (std::size_t i = log.size(); i >= 2; i -= 2) {
    const SplitRecord& l = log[i - 2];
    const SplitRecord& r = log[i - 1];
    if (l.parent != r.parent || l.dim != r.dim || l.midpoint != r.midpoint) {
      return "split log entries " + std::to_string(i - 2) + " and " + std::to_string(i - 1) + " are not siblings";
    }
    auto lit = boxes.find(l.region);
    auto rit = boxes.find(r.region);
    if (lit == boxes.end() || rit == boxes.end()) {
      return "children of region " + std::to_string(l.parent) + " are not both present";
    }
    const Box& lb = lit->second;
    const Box& rb = rit->second;
    const std::size_t d = l.dim;
    for (std::size_t j = 0; j < lb.dim(); ++j) {
      if (j == d) continue;
      if (lb.lower(j) != rb.lower(j) || lb.upper(j) != rb.upper(j)) {
        return "children of region " + std::to_string(l.parent) + " differ outside the split dimension";
      }
    }
    if (lb.upper(d) != l.midpoint || rb.lower(d) != l.midpoint) {
      return "children of region " + std::to_string(l.parent) + " do not meet at the midpoint";
    }
    Vector hi = lb.upper();
    hi[d] = rb.upper(d);
    Box merged(lb.lower(), std::move(hi));
    const std::size_t origin = origin_of[l.region];
    if (origin_of[r.region] != origin) return "siblings belong to different origins";
    boxes.erase(lit);
    boxes.erase(rit);
    boxes.emplace(l.parent, std::move(merged));
    origin_of[l.parent] = origin;
  }

  if (boxes.size() != s.origins().size()) {
    return "reconstruction left " + std::to_string(boxes.size()) + " boxes for " +
           std::to_string(s.origins().size()) + " origins";
  }
  for (const auto& [id, box] : boxes) {
    const std::size_t origin = origin_of[id];
    if (box != s.origins()[origin].input) return "reconstructed box differs from origin " + std::to_string(origin);
  }
  return {};
}

}  // namespace art
