#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "art/property.hpp"

namespace art {

inline constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

/// One piece of an input-space abstraction: a sub-box of an origin
/// property's input, checked against that property's output predicate.
struct Region {
  std::size_t id = 0;
  std::size_t parent = kNoParent;
  std::size_t origin = 0;  // index into RegionSet::origins()
  Box box;

  // Cached abstract loss and its gradient w.r.t. the box bounds, valid for
  // network revision `revision` (0 = never evaluated).
  double loss = 0.0;
  Vector grad_lower;
  Vector grad_upper;
  std::uint64_t revision = 0;
  double margin = 0.0;
};

/// One line of the split log: `region` was created by bisecting `parent`
/// along `dim` at `midpoint`.
struct SplitRecord {
  std::size_t region = 0;
  std::size_t parent = 0;
  std::size_t dim = 0;
  double midpoint = 0.0;
};

/// Flat list of regions refining a list of origin properties. Starts with
/// one region per origin; `split` replaces a region by its two halves.
class RegionSet {
 public:
  RegionSet() = default;
  explicit RegionSet(std::vector<CorrectnessProperty> origins);

  const std::vector<CorrectnessProperty>& origins() const { return origins_; }
  const std::vector<Region>& regions() const { return regions_; }
  std::vector<Region>& regions() { return regions_; }
  std::size_t size() const { return regions_.size(); }
  bool empty() const { return regions_.empty(); }

  const OutputPredicate& predicate_of(const Region& r) const { return origins_.at(r.origin).output; }

  /// Bisects region `index` along `dim`. The left half takes the slot of
  /// the parent and the right half is appended. Returns the right half's
  /// index.
  std::size_t split(std::size_t index, std::size_t dim);

  const std::vector<SplitRecord>& split_log() const { return split_log_; }

  /// "region,parent,dim,midpoint" lines with a header.
  std::string split_log_csv() const;

 private:
  std::vector<CorrectnessProperty> origins_;
  std::vector<Region> regions_;
  std::vector<SplitRecord> split_log_;
  std::size_t next_id_ = 0;
};

struct LossOptions {
  double margin = 0.0;   // slack for strict atoms, see dist_concrete
  unsigned threads = 1;
  bool with_gradient = true;
};

struct RegionLosses {
  Vector losses;  // per region, in RegionSet order
  double total = 0.0;
  double max = 0.0;
  GradientBundle grad;  // d total / d weights; empty if not requested
};

/// Interval-evaluates every region, refreshes its cache and sums the abstract
/// losses with uniform weights. An empty set has total 0.
RegionLosses region_losses(const Network& net, RegionSet& s, const LossOptions& opts = {});

/// Recomputes one region's cached loss and bound gradients.
void evaluate_region(const Network& net, const OutputPredicate& pred, Region& r, double margin = 0.0);

/// Per-dimension split score `(|dL/dlower_i| + |dL/dupper_i|) * width_i`,
/// refreshing the region's cache first if it is stale. Zero-width dimensions
/// score -infinity.
Vector score_dimensions(const Network& net, RegionSet& s, std::size_t index, double margin = 0.0);

/// Index of the largest score, lowest index on ties; `kNoParent` if every
/// score is -infinity.
std::size_t pick_dimension(const Vector& scores);

struct RefineStats {
  std::size_t splits = 0;
  std::size_t monotonicity_violations = 0;  // children worse than parent
};

/// Bisects the `k` positive-loss regions with the largest losses (ties to the
/// lower index) along their best-scoring dimension. Nothing is refined once
/// the set holds `cap` regions, and the set never grows past `cap`. Children
/// are evaluated immediately against `net`.
RefineStats refine_topk(const Network& net, RegionSet& s, std::size_t k, std::size_t cap, const LossOptions& opts = {});

/// Replays the split log backwards, merging sibling pairs, and checks that
/// the current regions tile every origin box exactly. Returns an empty
/// string on success, otherwise a description of the first defect.
std::string check_cover(const RegionSet& s);

}  // namespace art
