#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "art/cli.hpp"
#include "art/refine.hpp"
#include "support/generators.hpp"

using namespace art;
using art::testing::Rng;

namespace {

const double kSqrt2 = std::sqrt(2.0);

RegionSet monitor_set() { return RegionSet({monitor_property()}); }

// A property the monitor network satisfies everywhere: y0 <= 100.
CorrectnessProperty loose_property() {
  return {monitor_property().input, OutputPredicate::atom({1.0, 0.0}, 100.0)};
}

}  // namespace

TEST_CASE("singleton set loss equals the property's abstract loss") {
  const Network net = monitor_network();
  RegionSet s = monitor_set();
  const auto l = region_losses(net, s);
  REQUIRE(l.losses.size() == 1);
  CHECK(l.total == doctest::Approx(11.875 / kSqrt2).epsilon(1e-12));
  CHECK(l.max == l.total);
  CHECK(s.regions()[0].revision == net.revision());
}

TEST_CASE("empty set has zero loss") {
  RegionSet s;
  const auto l = region_losses(monitor_network(), s);
  CHECK(l.total == 0.0);
  CHECK(l.grad.squared_norm() == 0.0);
}

TEST_CASE("quadrant split sums the quadrant losses") {
  RegionSet s = monitor_set();
  const std::size_t r = s.split(0, 0);
  CHECK(r == 1);
  s.split(0, 1);
  s.split(1, 1);
  CHECK(s.size() == 4);
  CHECK(check_cover(s).empty());
  const auto l = region_losses(monitor_network(), s);
  CHECK(l.total == doctest::Approx(24.5 / kSqrt2).epsilon(1e-12));
  CHECK(l.max == doctest::Approx(9.125 / kSqrt2).epsilon(1e-12));
}

TEST_CASE("split bookkeeping") {
  RegionSet s = monitor_set();
  s.split(0, 0);
  CHECK(s.regions()[0].parent == 0);
  CHECK(s.regions()[1].parent == 0);
  CHECK(s.regions()[0].id == 1);
  CHECK(s.regions()[1].id == 2);
  REQUIRE(s.split_log().size() == 2);
  CHECK(s.split_log()[0].midpoint == 2.5);
  CHECK(s.split_log_csv() == "region,parent,dim,midpoint\n1,0,0,2.5\n2,0,0,2.5\n");
}

TEST_CASE("cover check detects tampering") {
  RegionSet s = monitor_set();
  s.split(0, 0);
  s.split(1, 1);
  CHECK(check_cover(s).empty());
  s.regions().pop_back();
  CHECK_FALSE(check_cover(s).empty());

  RegionSet t = monitor_set();
  t.split(0, 1);
  t.regions()[0].box = Box({0.0, 0.5}, {5.0, 1.0});
  CHECK_FALSE(check_cover(t).empty());
}

TEST_CASE("dimension scores") {
  const Network net = monitor_network();
  RegionSet s = monitor_set();
  const Vector scores = score_dimensions(net, s, 0);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0] > 0.0);
  CHECK(pick_dimension(scores) == 0);

  // Bisecting each dimension and comparing the worst child agrees with the
  // score's choice on this instance.
  const auto p = monitor_property().output;
  const Box b = monitor_property().input;
  double worst[2];
  for (std::size_t d = 0; d < 2; ++d) {
    auto [l, r] = bisect(b, d);
    worst[d] = std::max(dist_abstract(evaluate_box(net, l), p).value, dist_abstract(evaluate_box(net, r), p).value);
  }
  CHECK(worst[0] == doctest::Approx(9.375 / kSqrt2).epsilon(1e-12));
  CHECK(worst[1] == doctest::Approx(11.625 / kSqrt2).epsilon(1e-12));
  CHECK(worst[0] < worst[1]);
}

TEST_CASE("zero-width and zero-gradient dimensions") {
  const Network net = monitor_network();
  RegionSet flat({{Box({0.0, 1.0}, {5.0, 1.0}), monitor_property().output}});
  const Vector scores = score_dimensions(net, flat, 0);
  CHECK(scores[1] == -std::numeric_limits<double>::infinity());
  CHECK(pick_dimension(scores) == 0);

  RegionSet point({{Box({1.0, 1.0}, {1.0, 1.0}), monitor_property().output}});
  CHECK(pick_dimension(score_dimensions(net, point, 0)) == kNoParent);

  RegionSet safe({loose_property()});
  const Vector zero = score_dimensions(net, safe, 0);
  CHECK(zero == Vector{0.0, 0.0});
  CHECK(pick_dimension(zero) == 0);
}

TEST_CASE("pick_dimension breaks ties toward the lower index") {
  CHECK(pick_dimension({1.0, 3.0, 3.0}) == 1);
  CHECK(pick_dimension({-std::numeric_limits<double>::infinity(), 0.0}) == 1);
  CHECK(pick_dimension({}) == kNoParent);
}

TEST_CASE("refine_topk with k = 1") {
  const Network net = monitor_network();
  RegionSet s = monitor_set();
  const auto stats = refine_topk(net, s, 1, 5000);
  CHECK(stats.splits == 1);
  CHECK(stats.monotonicity_violations == 0);
  CHECK(s.size() == 2);
  CHECK(s.split_log()[0].dim == 0);
  CHECK(check_cover(s).empty());
  CHECK(s.regions()[0].revision == net.revision());
  CHECK(s.regions()[1].revision == net.revision());
}

TEST_CASE("refine_topk picks the worst regions first") {
  const Network net = monitor_network();
  RegionSet s = monitor_set();
  refine_topk(net, s, 1, 5000);
  // losses now 9.375/sqrt2 (right half) and a smaller left half
  CHECK(s.regions()[1].loss > s.regions()[0].loss);
  refine_topk(net, s, 1, 5000);
  CHECK(s.size() == 3);
  CHECK(s.split_log()[2].parent == 2);
}

TEST_CASE("refine_topk leaves zero-loss sets unchanged") {
  const Network net = monitor_network();
  RegionSet s({loose_property()});
  const auto stats = refine_topk(net, s, 10, 5000);
  CHECK(stats.splits == 0);
  CHECK(s.size() == 1);
  CHECK(s.split_log().empty());
}

TEST_CASE("refine_topk respects the region cap") {
  const Network net = monitor_network();
  RegionSet s = monitor_set();
  for (int i = 0; i < 20; ++i) refine_topk(net, s, 50, 10);
  CHECK(s.size() <= 10);
  CHECK(check_cover(s).empty());
  RegionSet full = monitor_set();
  CHECK(refine_topk(net, full, 5, 1).splits == 0);
  CHECK(refine_topk(net, full, 0, 100).splits == 0);
}

TEST_CASE("refinement never increases the worst loss for fixed weights") {
  Rng rng(31);
  for (int inst = 0; inst < 40; ++inst) {
    const Network net = art::testing::random_network(rng, 2, 2);
    RegionSet s({{art::testing::random_box(rng, 2), art::testing::random_predicate(rng, 2)}});
    double prev_max = region_losses(net, s).max;
    for (int step = 0; step < 5; ++step) {
      const auto stats = refine_topk(net, s, 3, 200);
      CHECK(stats.monotonicity_violations == 0);
      const double m = region_losses(net, s).max;
      CHECK(m <= prev_max + 1e-12);
      prev_max = m;
    }
    CHECK(check_cover(s).empty());
  }
}

TEST_CASE("region losses do not depend on the thread count") {
  Rng rng(4);
  const Network net = art::testing::random_network(rng, 2, 2, 3, 8);
  RegionSet s({{art::testing::random_box(rng, 2), art::testing::random_predicate(rng, 2)}});
  for (int i = 0; i < 6; ++i) refine_topk(net, s, 40, 1000);
  RegionSet t = s;
  const auto a = region_losses(net, s, {.threads = 1});
  const auto b = region_losses(net, t, {.threads = 4});
  CHECK(a.total == b.total);
  CHECK(a.losses == b.losses);
  CHECK(a.grad.d_weights == b.grad.d_weights);
  CHECK(a.grad.d_bias == b.grad.d_bias);
}

TEST_CASE("stale caches are refreshed before scoring") {
  Network net = monitor_network();
  RegionSet s = monitor_set();
  region_losses(net, s);
  const double before = s.regions()[0].loss;
  net.mutable_layer(1).weights(1, 1) = 0.0;
  score_dimensions(net, s, 0);
  CHECK(s.regions()[0].revision == net.revision());
  CHECK(s.regions()[0].loss != before);
}
