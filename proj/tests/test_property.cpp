#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "art/cli.hpp"
#include "art/property.hpp"
#include "support/finite_diff.hpp"
#include "support/generators.hpp"

using namespace art;
using art::testing::Rng;

namespace {

const double kSqrt2 = std::sqrt(2.0);

// Distance from y to the closed set {y0 >= y1}, by scanning the boundary
// line y0 == y1 (only used when y is outside the set).
double scan_distance_to_diagonal(const Vector& y) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 200000; ++i) {
    const double t = -10.0 + 20.0 * i / 200000.0;
    best = std::min(best, std::hypot(y[0] - t, y[1] - t));
  }
  return best;
}

}  // namespace

TEST_CASE("satisfaction of atoms and combinations") {
  const auto le = OutputPredicate::atom({1.0, 0.0}, 2.0);  // y0 <= 2
  CHECK(satisfies(Vector{2.0, 9.0}, le));
  CHECK_FALSE(satisfies(Vector{2.5, 9.0}, le));

  const auto gt = OutputPredicate::greater(2, 0, 1);
  CHECK(gt.kind() == OutputPredicate::Kind::atom);
  CHECK(gt.as_atom().strict);
  CHECK(satisfies(Vector{1.0, 0.0}, gt));
  CHECK_FALSE(satisfies(Vector{1.0, 1.0}, gt));

  const auto both = OutputPredicate::all_of({le, gt});
  const auto either = OutputPredicate::any_of({le, gt});
  CHECK_FALSE(satisfies(Vector{3.0, 0.0}, both));
  CHECK(satisfies(Vector{3.0, 0.0}, either));
  CHECK_FALSE(satisfies(Vector{3.0, 4.0}, either));

  CHECK_THROWS_AS(satisfies(Vector{1.0}, le), ShapeError);
}

TEST_CASE("negation is pushed to the atoms") {
  const auto le = OutputPredicate::atom({1.0, -1.0}, 0.5);
  const auto n = OutputPredicate::negate(le);
  CHECK(n.as_atom().a == Vector{-1.0, 1.0});
  CHECK(n.as_atom().b == -0.5);
  CHECK(n.as_atom().strict);
  CHECK(OutputPredicate::negate(n) == le);

  const auto ge = OutputPredicate::atom({0.0, 1.0}, 1.0);
  const auto neg_and = OutputPredicate::negate(OutputPredicate::all_of({le, ge}));
  CHECK(neg_and.kind() == OutputPredicate::Kind::any_of);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vector y = art::testing::random_vector(rng, 2, 3.0);
    CHECK(satisfies(y, neg_and) == !satisfies(y, OutputPredicate::all_of({le, ge})));
  }
}

TEST_CASE("predicate construction validates input") {
  CHECK_THROWS(OutputPredicate::atom({0.0, 0.0}, 1.0));
  CHECK_THROWS(OutputPredicate::atom({}, 1.0));
  CHECK_THROWS(OutputPredicate::all_of({}));
  CHECK_THROWS(OutputPredicate::any_of({}));
  CHECK_THROWS_AS(
      OutputPredicate::all_of({OutputPredicate::atom({1.0}, 0.0), OutputPredicate::atom({1.0, 1.0}, 0.0)}),
      ShapeError);
  CHECK_THROWS(OutputPredicate::greater(2, 0, 0));
}

TEST_CASE("concrete loss at the monitor example point") {
  const auto p = monitor_property().output;
  const Vector y = evaluate(monitor_network(), Vector{4.0, 1.0});  // (1.5, 5.25)
  const double d = dist_concrete(y, p);
  CHECK(d == doctest::Approx(3.75 / kSqrt2).epsilon(1e-12));
  CHECK(d == doctest::Approx(scan_distance_to_diagonal(y)).epsilon(1e-6));
}

TEST_CASE("concrete loss matches a scanned projection") {
  Rng rng(17);
  const auto p = OutputPredicate::greater(2, 0, 1);
  for (int i = 0; i < 30; ++i) {
    const Vector y = art::testing::random_vector(rng, 2, 4.0);
    const double d = dist_concrete(y, p);
    if (y[0] > y[1]) {
      CHECK(d == 0.0);
    } else {
      CHECK(d == doctest::Approx(scan_distance_to_diagonal(y)).epsilon(1e-6));
    }
  }
}

TEST_CASE("strict boundary and margin") {
  const auto p = OutputPredicate::greater(2, 0, 1);
  CHECK(dist_concrete(Vector{1.0, 1.0}, p) == 0.0);
  CHECK_FALSE(satisfies(Vector{1.0, 1.0}, p));
  CHECK(dist_concrete(Vector{1.0, 1.0}, p, 0.1) == doctest::Approx(0.1 / kSqrt2).epsilon(1e-12));
  // Non-strict atoms ignore the margin.
  const auto le = OutputPredicate::atom({1.0, 0.0}, 1.0);
  CHECK(dist_concrete(Vector{1.0, 0.0}, le, 0.1) == 0.0);
}

TEST_CASE("conjunction takes the max, disjunction the min") {
  const auto a = OutputPredicate::atom({1.0, 0.0}, 0.0);  // y0 <= 0
  const auto b = OutputPredicate::atom({0.0, 1.0}, 0.0);  // y1 <= 0
  const Vector y{3.0, 4.0};
  CHECK(dist_concrete(y, OutputPredicate::all_of({a, b})) == 4.0);
  CHECK(dist_concrete(y, OutputPredicate::any_of({a, b})) == 3.0);
}

TEST_CASE("abstract loss of the monitor property") {
  const Box out = evaluate_box(monitor_network(), monitor_property().input);
  const AbstractLoss l = dist_abstract(out, monitor_property().output);
  CHECK(l.value == doctest::Approx(11.875 / kSqrt2).epsilon(1e-12));
  // sup(y1 - y0) = 7.625 + 4.25, driven by upper(y1) and lower(y0)
  CHECK(l.d_lower[0] == doctest::Approx(-1.0 / kSqrt2));
  CHECK(l.d_upper[1] == doctest::Approx(1.0 / kSqrt2));
  CHECK(l.d_upper[0] == 0.0);
  CHECK(l.d_lower[1] == 0.0);
}

TEST_CASE("abstract loss on quadrants") {
  const Network net = monitor_network();
  const auto p = monitor_property().output;
  const Box b = monitor_property().input;
  auto [l, r] = bisect(b, 0);
  auto [ll, lr] = bisect(l, 1);
  auto [rl, rr] = bisect(r, 1);
  Vector losses;
  for (const Box& q : {ll, lr, rl, rr}) losses.push_back(dist_abstract(evaluate_box(net, q), p).value);
  CHECK(losses[0] == doctest::Approx(5.375 / kSqrt2).epsilon(1e-12));
  CHECK(losses[1] == doctest::Approx(3.125 / kSqrt2).epsilon(1e-12));
  CHECK(losses[2] == doctest::Approx(9.125 / kSqrt2).epsilon(1e-12));
  CHECK(losses[3] == doctest::Approx(6.875 / kSqrt2).epsilon(1e-12));
  CHECK(*std::max_element(losses.begin(), losses.end()) == doctest::Approx(9.125 / kSqrt2).epsilon(1e-12));
  CHECK(*std::min_element(losses.begin(), losses.end()) == doctest::Approx(3.125 / kSqrt2).epsilon(1e-12));
}

TEST_CASE("abstract loss of a point box equals the concrete loss") {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const Vector y = art::testing::random_vector(rng, 3, 3.0);
    const auto p = art::testing::random_predicate(rng, 3);
    CHECK(dist_abstract(Box::point(y), p).value == doctest::Approx(dist_concrete(y, p)).epsilon(1e-12));
  }
}

TEST_CASE("abstract loss gradients match central differences") {
  Rng rng(9);
  std::size_t checked = 0;
  for (int i = 0; i < 100; ++i) {
    const auto p = art::testing::random_predicate(rng, 2);
    const Box out = art::testing::random_box(rng, 2, 3.0);
    const AbstractLoss l = dist_abstract(out, p);
    Vector x = out.lower();
    x.insert(x.end(), out.upper().begin(), out.upper().end());
    Vector analytic = l.d_lower;
    analytic.insert(analytic.end(), l.d_upper.begin(), l.d_upper.end());
    // Evaluated on unconstrained bounds so the perturbation may invert a box.
    auto f = [&](const Vector& v) {
      Vector lo(v.begin(), v.begin() + 2), hi(v.begin() + 2, v.end());
      for (std::size_t k = 0; k < 2; ++k)
        if (lo[k] > hi[k]) std::swap(lo[k], hi[k]);
      return dist_abstract(Box(lo, hi), p).value;
    };
    const auto res = art::testing::check_gradient(f, x, analytic, 1e-6);
    CHECK(res.worst_error < 1e-4);
    checked += res.checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("attaching the abstract loss needs an interval tape") {
  auto [y, tape] = forward(monitor_network(), Vector{1.0, 1.0});
  CHECK_THROWS_AS(attach_abstract_loss(tape, monitor_property().output), UsageError);

  auto [out, itape] = forward_box(monitor_network(), monitor_property().input);
  const double v = attach_abstract_loss(itape, monitor_property().output);
  CHECK(itape.has_loss);
  CHECK(v == doctest::Approx(11.875 / kSqrt2).epsilon(1e-12));
}

TEST_CASE("weight gradients of the abstract loss match central differences") {
  Rng rng(13);
  std::size_t checked = 0;
  for (int i = 0; i < 100; ++i) {
    const Network net = art::testing::random_network(rng, 2, 2);
    const Box in = art::testing::random_box(rng, 2);
    const auto p = art::testing::random_predicate(rng, 2);
    auto [out, tape] = forward_box(net, in);
    attach_abstract_loss(tape, p);
    const Vector analytic = art::testing::flatten(backward(tape));
    auto f = [&](const Vector& flat) {
      return dist_abstract(evaluate_box(art::testing::with_parameters(net, flat), in), p).value;
    };
    const auto res = art::testing::check_gradient(f, art::testing::flatten(net), analytic);
    CHECK(res.worst_error < 1e-4);
    checked += res.checked;
  }
  CHECK(checked > 500);
}
