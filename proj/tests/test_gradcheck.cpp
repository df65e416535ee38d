#include <cmath>
#include <limits>

#include "doctest.h"
#include "sarnet/error.hpp"
#include "sarnet/gradcheck.hpp"

using namespace sarnet;

namespace {
double sum_sq(const Tensor& x) {
  double s = 0;
  for (double v : x.data()) s += v * v;
  return s;
}
}  // namespace

TEST_CASE("central_diff closed forms") {
  const Tensor g = central_diff(sum_sq, Tensor({2}, std::vector<double>{1, 2}), 1e-5);
  CHECK(std::abs(g[0] - 2) <= 1e-8);
  CHECK(std::abs(g[1] - 4) <= 1e-8);

  const Tensor p = central_diff([](const Tensor& x) { return x[0] * x[1]; }, Tensor({2}, std::vector<double>{3, 5}));
  CHECK(std::abs(p[0] - 5) <= 1e-8);
  CHECK(std::abs(p[1] - 3) <= 1e-8);

  const Tensor flat = central_diff([](const Tensor&) { return 4.2; }, Tensor({3}, 1.0));
  for (double v : flat.data()) CHECK(v == 0.0);

  // Quadratics have no truncation error.
  const Tensor x = gaussian_init({20}, 3, 1.0);
  const Tensor q = central_diff(sum_sq, x, 1e-4);
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(q[i] - 2 * x[i]) <= 1e-10);

  CHECK_THROWS_AS(central_diff(sum_sq, x, 0.0), ParameterError);
}

TEST_CASE("central_diff reports the coordinate of a non-finite probe") {
  const auto f = [](const Tensor& x) { return x[1] > 1.0 ? std::numeric_limits<double>::infinity() : x[0]; };
  try {
    central_diff(f, Tensor({3}, std::vector<double>{0, 1, 0}));
    FAIL("expected ProbeError");
  } catch (const ProbeError& e) {
    CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
  }
}

TEST_CASE("relative_error floor") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(0.0, 1e-12) == doctest::Approx(1e-4));
  CHECK(relative_error(2.0, 1.0) == 0.5);
}

TEST_CASE("check passes exact gradients and catches an injected fault") {
  const Tensor x = gaussian_init({6}, 4, 1.0);
  Tensor exact = scale(x, 2.0);
  const GradReport ok = check({{"x", x, exact, sum_sq}});
  CHECK(ok.passed());
  CHECK(ok.params.size() == 1);
  CHECK(ok.params[0].max_rel <= 1e-8);

  Tensor bad = exact;
  bad[4] += 1.0;
  const GradReport r = check({{"x", x, bad, sum_sq}});
  CHECK_FALSE(r.passed());
  CHECK(r.params[0].worst_index == 4);
  CHECK(r.format().find("FAIL") != std::string::npos);

  CHECK_THROWS_AS(check({{"x", x, Tensor({5}), sum_sq}}), DimensionError);
}

TEST_CASE("context fixtures avoid the ReLU kink") {
  std::size_t accepted = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    try {
      const ContextFixture fx = make_context_fixture(seed);
      const Tensor U = prior_preactivation(fx.inputs.rois, fx.inputs.grids, fx.params.W_s);
      for (double u : U.data()) CHECK(std::abs(u) > kKinkMargin);
      ++accepted;
    } catch (const FixtureRejected&) {
    }
  }
  CHECK(accepted > 0);
  const GradReport r = certify_context(11);
  CHECK(r.seed >= 11);
  CHECK(r.seed == 11 + r.rejected_seeds);
}

TEST_CASE("every module certifies across seeds") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const GradReport c = certify_context(seed);
    INFO(c.format());
    CHECK(c.passed());
    const GradReport d = certify_disease(seed);
    INFO(d.format());
    CHECK(d.passed());
  }
}
