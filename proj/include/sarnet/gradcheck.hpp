#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sarnet/context.hpp"
#include "sarnet/disease.hpp"
#include "sarnet/tensor.hpp"

namespace sarnet {

inline constexpr double kDefaultStep = 1e-5;
inline constexpr double kDefaultTol = 1e-5;
// Relative errors use max(kRelFloor, |analytic|, |numeric|) as denominator.
inline constexpr double kRelFloor = 1e-8;
// Fixtures with a ReLU pre-activation this close to 0 are rejected.
inline constexpr double kKinkMargin = 1e-7;
// Fixtures whose smallest nonzero attention weight falls below this, or
// whose global scores leave [kSaturation, 1 - kSaturation], are rejected:
// coordinates scaled by such weights sit under the finite-difference
// roundoff floor.
inline constexpr double kSaturation = 1e-3;

using ScalarFn = std::function<double(const Tensor&)>;

// (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate i.
Tensor central_diff(const ScalarFn& f, const Tensor& point, double step = kDefaultStep);

double relative_error(double analytic, double numeric);

struct GradTarget {
  std::string name;
  Tensor point;
  Tensor analytic;
  ScalarFn loss;  // loss as a function of this parameter alone
};

struct ParamReport {
  std::string name;
  double max_rel = 0, max_abs = 0;
  std::size_t worst_index = 0;
  double step = kDefaultStep;
  bool passed = true;
};

struct GradReport {
  std::string module;
  std::vector<ParamReport> params;
  double tol = kDefaultTol;
  std::uint64_t seed = 0;
  std::size_t rejected_seeds = 0;

  bool passed() const;
  std::string format() const;
};

GradReport check(const std::vector<GradTarget>& targets, double tol = kDefaultTol,
                 double step = kDefaultStep);

struct ContextFixtureDims {
  std::size_t n_r = 3;
  int n_d = 3;
  std::size_t d_a = 6, d_m = 5, d_h = 4, d_out = 7;
};

struct ContextFixture {
  ContextInputs inputs;
  ContextParams params;
  Tensor cotangent;
};

// Throws FixtureRejected when a prior sits within kKinkMargin of the ReLU
// kink, a proposal has no active grid cell, or attention is saturated.
ContextFixture make_context_fixture(std::uint64_t seed, const ContextFixtureDims& dims = {});
std::vector<GradTarget> context_targets(const ContextFixture& fx);

struct DiseaseFixtureDims {
  std::size_t n_r = 4;
  std::size_t d = 8, d_cate = 6, d_pool = 5;
};

struct DiseaseFixture {
  DiseaseInputs inputs;
  DiseaseParams params;
  Tensor cotangent;
};

// Edges come from a small synthetic corpus so the graph is realistic.
// Throws FixtureRejected when a global score is saturated.
DiseaseFixture make_disease_fixture(std::uint64_t seed, const DiseaseFixtureDims& dims = {});
std::vector<GradTarget> disease_targets(const DiseaseFixture& fx);

// Builds a fixture from `seed`, reseeding (seed + 1, ...) past rejected
// fixtures, and checks every parameter. Gives up with FixtureRejected after
// 1000 consecutive rejections.
GradReport certify_context(std::uint64_t seed, const ContextFixtureDims& dims = {},
                           double tol = kDefaultTol, double step = kDefaultStep);
GradReport certify_disease(std::uint64_t seed, const DiseaseFixtureDims& dims = {},
                           double tol = kDefaultTol, double step = kDefaultStep);

}  // namespace sarnet
