#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "sarnet/error.hpp"
#include "sarnet/tensor.hpp"

using namespace sarnet;

TEST_CASE("matmul examples") {
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(matmul(Tensor::identity(2), m) == m);
  CHECK(matmul(Tensor::matrix({{1, 0}, {0, 0}}), Tensor::matrix({{5}, {7}})) == Tensor::matrix({{5}, {0}}));
  CHECK(matmul(m, Tensor::matrix({{5}, {6}})) == Tensor::matrix({{17}, {39}}));
}

TEST_CASE("matmul rejects mismatched inner extents and names both shapes") {
  try {
    matmul(Tensor({2, 3}), Tensor({2, 3}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(e.category() == "dimension");
  }
}

TEST_CASE("matmul agrees with the naive oracle and is associative") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = gaussian_init({4, 4}, seed, 1.0);
    const Tensor b = gaussian_init({4, 4}, seed + 100, 1.0);
    const Tensor c = gaussian_init({4, 4}, seed + 200, 1.0);
    const auto ref = oracle::naive_matmul(a, b);
    const Tensor ab = matmul(a, b);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(ab(i, j) == doctest::Approx(ref[i][j]).epsilon(1e-12));
    const Tensor left = matmul(ab, c);
    const Tensor right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      CHECK(std::abs(left[i] - right[i]) <= 1e-9 * std::max(1.0, std::abs(left[i])));
    }
  }
}

TEST_CASE("softmax_stable examples") {
  const double inf = std::numeric_limits<double>::infinity();
  const Tensor a = softmax_stable(Tensor::vector({0, 0}));
  CHECK(a[0] == 0.5);
  CHECK(a[1] == 0.5);
  const Tensor b = softmax_stable(Tensor::vector({0, -inf}));
  CHECK(b[0] == 1.0);
  CHECK(b[1] == 0.0);
  const Tensor c = softmax_stable(Tensor::vector({0, std::log(2.0)}));
  CHECK(c[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(c[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(softmax_stable(Tensor::vector({-inf, -inf})), DegenerateError);
}

TEST_CASE("softmax_stable sums to one and is shift invariant for exact shifts") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    // Dyadic logits and shifts keep x + c exact, so max-subtraction makes
    // the shifted result bitwise equal.
    Tensor x = gaussian_init({9}, seed, 3.0);
    for (auto& v : x.data()) v = std::round(v * 1024.0) / 1024.0;
    const double c = std::round(gaussian_init({1}, seed + 7, 50.0)[0] * 64.0) / 64.0;
    Tensor shifted = x;
    for (auto& v : shifted.data()) v += c;
    const Tensor p = softmax_stable(x);
    double total = 0;
    for (double v : p.data()) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(softmax_stable(shifted) == p);
  }
}

TEST_CASE("gaussian_init is reproducible and has the requested moments") {
  CHECK(gaussian_init({3, 5}, 42, 0.5) == gaussian_init({3, 5}, 42, 0.5));
  CHECK_FALSE(gaussian_init({3, 5}, 42, 0.5) == gaussian_init({3, 5}, 43, 0.5));
  CHECK_THROWS_AS(gaussian_init({2}, 1, 0.0), ParameterError);

  const Tensor t = gaussian_init({1000000}, 2024, 0.01);
  double mean = 0;
  for (double v : t.data()) mean += v;
  mean /= static_cast<double>(t.size());
  double var = 0;
  for (double v : t.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(t.size() - 1));
  CHECK(std::abs(mean) <= 0.01 * 0.01);
  CHECK(sd >= 0.0099);
  CHECK(sd <= 0.0101);
}

TEST_CASE("relu, sigmoid, concat") {
  const Tensor x = Tensor::vector({-2, 0, 3});
  CHECK(relu(x) == Tensor::vector({0, 0, 3}));
  CHECK(relu(relu(x)) == relu(x));
  const Tensor s = sigmoid(Tensor::vector({-800, -1, 0, 1, 800}));
  CHECK(s[2] == 0.5);
  for (double v : s.data()) CHECK((v >= 0.0 && v <= 1.0));
  CHECK(sigmoid(-1.0) > 0.0);
  CHECK(sigmoid(1.0) < 1.0);

  const std::vector<Tensor> parts = {Tensor::matrix({{1}, {2}}), Tensor::matrix({{3, 4}, {5, 6}})};
  const Tensor cat = concat_last_axis(parts);
  CHECK(cat.shape() == Shape{2, 3});
  CHECK(cat == Tensor::matrix({{1, 3, 4}, {2, 5, 6}}));
  const std::vector<Tensor> bad = {Tensor({2, 1}), Tensor({3, 1})};
  CHECK_THROWS_AS(concat_last_axis(bad), DimensionError);
}

TEST_CASE("tensor documents reject length mismatches") {
  const Tensor t = Tensor::matrix({{1.5, -2}, {3, 1e-300}});
  CHECK(tensor_from_json(to_json(t)) == t);
  nlohmann::json bad = {{"shape", {2, 2}}, {"data", {1, 2, 3}}};
  CHECK_THROWS_AS(tensor_from_json(bad), SchemaError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}
