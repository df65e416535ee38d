#pragma once

#include <cstdint>
#include <vector>

#include "sarnet/geometry.hpp"
#include "sarnet/tensor.hpp"

namespace sarnet {

// Pooled n_d x n_d cell features over each lung field, row-major cells.
struct GridFeatures {
  Tensor left;   // [n_d^2 x d_m]
  Tensor right;  // [n_d^2 x d_m]
  Box left_lung, right_lung;
  int n_d = 7;

  std::size_t cells() const { return static_cast<std::size_t>(n_d) * n_d; }
  std::size_t d_m() const { return left.cols(); }
  // [2 n_d^2 x d_m]: every left-lung cell, then every right-lung cell.
  Tensor stacked() const;
  std::vector<Point> centers() const;
  void validate() const;
};

// Row-vector convention: projections are x * W.
struct ContextParams {
  Tensor W_a;  // [d_a x d_h]   roi feature -> shared space
  Tensor W_g;  // [d_m x d_h]   grid feature -> shared space
  Tensor W_s;  // [1 x 4]       spatial prior weights
  Tensor W_k;  // [d_m x d_out] aggregated context -> f_cxt

  struct Dims {
    std::size_t d_a = 1024, d_m = 256, d_h = 1024, d_out = 1024;
  };
  static ContextParams init(const Dims& dims, std::uint64_t seed, double stddev = 0.01);
  Dims dims() const;
  std::size_t element_count() const;
  void validate() const;
};

struct ContextInputs {
  std::vector<Box> rois;
  Tensor f_a;  // [n_r x d_a], post-fc roi features
  GridFeatures grids;
};

struct ContextOutput {
  Tensor f_cxt;  // [n_r x d_out]
  Tensor attn;   // [n_r x 2 n_d^2]
};

struct ContextGrads {
  Tensor W_a, W_g, W_s, W_k, f_a, grid_left, grid_right;
};

// F[i,j] = <f_a_i W_a, g_j W_g> over the stacked grid cells.
Tensor compatibility(const Tensor& f_a, const GridFeatures& grids, const ContextParams& p);

// The 4-vector s(a, g) of normalized corner-to-center offsets.
std::array<double, 4> prior_offsets(const Box& roi, const Point& center, const LungUnion& lu);
double spatial_prior(const Box& roi, const Point& center, const LungUnion& lu, const Tensor& W_s);
// Pre-activation W_s . s for every (roi, cell) pair: [n_r x 2 n_d^2].
Tensor prior_preactivation(const std::vector<Box>& rois, const GridFeatures& grids, const Tensor& W_s);
Tensor spatial_priors(const std::vector<Box>& rois, const GridFeatures& grids, const Tensor& W_s);

// Row-wise softmax over log P + F with log 0 = -inf. The row max of F over
// unmasked cells is subtracted before log P is added, so an exactly
// representable shift of F leaves the weights bitwise unchanged.
Tensor attention_weights(const Tensor& F, const Tensor& P);

// (attn * stacked grids) * W_k.
Tensor aggregate(const Tensor& attn, const GridFeatures& grids, const Tensor& W_k);

ContextOutput context_forward(const ContextInputs& in, const ContextParams& p);

// Gradients of <cotangent, f_cxt>. The ReLU subgradient at 0 is 0.
ContextGrads context_grads(const ContextInputs& in, const ContextParams& p, const Tensor& cotangent);

nlohmann::json to_json(const ContextParams& p);
ContextParams context_params_from_json(const nlohmann::json& j);

// {"n_d", "left_lung", "right_lung", "left", "right"}; boxes in corner form.
nlohmann::json to_json(const GridFeatures& g);
GridFeatures grids_from_json(const nlohmann::json& j);

}  // namespace sarnet
