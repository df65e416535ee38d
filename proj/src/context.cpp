#include "sarnet/context.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sarnet/error.hpp"

namespace sarnet {

namespace {
constexpr const char* kModule = "context_attention";
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_shape(const Tensor& t, const Shape& want, const char* name) {
  if (t.shape() != want) {
    throw DimensionError(kModule, std::string(name) + " has shape " + shape_str(t.shape()) +
                                      ", expected " + shape_str(want));
  }
}

void require_rank2(const Tensor& t, const char* name) {
  if (t.rank() != 2) {
    throw DimensionError(kModule, std::string(name) + " must be rank 2, got " + shape_str(t.shape()));
  }
}
}  // namespace

Tensor GridFeatures::stacked() const {
  const std::size_t n = cells(), d = d_m();
  Tensor out({2 * n, d});
  std::copy(left.data().begin(), left.data().end(), out.data().begin());
  std::copy(right.data().begin(), right.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(n * d));
  return out;
}

std::vector<Point> GridFeatures::centers() const {
  std::vector<Point> c = grid_centers(left_lung, n_d);
  const std::vector<Point> r = grid_centers(right_lung, n_d);
  c.insert(c.end(), r.begin(), r.end());
  return c;
}

void GridFeatures::validate() const {
  if (n_d < 1) throw ParameterError(kModule, "n_d must be >= 1");
  require_rank2(left, "left grid features");
  require_rank2(right, "right grid features");
  if (left.rows() != cells() || right.rows() != cells()) {
    throw DimensionError(kModule, "grid features need n_d^2 = " + std::to_string(cells()) +
                                      " rows, got " + shape_str(left.shape()) + " and " +
                                      shape_str(right.shape()));
  }
  if (left.cols() != right.cols()) {
    throw DimensionError(kModule, "left/right grid feature widths differ: " +
                                      shape_str(left.shape()) + " vs " + shape_str(right.shape()));
  }
  if (!left_lung.valid() || !right_lung.valid()) {
    throw SchemaError(kModule, "lung boxes must be non-degenerate");
  }
}

ContextParams ContextParams::init(const Dims& d, std::uint64_t seed, double stddev) {
  ContextParams p;
  p.W_a = gaussian_init({d.d_a, d.d_h}, seed, stddev);
  p.W_g = gaussian_init({d.d_m, d.d_h}, seed + 1, stddev);
  p.W_s = gaussian_init({1, 4}, seed + 2, stddev);
  p.W_k = gaussian_init({d.d_m, d.d_out}, seed + 3, stddev);
  return p;
}

ContextParams::Dims ContextParams::dims() const {
  return Dims{W_a.rows(), W_g.rows(), W_a.cols(), W_k.cols()};
}

std::size_t ContextParams::element_count() const {
  return W_a.size() + W_g.size() + W_s.size() + W_k.size();
}

void ContextParams::validate() const {
  require_rank2(W_a, "W_a");
  require_rank2(W_g, "W_g");
  require_rank2(W_k, "W_k");
  require_shape(W_s, {1, 4}, "W_s");
  if (W_a.cols() != W_g.cols()) {
    throw DimensionError(kModule, "W_a " + shape_str(W_a.shape()) + " and W_g " +
                                      shape_str(W_g.shape()) + " project to different widths");
  }
  if (W_k.rows() != W_g.rows()) {
    throw DimensionError(kModule, "W_k " + shape_str(W_k.shape()) + " input width differs from W_g " +
                                      shape_str(W_g.shape()));
  }
}

Tensor compatibility(const Tensor& f_a, const GridFeatures& grids, const ContextParams& p) {
  grids.validate();
  p.validate();
  require_rank2(f_a, "f_a");
  if (f_a.cols() != p.W_a.rows()) {
    throw DimensionError(kModule, "f_a " + shape_str(f_a.shape()) + " does not match W_a " +
                                      shape_str(p.W_a.shape()));
  }
  if (grids.d_m() != p.W_g.rows()) {
    throw DimensionError(kModule, "grid width " + std::to_string(grids.d_m()) +
                                      " does not match W_g " + shape_str(p.W_g.shape()));
  }
  const Tensor A = matmul(f_a, p.W_a);
  const Tensor B = matmul(grids.stacked(), p.W_g);
  return matmul(A, transpose(B));
}

std::array<double, 4> prior_offsets(const Box& a, const Point& g, const LungUnion& lu) {
  if (!(lu.w_l > 0.0) || !(lu.h_l > 0.0)) {
    throw DegenerateError(kModule, "lung union has non-positive width or height");
  }
  return {(a.x1 - g.x) / lu.w_l, (a.y1 - g.y) / lu.h_l, (a.x2 - g.x) / lu.w_l,
          (a.y2 - g.y) / lu.h_l};
}

double spatial_prior(const Box& roi, const Point& center, const LungUnion& lu, const Tensor& W_s) {
  if (W_s.size() != 4) throw DimensionError(kModule, "W_s must hold 4 weights");
  const auto s = prior_offsets(roi, center, lu);
  double u = 0.0;
  for (std::size_t k = 0; k < 4; ++k) u += W_s[k] * s[k];
  return u > 0.0 ? u : 0.0;
}

Tensor prior_preactivation(const std::vector<Box>& rois, const GridFeatures& grids,
                           const Tensor& W_s) {
  grids.validate();
  if (W_s.size() != 4) throw DimensionError(kModule, "W_s must hold 4 weights");
  const LungUnion lu = lung_union(grids.left_lung, grids.right_lung);
  const std::vector<Point> centers = grids.centers();
  Tensor U({rois.size(), centers.size()});
  for (std::size_t i = 0; i < rois.size(); ++i) {
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const auto s = prior_offsets(rois[i], centers[j], lu);
      double u = 0.0;
      for (std::size_t k = 0; k < 4; ++k) u += W_s[k] * s[k];
      U(i, j) = u;
    }
  }
  return U;
}

Tensor spatial_priors(const std::vector<Box>& rois, const GridFeatures& grids, const Tensor& W_s) {
  return relu(prior_preactivation(rois, grids, W_s));
}

Tensor attention_weights(const Tensor& F, const Tensor& P) {
  require_rank2(F, "compatibility");
  if (F.shape() != P.shape()) {
    throw DimensionError(kModule, "compatibility " + shape_str(F.shape()) + " and prior " +
                                      shape_str(P.shape()) + " disagree");
  }
  const std::size_t n = F.rows(), g = F.cols();
  Tensor out({n, g});
  std::vector<double> logits(g);
  for (std::size_t i = 0; i < n; ++i) {
    double f_max = kNegInf;
    for (std::size_t j = 0; j < g; ++j) {
      if (P(i, j) < 0.0 || !std::isfinite(P(i, j))) {
        throw ParameterError(kModule, "prior entries must be finite and >= 0 (proposal " +
                                          std::to_string(i) + ")");
      }
      if (P(i, j) > 0.0) f_max = std::max(f_max, F(i, j));
    }
    if (f_max == kNegInf) {
      throw DegenerateError(kModule, "every spatial prior is zero for proposal " + std::to_string(i));
    }
    double l_max = kNegInf;
    for (std::size_t j = 0; j < g; ++j) {
      logits[j] = P(i, j) > 0.0 ? std::log(P(i, j)) + (F(i, j) - f_max) : kNegInf;
      l_max = std::max(l_max, logits[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < g; ++j) {
      const double e = logits[j] == kNegInf ? 0.0 : std::exp(logits[j] - l_max);
      out(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < g; ++j) out(i, j) /= total;
  }
  return out;
}

Tensor aggregate(const Tensor& attn, const GridFeatures& grids, const Tensor& W_k) {
  grids.validate();
  require_rank2(attn, "attention");
  require_rank2(W_k, "W_k");
  if (attn.cols() != 2 * grids.cells()) {
    throw DimensionError(kModule, "attention " + shape_str(attn.shape()) + " does not cover " +
                                      std::to_string(2 * grids.cells()) + " grid cells");
  }
  if (W_k.rows() != grids.d_m()) {
    throw DimensionError(kModule, "W_k " + shape_str(W_k.shape()) + " does not take grid width " +
                                      std::to_string(grids.d_m()));
  }
  return matmul(matmul(attn, grids.stacked()), W_k);
}

ContextOutput context_forward(const ContextInputs& in, const ContextParams& p) {
  if (in.f_a.rank() != 2 || in.f_a.rows() != in.rois.size()) {
    throw DimensionError(kModule, "f_a " + shape_str(in.f_a.shape()) + " does not have one row per roi (" +
                                      std::to_string(in.rois.size()) + ")");
  }
  const Tensor F = compatibility(in.f_a, in.grids, p);
  const Tensor P = spatial_priors(in.rois, in.grids, p.W_s);
  ContextOutput out;
  out.attn = attention_weights(F, P);
  out.f_cxt = aggregate(out.attn, in.grids, p.W_k);
  return out;
}

ContextGrads context_grads(const ContextInputs& in, const ContextParams& p, const Tensor& cotangent) {
  if (in.f_a.rank() != 2 || in.f_a.rows() != in.rois.size()) {
    throw DimensionError(kModule, "f_a does not have one row per roi");
  }
  const Tensor G = in.grids.stacked();
  const Tensor A = matmul(in.f_a, p.W_a);
  const Tensor B = matmul(G, p.W_g);
  const Tensor F = compatibility(in.f_a, in.grids, p);
  const Tensor U = prior_preactivation(in.rois, in.grids, p.W_s);
  const Tensor P = relu(U);
  const Tensor attn = attention_weights(F, P);
  const Tensor agg = matmul(attn, G);
  const std::size_t n_r = in.rois.size(), n_g = G.rows();
  require_shape(cotangent, {n_r, p.W_k.cols()}, "cotangent");

  ContextGrads g;
  g.W_k = matmul(transpose(agg), cotangent);
  const Tensor d_agg = matmul(cotangent, transpose(p.W_k));
  const Tensor d_attn = matmul(d_agg, transpose(G));
  Tensor dG = matmul(transpose(attn), d_agg);

  // Softmax backward: dL = w * (dw - <w, dw>).
  Tensor dL({n_r, n_g});
  for (std::size_t i = 0; i < n_r; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < n_g; ++j) inner += attn(i, j) * d_attn(i, j);
    for (std::size_t j = 0; j < n_g; ++j) dL(i, j) = attn(i, j) * (d_attn(i, j) - inner);
  }

  // log P = log u on the active side; masked cells contribute nothing.
  const LungUnion lu = lung_union(in.grids.left_lung, in.grids.right_lung);
  const std::vector<Point> centers = in.grids.centers();
  g.W_s = Tensor({1, 4});
  for (std::size_t i = 0; i < n_r; ++i) {
    for (std::size_t j = 0; j < n_g; ++j) {
      if (!(U(i, j) > 0.0)) continue;
      const double du = dL(i, j) / U(i, j);
      const auto s = prior_offsets(in.rois[i], centers[j], lu);
      for (std::size_t k = 0; k < 4; ++k) g.W_s[k] += du * s[k];
    }
  }

  const Tensor dA = matmul(dL, B);
  const Tensor dB = matmul(transpose(dL), A);
  g.W_a = matmul(transpose(in.f_a), dA);
  g.f_a = matmul(dA, transpose(p.W_a));
  g.W_g = matmul(transpose(G), dB);
  dG = add(dG, matmul(dB, transpose(p.W_g)));

  const std::size_t cells = in.grids.cells(), d = in.grids.d_m();
  g.grid_left = Tensor({cells, d});
  g.grid_right = Tensor({cells, d});
  std::copy_n(dG.data().begin(), cells * d, g.grid_left.data().begin());
  std::copy_n(dG.data().begin() + static_cast<std::ptrdiff_t>(cells * d), cells * d,
              g.grid_right.data().begin());
  return g;
}

nlohmann::json to_json(const ContextParams& p) {
  return {{"W_a", to_json(p.W_a)}, {"W_g", to_json(p.W_g)}, {"W_s", to_json(p.W_s)},
          {"W_k", to_json(p.W_k)}};
}

ContextParams context_params_from_json(const nlohmann::json& j) {
  for (const char* key : {"W_a", "W_g", "W_s", "W_k"}) {
    if (!j.contains(key)) throw SchemaError(kModule, std::string("params document lacks ") + key);
  }
  ContextParams p;
  p.W_a = tensor_from_json(j.at("W_a"));
  p.W_g = tensor_from_json(j.at("W_g"));
  p.W_s = tensor_from_json(j.at("W_s"));
  p.W_k = tensor_from_json(j.at("W_k"));
  p.validate();
  return p;
}

nlohmann::json to_json(const GridFeatures& g) {
  return {{"n_d", g.n_d},
          {"left_lung", to_json(g.left_lung)},
          {"right_lung", to_json(g.right_lung)},
          {"left", to_json(g.left)},
          {"right", to_json(g.right)}};
}

GridFeatures grids_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError(kModule, "grid document must be an object");
  for (const char* key : {"n_d", "left_lung", "right_lung", "left", "right"}) {
    if (!j.contains(key)) throw SchemaError(kModule, std::string("grid document lacks ") + key);
  }
  if (!j.at("n_d").is_number_integer()) throw SchemaError(kModule, "grid n_d must be an integer");
  GridFeatures g;
  g.n_d = j.at("n_d").get<int>();
  g.left_lung = box_from_json(j.at("left_lung"));
  g.right_lung = box_from_json(j.at("right_lung"));
  g.left = tensor_from_json(j.at("left"));
  g.right = tensor_from_json(j.at("right"));
  g.validate();
  return g;
}

}  // namespace sarnet
