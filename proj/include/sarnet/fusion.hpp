#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarnet/context.hpp"
#include "sarnet/disease.hpp"
#include "sarnet/tensor.hpp"

namespace sarnet {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t width = 0;
};

// f' = [f : f_spa : f_cxt : f_cate] plus where each segment starts.
struct FusedFeatures {
  Tensor f_prime;
  std::array<Segment, 4> layout;

  std::size_t width() const { return f_prime.cols(); }
  // Copy of one segment's columns.
  Tensor segment(std::size_t index) const;
};

FusedFeatures fuse(const Tensor& f, const Tensor& f_spa, const Tensor& f_cxt, const Tensor& f_cate);

nlohmann::json layout_json(const FusedFeatures& fused);

struct ParamCount {
  std::string module;
  std::size_t elements = 0;
  std::vector<std::pair<std::string, std::size_t>> tensors;
};

ParamCount param_count(const ContextParams& p);
ParamCount param_count(const DiseaseParams& p);
// The spatial module has no learned weights.
ParamCount spatial_param_count();

// Per-module element counts next to the published parameter deltas
// (+0.09M spatial, +3.29M contextual, +0.57M disease). The weight shapes
// alone do not reproduce those deltas; the report shows both.
std::string format_param_report(const std::vector<ParamCount>& counts);

}  // namespace sarnet
