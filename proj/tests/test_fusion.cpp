#include "doctest.h"
#include "sarnet/error.hpp"
#include "sarnet/fusion.hpp"

using namespace sarnet;

TEST_CASE("fuse default widths") {
  const Tensor f({2, 1024}, 1.0), spa({2, 640}, 2.0), cxt({2, 1024}, 3.0), cate({2, 256}, 4.0);
  const FusedFeatures fused = fuse(f, spa, cxt, cate);
  CHECK(fused.width() == 2944);
  CHECK(fused.layout[0].name == "f");
  CHECK(fused.layout[1].offset == 1024);
  CHECK(fused.layout[2].offset == 1664);
  CHECK(fused.layout[3].offset == 2688);
  CHECK(fused.layout[3].width == 256);
}

TEST_CASE("fuse round trip and zero-width segments") {
  const Tensor f = gaussian_init({3, 5}, 1, 1.0), spa = gaussian_init({3, 2}, 2, 1.0);
  const Tensor cxt({3, 0}), cate = gaussian_init({3, 4}, 3, 1.0);
  const FusedFeatures fused = fuse(f, spa, cxt, cate);
  CHECK(fused.width() == 11);
  CHECK(fused.segment(0) == f);
  CHECK(fused.segment(1) == spa);
  CHECK(fused.segment(2).shape() == Shape{3, 0});
  CHECK(fused.segment(3) == cate);
  CHECK(fused.f_prime(1, 7) == cate(1, 0));

  CHECK_THROWS_AS(fuse(f, Tensor({2, 2}), cxt, cate), DimensionError);
  const nlohmann::json lay = layout_json(fused);
  CHECK(lay["segments"].size() == 4);
  CHECK(lay["width"] == 11);
}

TEST_CASE("parameter counts") {
  const ParamCount crm = param_count(ContextParams::init({}, 0));
  CHECK(crm.elements == 1572868);
  CHECK(crm.tensors.size() == 4);
  const ParamCount drm = param_count(DiseaseParams::init({}, 0));
  CHECK(drm.elements == 278784);
  CHECK(param_count(ContextParams{}).elements == 0);
  CHECK(param_count(DiseaseParams{}).elements == 0);
  CHECK(spatial_param_count().elements == 0);
  const std::string report = format_param_report({spatial_param_count(), crm, drm});
  CHECK(report.find("1572868") != std::string::npos);
  CHECK(report.find("3.29") != std::string::npos);
}
