#include "sarnet/fusion.hpp"

#include <iomanip>
#include <sstream>

#include "sarnet/error.hpp"

namespace sarnet {

namespace {
constexpr const char* kModule = "fusion";
constexpr std::array<const char*, 4> kSegmentNames = {"f", "f_spa", "f_cxt", "f_cate"};
}  // namespace

Tensor FusedFeatures::segment(std::size_t index) const {
  const Segment& s = layout.at(index);
  const std::size_t n = f_prime.rows();
  Tensor out({n, s.width});
  for (std::size_t r = 0; r < n; ++r) {
    auto src = f_prime.row(r).subspan(s.offset, s.width);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

FusedFeatures fuse(const Tensor& f, const Tensor& f_spa, const Tensor& f_cxt, const Tensor& f_cate) {
  const std::array<const Tensor*, 4> inputs = {&f, &f_spa, &f_cxt, &f_cate};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i]->rank() != 2) {
      throw DimensionError(kModule, std::string(kSegmentNames[i]) + " must be [n_r x width], got " +
                                        shape_str(inputs[i]->shape()));
    }
    if (inputs[i]->rows() != f.rows()) {
      throw DimensionError(kModule, std::string(kSegmentNames[i]) + " has " +
                                        std::to_string(inputs[i]->rows()) + " rows, f has " +
                                        std::to_string(f.rows()));
    }
  }
  FusedFeatures out;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out.layout[i] = Segment{kSegmentNames[i], offset, inputs[i]->cols()};
    offset += inputs[i]->cols();
  }
  const std::vector<Tensor> parts = {f, f_spa, f_cxt, f_cate};
  out.f_prime = concat_last_axis(parts);
  return out;
}

nlohmann::json layout_json(const FusedFeatures& fused) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : fused.layout) {
    segs.push_back({{"name", s.name}, {"offset", s.offset}, {"width", s.width}});
  }
  return {{"rows", fused.f_prime.rows()}, {"width", fused.width()}, {"segments", segs}};
}

ParamCount param_count(const ContextParams& p) {
  ParamCount c{"contextual", 0,
               {{"W_a", p.W_a.size()}, {"W_g", p.W_g.size()}, {"W_s", p.W_s.size()}, {"W_k", p.W_k.size()}}};
  for (const auto& [_, n] : c.tensors) c.elements += n;
  return c;
}

ParamCount param_count(const DiseaseParams& p) {
  ParamCount c{"disease", 0, {{"W_emb", p.W_emb.size()}, {"W_t", p.W_t.size()}, {"W_cls", p.W_cls.size()}}};
  for (const auto& [_, n] : c.tensors) c.elements += n;
  return c;
}

ParamCount spatial_param_count() { return ParamCount{"spatial", 0, {}}; }

std::string format_param_report(const std::vector<ParamCount>& counts) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "module" << std::right << std::setw(12) << "elements"
     << std::setw(12) << "published" << '\n';
  for (const auto& c : counts) {
    std::string published = "-";
    if (c.module == "spatial") published = "+0.09M";
    if (c.module == "disease") published = "+0.57M";
    if (c.module == "contextual") published = "+3.29M";
    os << std::left << std::setw(12) << c.module << std::right << std::setw(12) << c.elements
       << std::setw(12) << published << '\n';
    for (const auto& [name, n] : c.tensors) {
      os << "  " << std::left << std::setw(10) << name << std::right << std::setw(12) << n << '\n';
    }
  }
  return os.str();
}

}  // namespace sarnet
