#include "sarnet/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "sarnet/error.hpp"
#include "sarnet/io.hpp"

namespace sarnet {

namespace {
constexpr const char* kModule = "geometry_spatial";
}

bool Box::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 < x2 && y1 < y2;
}

Box make_box(double x1, double y1, double x2, double y2) {
  Box b{x1, y1, x2, y2};
  if (!b.valid()) {
    throw SchemaError(kModule, "degenerate box (" + std::to_string(x1) + "," + std::to_string(y1) +
                                   "," + std::to_string(x2) + "," + std::to_string(y2) + ")");
  }
  return b;
}

Box box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw SchemaError(kModule, "box must be [x1,y1,x2,y2]");
  for (const auto& v : j)
    if (!v.is_number()) throw SchemaError(kModule, "box coordinates must be numbers");
  return make_box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

nlohmann::json to_json(const Box& b) { return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2}); }

const Box& AnatomicalParts::operator[](Part p) const {
  switch (p) {
    case Part::LeftLung: return left_lung;
    case Part::RightLung: return right_lung;
    case Part::LeftScapula: return left_scapula;
    case Part::RightScapula: return right_scapula;
    case Part::Heart: return heart;
  }
  return heart;
}

Box& AnatomicalParts::operator[](Part p) {
  return const_cast<Box&>(static_cast<const AnatomicalParts&>(*this)[p]);
}

LungUnion lung_union(const Box& left, const Box& right) {
  LungUnion lu;
  lu.box = Box{std::min(left.x1, right.x1), std::min(left.y1, right.y1),
               std::max(left.x2, right.x2), std::max(left.y2, right.y2)};
  lu.w_l = lu.box.width();
  lu.h_l = lu.box.height();
  return lu;
}

LungUnion lung_union(const AnatomicalParts& parts) {
  return lung_union(parts.left_lung, parts.right_lung);
}

Tensor part_relation(const Box& a, const Box& p, const LungUnion& lu) {
  if (!(lu.w_l > 0.0) || !(lu.h_l > 0.0)) {
    throw DegenerateError(kModule, "lung union has non-positive width or height");
  }
  const double w = lu.w_l, h = lu.h_l;
  return Tensor::vector({(a.x1 - p.x1) / w, (a.y1 - p.y1) / h, (a.x1 - p.x2) / w,
                         (a.y1 - p.y2) / h, (a.x2 - p.x1) / w, (a.y2 - p.y1) / h,
                         (a.x2 - p.x2) / w, (a.y2 - p.y2) / h});
}

Tensor spatial_vector(const Box& roi, const AnatomicalParts& parts) {
  const LungUnion lu = lung_union(parts);
  Tensor m({kSpatialWidth});
  for (std::size_t p = 0; p < kNumParts; ++p) {
    const Tensor block = part_relation(roi, parts[static_cast<Part>(p)], lu);
    std::copy(block.data().begin(), block.data().end(),
              m.data().begin() + static_cast<std::ptrdiff_t>(p * kRelationWidth));
  }
  return m;
}

Tensor sinusoidal_embed(const Tensor& m, int d_e) {
  if (d_e < 1) throw ParameterError(kModule, "d_e must be >= 1, got " + std::to_string(d_e));
  if (m.rank() != 1 && m.rank() != 2) {
    throw DimensionError(kModule, "sinusoidal_embed expects rank 1 or 2, got " +
                                      shape_str(m.shape()));
  }
  const std::size_t rows = m.rank() == 1 ? 1 : m.rows();
  const std::size_t n = m.shape().back();
  const std::size_t de = static_cast<std::size_t>(d_e);
  const std::size_t half = n * de;

  std::vector<double> inv_wavelength(de);
  for (std::size_t j = 0; j < de; ++j) {
    inv_wavelength[j] = 1.0 / std::pow(1000.0, static_cast<double>(j) / static_cast<double>(d_e));
  }

  Shape out_shape = m.rank() == 1 ? Shape{2 * half} : Shape{rows, 2 * half};
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = m.data().data() + r * n;
    double* dst = out.data().data() + r * 2 * half;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < de; ++j) {
        const double arg = src[i] * inv_wavelength[j];
        dst[i * de + j] = std::sin(arg);
        dst[half + i * de + j] = std::cos(arg);
      }
    }
  }
  return out;
}

Tensor spatial_features(const std::vector<Box>& rois, const AnatomicalParts& parts, int d_e) {
  Tensor m({rois.size(), kSpatialWidth});
  for (std::size_t r = 0; r < rois.size(); ++r) {
    const Tensor v = spatial_vector(rois[r], parts);
    std::copy(v.data().begin(), v.data().end(), m.row(r).begin());
  }
  return sinusoidal_embed(m, d_e);
}

std::vector<Point> grid_centers(const Box& box, int n_d) {
  if (n_d < 1) throw ParameterError(kModule, "n_d must be >= 1, got " + std::to_string(n_d));
  const double cw = box.width() / n_d;
  const double ch = box.height() / n_d;
  std::vector<Point> centers;
  centers.reserve(static_cast<std::size_t>(n_d) * n_d);
  for (int r = 0; r < n_d; ++r)
    for (int c = 0; c < n_d; ++c)
      centers.push_back({box.x1 + (c + 0.5) * cw, box.y1 + (r + 0.5) * ch});
  return centers;
}

AnatomicalParts parts_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError(kModule, "parts record must be an object");
  AnatomicalParts parts;
  for (std::size_t p = 0; p < kNumParts; ++p) {
    const char* name = kPartNames[p];
    if (!j.contains(name)) throw SchemaError(kModule, std::string("parts record lacks ") + name);
    parts[static_cast<Part>(p)] = box_from_json(j.at(name));
  }
  return parts;
}

nlohmann::json to_json(const AnatomicalParts& parts) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t p = 0; p < kNumParts; ++p) j[kPartNames[p]] = to_json(parts[static_cast<Part>(p)]);
  return j;
}

std::vector<PartsRecord> read_parts_file(const std::string& path) {
  const nlohmann::json doc = io::read_json(path);
  std::vector<PartsRecord> out;
  auto one = [&](const nlohmann::json& rec) {
    PartsRecord r;
    if (rec.is_object() && rec.contains("image_id")) r.image_id = rec.at("image_id").get<long long>();
    r.parts = parts_from_json(rec);
    out.push_back(r);
  };
  if (doc.is_array()) {
    for (const auto& rec : doc) one(rec);
  } else {
    one(doc);
  }
  return out;
}

void write_parts_file(const std::string& path, const std::vector<PartsRecord>& records) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json j = to_json(r.parts);
    if (r.image_id >= 0) j["image_id"] = r.image_id;
    doc.push_back(std::move(j));
  }
  io::write_json_atomic(path, doc);
}

std::vector<Box> rois_from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.cols() != 4) {
    throw DimensionError(kModule, "rois tensor must be [n_r x 4], got " + shape_str(t.shape()));
  }
  std::vector<Box> rois;
  rois.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) rois.push_back(make_box(t(r, 0), t(r, 1), t(r, 2), t(r, 3)));
  return rois;
}

Tensor rois_to_tensor(const std::vector<Box>& rois) {
  Tensor t({rois.size(), 4});
  for (std::size_t r = 0; r < rois.size(); ++r) {
    t(r, 0) = rois[r].x1;
    t(r, 1) = rois[r].y1;
    t(r, 2) = rois[r].x2;
    t(r, 3) = rois[r].y2;
  }
  return t;
}

}  // namespace sarnet
