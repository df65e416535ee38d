#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarnet/tensor.hpp"

namespace sarnet {

// Axis-aligned box in pixels, top-left origin, y growing downward.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

// Throws SchemaError unless x1 < x2 and y1 < y2 with finite coordinates.
Box make_box(double x1, double y1, double x2, double y2);
Box box_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Box& b);

struct Point {
  double x = 0, y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

enum class Part : std::size_t { LeftLung, RightLung, LeftScapula, RightScapula, Heart };
inline constexpr std::size_t kNumParts = 5;
// Canonical concatenation order of the part blocks.
inline constexpr std::array<const char*, kNumParts> kPartNames = {
    "left_lung", "right_lung", "left_scapula", "right_scapula", "heart"};

struct AnatomicalParts {
  Box left_lung, right_lung, left_scapula, right_scapula, heart;

  const Box& operator[](Part p) const;
  Box& operator[](Part p);
  friend bool operator==(const AnatomicalParts&, const AnatomicalParts&) = default;
};

struct LungUnion {
  Box box;
  double w_l = 0, h_l = 0;
};

inline constexpr std::size_t kRelationWidth = 8;
inline constexpr std::size_t kSpatialWidth = kRelationWidth * kNumParts;  // 40

LungUnion lung_union(const Box& left_lung, const Box& right_lung);
LungUnion lung_union(const AnatomicalParts& parts);

// Normalized corner differences of `roi` against one part.
Tensor part_relation(const Box& roi, const Box& part, const LungUnion& lu);

// Five part_relation blocks in canonical part order (40 values).
Tensor spatial_vector(const Box& roi, const AnatomicalParts& parts);

// Per scalar m_i: d_e sines at wavelengths 1000^{j/d_e}; all sine blocks
// first, then the matching cosine blocks. Accepts [n] or [n_r x n].
Tensor sinusoidal_embed(const Tensor& m, int d_e);

// f_spa for every roi: [n_r x 80*d_e].
Tensor spatial_features(const std::vector<Box>& rois, const AnatomicalParts& parts, int d_e);

// n_d*n_d cell centers, row-major (y outer, x inner).
std::vector<Point> grid_centers(const Box& box, int n_d);

AnatomicalParts parts_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnatomicalParts& p);

// Parts files hold one record or an array of records keyed by part name;
// array records may carry an "image_id".
struct PartsRecord {
  long long image_id = -1;
  AnatomicalParts parts;
};
std::vector<PartsRecord> read_parts_file(const std::string& path);
void write_parts_file(const std::string& path, const std::vector<PartsRecord>& records);

// Rois are stored as an [n_r x 4] tensor of (x1, y1, x2, y2).
std::vector<Box> rois_from_tensor(const Tensor& t);
Tensor rois_to_tensor(const std::vector<Box>& rois);

}  // namespace sarnet
