#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarnet/dataset.hpp"
#include "sarnet/geometry.hpp"

namespace sarnet {

double iou_box(const Box& a, const Box& b);

// Pixel (x, y) is inside when its center (x + .5, y + .5) is inside the
// polygon under the even-odd rule. Row-major, width * height bytes.
std::vector<std::uint8_t> rasterize(const Polygon& poly, int width, int height);

struct MaskIou {
  double iou = 0.0;
  bool degenerate = false;  // a polygon covered no pixel center
};
MaskIou iou_mask(const Polygon& a, const Polygon& b, int width, int height);

using IouFn = std::function<double(const Instance& det, const Instance& gt)>;
double box_iou_fn(const Instance& det, const Instance& gt);

// Greedy matching within each (image, category): detections in descending
// score order (ties by input order) take the unmatched ground truth with the
// highest IoU >= threshold (ties by lower ground-truth index).
struct MatchResult {
  std::vector<long long> det_to_gt;  // ground-truth index per detection, -1 for FP
  std::vector<bool> gt_matched;

  bool is_tp(std::size_t det) const { return det_to_gt[det] >= 0; }
};
MatchResult match_detections(const std::vector<Instance>& dets, const std::vector<Instance>& gts,
                             const IouFn& iou, double threshold);

// One detection in a category's corpus ranking.
struct ScoredHit {
  double score = 0;
  bool tp = false;
};

// Stable descending-score order; ties keep input order.
std::vector<ScoredHit> rank_hits(std::vector<ScoredHit> hits);

// Area under the right-monotonized PR curve sampled at recall 0, .01, ..., 1.
// nullopt when there is no ground truth.
std::optional<double> average_precision(const std::vector<ScoredHit>& hits, std::size_t n_gt);

// Lowest score threshold (among detection scores, keeping score >= t) whose
// FP count per image stays within `fp_per_image`; recall at that threshold.
// nullopt when there is no ground truth.
std::optional<double> recall_at_fp(const std::vector<ScoredHit>& hits, std::size_t n_gt,
                                   std::size_t n_images, double fp_per_image);

struct EvalConfig {
  std::vector<double> iou_thresholds = {0.25, 0.5, 0.75};
  std::vector<double> fp_per_image = {0.1};
  double recall_iou = 0.25;
  bool mask = false;
};

struct CategoryResult {
  std::string name;
  Parent parent = Parent::Lung;
  std::size_t n_gt = 0, n_det = 0;
  std::vector<std::optional<double>> ap;      // per IoU threshold
  std::vector<std::optional<double>> recall;  // per FP/image target
};

struct EvalReport {
  std::string kind;  // "bbox" or "mask"
  EvalConfig config;
  std::size_t n_images = 0;
  std::vector<CategoryResult> categories;
  // Means skip categories without ground truth.
  std::vector<std::optional<double>> mean_ap;
  std::vector<std::optional<double>> mean_recall;
  struct SuperClass {
    Parent parent;
    std::vector<std::optional<double>> ap;
  };
  std::vector<SuperClass> superclasses;
  std::size_t degenerate_masks = 0;
};

EvalReport evaluate(const AnnotationSet& gt, const std::vector<Instance>& dets, const EvalConfig& cfg = {});

nlohmann::json to_json(const EvalReport& r);
std::string to_csv(const EvalReport& r);

}  // namespace sarnet
