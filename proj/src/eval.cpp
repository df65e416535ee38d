#include "sarnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "sarnet/error.hpp"

namespace sarnet {

namespace {
constexpr const char* kModule = "eval_detection";
constexpr int kRecallPoints = 101;

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << *v;
  return os.str();
}
}  // namespace

double iou_box(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<std::uint8_t> rasterize(const Polygon& poly, int width, int height) {
  if (width < 0 || height < 0) throw ParameterError(kModule, "canvas extents must be nonnegative");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  const std::size_t n = poly.size();
  if (n < 3) return mask;
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p0 = poly[i];
      const Point& p1 = poly[(i + 1) % n];
      if ((p0.y <= yc) != (p1.y <= yc)) xs.push_back(p0.x + (yc - p0.y) * (p1.x - p0.x) / (p1.y - p0.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Inside when xs[k] <= x + .5 < xs[k + 1].
      const double lo = std::ceil(xs[k] - 0.5);
      const double hi = std::ceil(xs[k + 1] - 0.5);
      const int x0 = static_cast<int>(std::clamp(lo, 0.0, static_cast<double>(width)));
      const int x1 = static_cast<int>(std::clamp(hi, 0.0, static_cast<double>(width)));
      std::uint8_t* row = mask.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width);
      for (int x = x0; x < x1; ++x) row[x] = 1;
    }
  }
  return mask;
}

namespace {
MaskIou bitmap_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t inter = 0, uni = 0, area_a = 0, area_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] & b[i];
    uni += a[i] | b[i];
    area_a += a[i];
    area_b += b[i];
  }
  MaskIou out;
  out.degenerate = area_a == 0 || area_b == 0;
  out.iou = (out.degenerate || uni == 0) ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return out;
}
}  // namespace

MaskIou iou_mask(const Polygon& a, const Polygon& b, int width, int height) {
  return bitmap_iou(rasterize(a, width, height), rasterize(b, width, height));
}

double box_iou_fn(const Instance& det, const Instance& gt) { return iou_box(det.box, gt.box); }

namespace {
std::vector<std::size_t> score_order(const std::vector<Instance>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score.value_or(0.0) > dets[b].score.value_or(0.0);
  });
  return order;
}
}  // namespace

MatchResult match_detections(const std::vector<Instance>& dets, const std::vector<Instance>& gts,
                             const IouFn& iou, double threshold) {
  MatchResult m;
  m.det_to_gt.assign(dets.size(), -1);
  m.gt_matched.assign(gts.size(), false);
  for (std::size_t d : score_order(dets)) {
    long long best = -1;
    double best_iou = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (m.gt_matched[g] || gts[g].image_id != dets[d].image_id ||
          gts[g].category_id != dets[d].category_id) {
        continue;
      }
      const double v = iou(dets[d], gts[g]);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best = static_cast<long long>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      m.det_to_gt[d] = best;
      m.gt_matched[static_cast<std::size_t>(best)] = true;
    }
  }
  return m;
}

std::vector<ScoredHit> rank_hits(std::vector<ScoredHit> hits) {
  std::stable_sort(hits.begin(), hits.end(),
                   [](const ScoredHit& a, const ScoredHit& b) { return a.score > b.score; });
  return hits;
}

std::optional<double> average_precision(const std::vector<ScoredHit>& hits, std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  const std::vector<ScoredHit> ranked = rank_hits(hits);
  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += ranked[k].tp ? 1 : 0;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double sum = 0.0;
  for (int t = 0; t < kRecallPoints; ++t) {
    const double r = t / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / kRecallPoints;
}

std::optional<double> recall_at_fp(const std::vector<ScoredHit>& hits, std::size_t n_gt,
                                   std::size_t n_images, double fp_per_image) {
  if (n_gt == 0) return std::nullopt;
  if (n_images == 0) throw ParameterError(kModule, "recall_at_fp needs at least one image");
  if (!(fp_per_image >= 0.0)) throw ParameterError(kModule, "FP/image target must be >= 0");
  const std::vector<ScoredHit> ranked = rank_hits(hits);
  // Slack absorbs rounding in target * n_images (0.1 * 70 != 7).
  const double fp_budget = fp_per_image * static_cast<double>(n_images) * (1.0 + 1e-12);
  std::size_t tp = 0, fp = 0, best_tp = 0;
  // Thresholds sit at distinct scores; a tie group is admitted as a whole.
  for (std::size_t k = 0; k < ranked.size();) {
    std::size_t end = k;
    std::size_t group_tp = 0, group_fp = 0;
    while (end < ranked.size() && ranked[end].score == ranked[k].score) {
      (ranked[end].tp ? group_tp : group_fp)++;
      ++end;
    }
    tp += group_tp;
    fp += group_fp;
    if (static_cast<double>(fp) > fp_budget) break;
    best_tp = tp;
    k = end;
  }
  return static_cast<double>(best_tp) / static_cast<double>(n_gt);
}

EvalReport evaluate(const AnnotationSet& gt, const std::vector<Instance>& dets, const EvalConfig& cfg) {
  EvalReport report;
  report.kind = cfg.mask ? "mask" : "bbox";
  report.config = cfg;
  report.n_images = gt.images.size();

  // Split both sides by canonical category, keeping input order.
  std::vector<std::vector<Instance>> gts_by(kNumCategories), dets_by(kNumCategories);
  for (const auto& g : gt.instances) gts_by[static_cast<std::size_t>(gt.category_index(g.category_id))].push_back(g);
  for (const auto& d : dets) dets_by[static_cast<std::size_t>(gt.category_index(d.category_id))].push_back(d);

  std::unordered_map<const Instance*, std::vector<std::uint8_t>> rasters;
  IouFn iou = box_iou_fn;
  if (cfg.mask) {
    auto raster_of = [&](const Instance& inst, const char* what) {
      if (!inst.polygon) {
        throw SchemaError(kModule, std::string(what) + " " + std::to_string(inst.id) +
                                       " has no polygon for mask evaluation");
      }
      const Image& im = gt.image(inst.image_id);
      auto bitmap = rasterize(*inst.polygon, im.width, im.height);
      if (std::none_of(bitmap.begin(), bitmap.end(), [](std::uint8_t v) { return v != 0; })) {
        ++report.degenerate_masks;
      }
      rasters.emplace(&inst, std::move(bitmap));
    };
    for (const auto& bucket : gts_by)
      for (const auto& g : bucket) raster_of(g, "annotation");
    for (const auto& bucket : dets_by)
      for (const auto& d : bucket) raster_of(d, "detection");
    iou = [&rasters](const Instance& d, const Instance& g) {
      return bitmap_iou(rasters.at(&d), rasters.at(&g)).iou;
    };
  }

  for (std::size_t c = 0; c < kNumCategories; ++c) {
    CategoryResult cr;
    cr.name = kCategories[c].name;
    cr.parent = kCategories[c].parent;
    cr.n_gt = gts_by[c].size();
    cr.n_det = dets_by[c].size();
    auto hits_at = [&](double thr) {
      const MatchResult m = match_detections(dets_by[c], gts_by[c], iou, thr);
      std::vector<ScoredHit> hits;
      for (std::size_t d = 0; d < dets_by[c].size(); ++d) {
        hits.push_back({dets_by[c][d].score.value_or(0.0), m.is_tp(d)});
      }
      return hits;
    };
    for (double thr : cfg.iou_thresholds) cr.ap.push_back(average_precision(hits_at(thr), cr.n_gt));
    const std::vector<ScoredHit> recall_hits = hits_at(cfg.recall_iou);
    for (double fp : cfg.fp_per_image) {
      cr.recall.push_back(recall_at_fp(recall_hits, cr.n_gt, std::max<std::size_t>(1, report.n_images), fp));
    }
    report.categories.push_back(std::move(cr));
  }

  for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
    std::vector<std::optional<double>> col;
    for (const auto& cr : report.categories) col.push_back(cr.ap[t]);
    report.mean_ap.push_back(mean_of(col));
  }
  for (std::size_t t = 0; t < cfg.fp_per_image.size(); ++t) {
    std::vector<std::optional<double>> col;
    for (const auto& cr : report.categories) col.push_back(cr.recall[t]);
    report.mean_recall.push_back(mean_of(col));
  }
  for (Parent p : {Parent::Lung, Parent::Pleura, Parent::Mediastinum}) {
    EvalReport::SuperClass sc{p, {}};
    for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
      std::vector<std::optional<double>> col;
      for (const auto& cr : report.categories)
        if (cr.parent == p) col.push_back(cr.ap[t]);
      sc.ap.push_back(mean_of(col));
    }
    report.superclasses.push_back(std::move(sc));
  }
  return report;
}

nlohmann::json to_json(const EvalReport& r) {
  auto opt_list = [](const std::vector<std::optional<double>>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : v) a.push_back(opt_json(x));
    return a;
  };
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : r.categories) {
    cats.push_back({{"name", c.name},
                    {"parent", parent_name(c.parent)},
                    {"n_gt", c.n_gt},
                    {"n_det", c.n_det},
                    {"ap", opt_list(c.ap)},
                    {"recall_at_fp", opt_list(c.recall)}});
  }
  nlohmann::json supers = nlohmann::json::array();
  for (const auto& s : r.superclasses) supers.push_back({{"parent", parent_name(s.parent)}, {"ap", opt_list(s.ap)}});
  return {{"kind", r.kind},
          {"iou_thresholds", r.config.iou_thresholds},
          {"fp_per_image", r.config.fp_per_image},
          {"recall_iou", r.config.recall_iou},
          {"n_images", r.n_images},
          {"categories", cats},
          {"mean_ap", opt_list(r.mean_ap)},
          {"mean_recall_at_fp", opt_list(r.mean_recall)},
          {"superclasses", supers},
          {"degenerate_masks", r.degenerate_masks}};
}

std::string to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "category,parent,n_gt,n_det";
  for (double t : r.config.iou_thresholds) os << ",ap" << std::lround(t * 100);
  for (double f : r.config.fp_per_image) os << ",recall@" << f << "fp";
  os << '\n';
  for (const auto& c : r.categories) {
    os << c.name << ',' << parent_name(c.parent) << ',' << c.n_gt << ',' << c.n_det;
    for (const auto& v : c.ap) os << ',' << fmt(v);
    for (const auto& v : c.recall) os << ',' << fmt(v);
    os << '\n';
  }
  os << "mean,,,";
  for (const auto& v : r.mean_ap) os << ',' << fmt(v);
  for (const auto& v : r.mean_recall) os << ',' << fmt(v);
  os << '\n';
  return os.str();
}

}  // namespace sarnet
