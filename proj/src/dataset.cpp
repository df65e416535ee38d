#include "sarnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sarnet/error.hpp"
#include "sarnet/io.hpp"

namespace sarnet {

namespace {
constexpr const char* kModule = "dataset_io";

std::optional<Parent> parent_from_name(const std::string& s) {
  if (s == "LUNG") return Parent::Lung;
  if (s == "PLEURA") return Parent::Pleura;
  if (s == "MEDIASTINUM") return Parent::Mediastinum;
  return std::nullopt;
}

long long require_int(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number_integer()) {
    throw SchemaError(kModule, where + ": missing integer \"" + key + "\"");
  }
  return j.at(key).get<long long>();
}

Polygon polygon_from_flat(const nlohmann::json& seg, const std::string& where) {
  // Accept [[x,y,x,y,...]] (one ring) or [x,y,x,y,...].
  const nlohmann::json* ring = &seg;
  if (seg.is_array() && !seg.empty() && seg.front().is_array()) {
    if (seg.size() != 1) throw SchemaError(kModule, where + ": multi-ring segmentation unsupported");
    ring = &seg.front();
  }
  if (!ring->is_array() || ring->size() % 2 != 0) {
    throw SchemaError(kModule, where + ": segmentation must be a flat list of x,y pairs");
  }
  Polygon poly;
  for (std::size_t i = 0; i < ring->size(); i += 2) {
    const auto& x = (*ring)[i];
    const auto& y = (*ring)[i + 1];
    if (!x.is_number() || !y.is_number()) {
      throw SchemaError(kModule, where + ": segmentation coordinates must be numbers");
    }
    poly.push_back({x.get<double>(), y.get<double>()});
  }
  return poly;
}

nlohmann::json polygon_to_flat(const Polygon& poly) {
  nlohmann::json ring = nlohmann::json::array();
  for (const auto& p : poly) {
    ring.push_back(p.x);
    ring.push_back(p.y);
  }
  return nlohmann::json::array({ring});
}

Box box_from_xywh(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw SchemaError(kModule, where + ": bbox must be [x,y,w,h]");
  for (const auto& v : j)
    if (!v.is_number()) throw SchemaError(kModule, where + ": bbox entries must be numbers");
  const double x = j[0].get<double>(), y = j[1].get<double>();
  const double w = j[2].get<double>(), h = j[3].get<double>();
  return Box{x, y, x + w, y + h};
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

const char* parent_name(Parent p) {
  switch (p) {
    case Parent::Lung: return "LUNG";
    case Parent::Pleura: return "PLEURA";
    case Parent::Mediastinum: return "MEDIASTINUM";
  }
  return "?";
}

int canonical_index(const std::string& name) {
  for (std::size_t i = 0; i < kNumCategories; ++i)
    if (name == kCategories[i].name) return static_cast<int>(i);
  return -1;
}

std::vector<Category> canonical_categories() {
  std::vector<Category> out;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    out.push_back({static_cast<long long>(i + 1), kCategories[i].name, kCategories[i].parent});
  }
  return out;
}

int AnnotationSet::category_index(long long category_id) const {
  for (const auto& c : categories) {
    if (c.id == category_id) {
      const int idx = canonical_index(c.name);
      if (idx < 0) throw SchemaError(kModule, "category '" + c.name + "' is not canonical");
      return idx;
    }
  }
  throw SchemaError(kModule, "unknown category id " + std::to_string(category_id));
}

const Image& AnnotationSet::image(long long image_id) const {
  for (const auto& im : images)
    if (im.id == image_id) return im;
  throw SchemaError(kModule, "unknown image id " + std::to_string(image_id));
}

std::vector<std::vector<int>> AnnotationSet::image_label_sets() const {
  std::unordered_map<long long, std::size_t> slot;
  for (std::size_t i = 0; i < images.size(); ++i) slot.emplace(images[i].id, i);
  std::unordered_map<long long, int> cat;
  for (const auto& c : categories) cat.emplace(c.id, canonical_index(c.name));
  std::vector<std::set<int>> sets(images.size());
  for (const auto& inst : instances) {
    const auto s = slot.find(inst.image_id);
    if (s == slot.end()) throw SchemaError(kModule, "unknown image id " + std::to_string(inst.image_id));
    const auto c = cat.find(inst.category_id);
    if (c == cat.end() || c->second < 0) {
      throw SchemaError(kModule, "unknown category id " + std::to_string(inst.category_id));
    }
    sets[s->second].insert(c->second);
  }
  std::vector<std::vector<int>> out;
  out.reserve(sets.size());
  for (auto& s : sets) out.emplace_back(s.begin(), s.end());
  return out;
}

void AnnotationSet::validate(const std::string& source) const {
  std::vector<std::string> problems;
  auto note = [&](std::string msg) { problems.push_back(std::move(msg)); };

  std::unordered_map<long long, const Image*> by_id;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& im = images[i];
    if (!by_id.emplace(im.id, &im).second) note("images[" + std::to_string(i) + "]: duplicate id " + std::to_string(im.id));
    if (im.width <= 0 || im.height <= 0) note("images[" + std::to_string(i) + "]: non-positive extents");
  }

  std::unordered_map<long long, int> cat_ids;
  std::set<int> seen_canonical;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const auto& c = categories[i];
    const std::string where = "categories[" + std::to_string(i) + "]";
    const int idx = canonical_index(c.name);
    if (idx < 0) {
      note(where + ": unknown category '" + c.name + "'");
      continue;
    }
    if (kCategories[static_cast<std::size_t>(idx)].parent != c.parent) {
      note(where + ": '" + c.name + "' must have parent " +
           parent_name(kCategories[static_cast<std::size_t>(idx)].parent));
    }
    if (!cat_ids.emplace(c.id, idx).second) note(where + ": duplicate id " + std::to_string(c.id));
    if (!seen_canonical.insert(idx).second) note(where + ": duplicate name '" + c.name + "'");
  }
  if (seen_canonical.size() != kNumCategories) {
    note("categories: expected the 13 canonical categories, found " + std::to_string(seen_canonical.size()));
  }

  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const std::string where = "annotations[" + std::to_string(i) + "]";
    const auto im = by_id.find(inst.image_id);
    if (im == by_id.end()) {
      note(where + ": image_id " + std::to_string(inst.image_id) + " not found");
    } else if (inst.box.x1 < 0 || inst.box.y1 < 0 || inst.box.x2 > im->second->width ||
               inst.box.y2 > im->second->height) {
      note(where + ": box outside image " + std::to_string(inst.image_id));
    }
    if (!cat_ids.count(inst.category_id)) {
      note(where + ": category_id " + std::to_string(inst.category_id) + " not found");
    }
    if (!inst.box.valid()) note(where + ": degenerate box");
    if (inst.polygon && inst.polygon->size() < 3) note(where + ": polygon needs >= 3 vertices");
    if (inst.score && !std::isfinite(*inst.score)) note(where + ": non-finite score");
  }

  if (!problems.empty()) {
    std::string msg = source + ": " + std::to_string(problems.size()) + " violation(s)";
    const std::size_t shown = std::min<std::size_t>(problems.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + problems[i];
    if (shown < problems.size()) msg += "\n  ...";
    throw SchemaError(kModule, msg);
  }
}

AnnotationSet parse_annotations(const nlohmann::json& doc, const std::string& source) {
  if (!doc.is_object()) throw SchemaError(kModule, source + ": expected an object document");
  for (const char* key : {"images", "categories", "annotations"}) {
    if (!doc.contains(key) || !doc.at(key).is_array()) {
      throw SchemaError(kModule, source + ": missing array \"" + key + "\"");
    }
  }
  AnnotationSet ann;
  const auto& images = doc.at("images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& j = images[i];
    const std::string where = source + ": images[" + std::to_string(i) + "]";
    Image im;
    im.id = require_int(j, "id", where);
    im.width = static_cast<int>(require_int(j, "width", where));
    im.height = static_cast<int>(require_int(j, "height", where));
    im.file_name = j.value("file_name", "");
    ann.images.push_back(std::move(im));
  }
  const auto& cats = doc.at("categories");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const auto& j = cats[i];
    const std::string where = source + ": categories[" + std::to_string(i) + "]";
    Category c;
    c.id = require_int(j, "id", where);
    if (!j.contains("name") || !j.at("name").is_string()) throw SchemaError(kModule, where + ": missing name");
    c.name = j.at("name").get<std::string>();
    const int idx = canonical_index(c.name);
    if (idx < 0) throw SchemaError(kModule, where + ": unknown category '" + c.name + "'");
    c.parent = kCategories[static_cast<std::size_t>(idx)].parent;
    if (j.contains("supercategory")) {
      const auto p = parent_from_name(j.at("supercategory").get<std::string>());
      if (!p) throw SchemaError(kModule, where + ": unknown supercategory");
      c.parent = *p;
    }
    ann.categories.push_back(std::move(c));
  }
  const auto& anns = doc.at("annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const auto& j = anns[i];
    const std::string where = source + ": annotations[" + std::to_string(i) + "]";
    Instance inst;
    inst.id = j.is_object() && j.contains("id") ? require_int(j, "id", where) : static_cast<long long>(i + 1);
    inst.image_id = require_int(j, "image_id", where);
    inst.category_id = require_int(j, "category_id", where);
    if (!j.contains("bbox")) throw SchemaError(kModule, where + ": missing bbox");
    inst.box = box_from_xywh(j.at("bbox"), where);
    if (j.contains("segmentation") && !j.at("segmentation").is_null()) {
      inst.polygon = polygon_from_flat(j.at("segmentation"), where);
    }
    if (j.contains("score")) {
      if (!j.at("score").is_number()) throw SchemaError(kModule, where + ": score must be a number");
      inst.score = j.at("score").get<double>();
    }
    ann.instances.push_back(std::move(inst));
  }
  ann.validate(source);
  return ann;
}

AnnotationSet from_chestxdet_json(const nlohmann::json& doc, const std::string& source, int width,
                                  int height) {
  if (!doc.is_array()) throw SchemaError(kModule, source + ": expected an array of image records");
  AnnotationSet ann;
  ann.categories = canonical_categories();
  long long next_instance = 1;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string where = source + "[" + std::to_string(i) + "]";
    if (!rec.is_object() || !rec.contains("syms") || !rec.contains("boxes")) {
      throw SchemaError(kModule, where + ": record needs \"syms\" and \"boxes\"");
    }
    Image im;
    im.id = static_cast<long long>(i + 1);
    im.width = width;
    im.height = height;
    im.file_name = rec.value("file_name", "");
    ann.images.push_back(im);
    const auto& syms = rec.at("syms");
    const auto& boxes = rec.at("boxes");
    if (!syms.is_array() || !boxes.is_array() || syms.size() != boxes.size()) {
      throw SchemaError(kModule, where + ": syms/boxes length mismatch");
    }
    const nlohmann::json* polys = rec.contains("polygons") ? &rec.at("polygons") : nullptr;
    for (std::size_t k = 0; k < syms.size(); ++k) {
      const std::string name = syms[k].get<std::string>();
      const int idx = canonical_index(name);
      if (idx < 0) throw SchemaError(kModule, where + ": unknown category '" + name + "'");
      Instance inst;
      inst.id = next_instance++;
      inst.image_id = im.id;
      inst.category_id = idx + 1;
      const auto& b = boxes[k];
      if (!b.is_array() || b.size() != 4) throw SchemaError(kModule, where + ": box must be [x1,y1,x2,y2]");
      inst.box = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      if (polys && k < polys->size() && (*polys)[k].is_array()) {
        Polygon poly;
        for (const auto& v : (*polys)[k]) poly.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        inst.polygon = std::move(poly);
      }
      ann.instances.push_back(std::move(inst));
    }
  }
  ann.validate(source);
  return ann;
}

AnnotationSet load_annotations(const std::string& path) {
  const nlohmann::json doc = io::read_json(path);
  if (doc.is_array()) return from_chestxdet_json(doc, path);
  return parse_annotations(doc, path);
}

nlohmann::json to_json(const AnnotationSet& ann) {
  nlohmann::json doc;
  doc["images"] = nlohmann::json::array();
  for (const auto& im : ann.images) {
    doc["images"].push_back(
        {{"id", im.id}, {"width", im.width}, {"height", im.height}, {"file_name", im.file_name}});
  }
  doc["categories"] = nlohmann::json::array();
  for (const auto& c : ann.categories) {
    doc["categories"].push_back({{"id", c.id}, {"name", c.name}, {"supercategory", parent_name(c.parent)}});
  }
  doc["annotations"] = instances_to_json(ann.instances);
  return doc;
}

nlohmann::json instances_to_json(const std::vector<Instance>& instances) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& inst : instances) {
    nlohmann::json j = {{"id", inst.id},
                        {"image_id", inst.image_id},
                        {"category_id", inst.category_id},
                        {"bbox", {inst.box.x1, inst.box.y1, inst.box.width(), inst.box.height()}}};
    if (inst.polygon) j["segmentation"] = polygon_to_flat(*inst.polygon);
    if (inst.score) j["score"] = *inst.score;
    out.push_back(std::move(j));
  }
  return out;
}

void write_annotations(const std::string& path, const AnnotationSet& ann) {
  io::write_json_atomic(path, to_json(ann));
}

std::vector<Instance> parse_detections(const nlohmann::json& doc, const AnnotationSet& gt,
                                       const std::string& source) {
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("annotations")) throw SchemaError(kModule, source + ": missing \"annotations\"");
    list = &doc.at("annotations");
  }
  if (!list->is_array()) throw SchemaError(kModule, source + ": detections must be an array");
  std::unordered_set<long long> image_ids;
  for (const auto& im : gt.images) image_ids.insert(im.id);
  std::vector<Instance> dets;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& j = (*list)[i];
    const std::string where = source + "[" + std::to_string(i) + "]";
    Instance d;
    d.id = static_cast<long long>(i + 1);
    d.image_id = require_int(j, "image_id", where);
    d.category_id = require_int(j, "category_id", where);
    if (!image_ids.count(d.image_id)) {
      throw SchemaError(kModule, where + ": image_id " + std::to_string(d.image_id) + " not in ground truth");
    }
    gt.category_index(d.category_id);
    if (!j.contains("bbox")) throw SchemaError(kModule, where + ": missing bbox");
    d.box = box_from_xywh(j.at("bbox"), where);
    if (!d.box.valid()) throw SchemaError(kModule, where + ": degenerate bbox");
    if (!j.contains("score") || !j.at("score").is_number()) {
      throw SchemaError(kModule, where + ": detection needs a numeric score");
    }
    const double s = j.at("score").get<double>();
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw SchemaError(kModule, where + ": score outside [0,1]");
    d.score = s;
    if (j.contains("segmentation") && !j.at("segmentation").is_null()) {
      d.polygon = polygon_from_flat(j.at("segmentation"), where);
    }
    dets.push_back(std::move(d));
  }
  return dets;
}

std::vector<Instance> load_detections(const std::string& path, const AnnotationSet& gt) {
  return parse_detections(io::read_json(path), gt, path);
}

SplitStats split_stats(const AnnotationSet& ann, const std::string& name) {
  SplitStats s;
  s.name = name;
  s.images = ann.images.size();
  for (const auto& inst : ann.instances) s.instances[static_cast<std::size_t>(ann.category_index(inst.category_id))]++;
  for (const auto& labels : ann.image_label_sets())
    for (int c : labels) s.images_with[static_cast<std::size_t>(c)]++;
  return s;
}

DatasetStats stats(const std::vector<std::pair<std::string, const AnnotationSet*>>& splits) {
  DatasetStats out;
  for (const auto& [name, ann] : splits) {
    out.splits.push_back(split_stats(*ann, name));
    for (const auto& labels : ann->image_label_sets())
      for (int a : labels)
        for (int b : labels) out.cooccurrence[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]++;
  }
  return out;
}

std::string format_stats_table(const DatasetStats& s, bool with_parents) {
  std::ostringstream os;
  if (with_parents) os << std::left << std::setw(13) << "parent";
  os << std::left << std::setw(20) << "category";
  for (const auto& sp : s.splits) os << std::right << std::setw(12) << sp.name;
  os << std::right << std::setw(12) << "images" << '\n';
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (with_parents) os << std::left << std::setw(13) << parent_name(kCategories[c].parent);
    os << std::left << std::setw(20) << kCategories[c].name;
    std::size_t with = 0;
    for (const auto& sp : s.splits) {
      os << std::right << std::setw(12) << sp.instances[c];
      with += sp.images_with[c];
    }
    os << std::right << std::setw(12) << with << '\n';
  }
  if (with_parents) {
    for (Parent p : {Parent::Lung, Parent::Pleura, Parent::Mediastinum}) {
      os << std::left << std::setw(13) << parent_name(p) << std::setw(20) << "(total)";
      for (const auto& sp : s.splits) {
        std::size_t n = 0;
        for (std::size_t c = 0; c < kNumCategories; ++c)
          if (kCategories[c].parent == p) n += sp.instances[c];
        os << std::right << std::setw(12) << n;
      }
      os << '\n';
    }
  }
  os << std::left << std::setw(with_parents ? 33 : 20) << "images";
  for (const auto& sp : s.splits) os << std::right << std::setw(12) << sp.images;
  os << '\n';
  return os.str();
}

nlohmann::json to_json(const DatasetStats& s) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& sp : s.splits) {
    nlohmann::json cats = nlohmann::json::array();
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      cats.push_back({{"name", kCategories[c].name},
                      {"parent", parent_name(kCategories[c].parent)},
                      {"instances", sp.instances[c]},
                      {"images", sp.images_with[c]}});
    }
    splits.push_back({{"name", sp.name}, {"images", sp.images}, {"categories", cats}});
  }
  nlohmann::json co = nlohmann::json::array();
  for (const auto& row : s.cooccurrence) co.push_back(row);
  return {{"splits", splits}, {"cooccurrence", co}};
}

std::uint64_t SplitMix::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::array<double, kNumCategories> SynthConfig::default_priors() {
  // Roughly the per-image prevalence implied by the release's train counts.
  std::array<double, kNumCategories> p{};
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    p[c] = std::min(0.5, kPublishedChestXDetCounts[c][0] / 5000.0);
  }
  return p;
}

namespace {

Box jitter_box(SplitMix& rng, double x1, double y1, double x2, double y2, double w, double h,
               double amount) {
  auto j = [&](double v, double extent) { return round2((v + rng.uniform(-amount, amount)) * extent); };
  return Box{j(x1, w), j(y1, h), j(x2, w), j(y2, h)};
}

Box box_inside(SplitMix& rng, const Box& host, double min_frac, double max_frac) {
  const double bw = host.width() * rng.uniform(min_frac, max_frac);
  const double bh = host.height() * rng.uniform(min_frac, max_frac);
  const double x1 = host.x1 + rng.uniform() * (host.width() - bw);
  const double y1 = host.y1 + rng.uniform() * (host.height() - bh);
  Box b{round2(x1), round2(y1), round2(x1 + bw), round2(y1 + bh)};
  b.x2 = std::min(b.x2, host.x2);
  b.y2 = std::min(b.y2, host.y2);
  return b;
}

Polygon inscribed_octagon(const Box& b) {
  const double cx = (b.x1 + b.x2) / 2, cy = (b.y1 + b.y2) / 2;
  const double rx = b.width() / 2, ry = b.height() / 2;
  Polygon poly;
  for (int k = 0; k < 8; ++k) {
    const double t = k * 3.14159265358979323846 / 4.0;
    poly.push_back({round2(cx + rx * std::cos(t)), round2(cy + ry * std::sin(t))});
  }
  return poly;
}

AnatomicalParts synth_parts(SplitMix& rng, int width, int height) {
  const double w = width, h = height;
  AnatomicalParts p;
  p.right_lung = jitter_box(rng, 0.10, 0.12, 0.46, 0.80, w, h, 0.02);
  p.left_lung = jitter_box(rng, 0.54, 0.12, 0.90, 0.80, w, h, 0.02);
  p.right_scapula = jitter_box(rng, 0.03, 0.10, 0.22, 0.40, w, h, 0.01);
  p.left_scapula = jitter_box(rng, 0.78, 0.10, 0.97, 0.40, w, h, 0.01);
  p.heart = jitter_box(rng, 0.40, 0.45, 0.68, 0.80, w, h, 0.02);
  return p;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.n_images < 1) throw ParameterError(kModule, "n_images must be >= 1");
  for (double p : cfg.priors)
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError(kModule, "category priors must lie in [0,1]");
  if (!(cfg.cooccurrence_strength >= 0.0 && cfg.cooccurrence_strength <= 1.0)) {
    throw ParameterError(kModule, "cooccurrence_strength must lie in [0,1]");
  }
  SplitMix rng(cfg.seed);
  SynthCorpus out;
  out.ann.categories = canonical_categories();
  long long next_instance = 1;
  for (int i = 0; i < cfg.n_images; ++i) {
    Image im{i + 1, cfg.width, cfg.height, "synth_" + std::to_string(i + 1) + ".png"};
    out.ann.images.push_back(im);
    const AnatomicalParts parts = synth_parts(rng, cfg.width, cfg.height);
    out.parts.push_back({im.id, parts});

    std::array<bool, kNumCategories> drawn{};
    for (std::size_t c = 0; c < kNumCategories; ++c) drawn[c] = rng.uniform() < cfg.priors[c];
    std::array<bool, kNumCategories> present = drawn;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      if (drawn[c] && rng.uniform() < cfg.cooccurrence_strength) present[(c + 1) % kNumCategories] = true;
    }

    std::vector<int> labels;
    const LungUnion lu = lung_union(parts);
    const Box image_box{0, 0, static_cast<double>(cfg.width), static_cast<double>(cfg.height)};
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      if (!present[c]) continue;
      labels.push_back(static_cast<int>(c));
      const int k = 1 + static_cast<int>(rng.uniform() * 3.0);
      for (int n = 0; n < k; ++n) {
        Box b;
        switch (kCategories[c].parent) {
          case Parent::Lung:
            b = box_inside(rng, rng.uniform() < 0.5 ? parts.left_lung : parts.right_lung, 0.05, 0.4);
            break;
          case Parent::Pleura:
            b = box_inside(rng, lu.box, 0.05, 0.3);
            break;
          case Parent::Mediastinum: {
            const double g = rng.uniform(0.0, 0.05);
            const Box& hb = parts.heart;
            b = Box{round2(std::max(0.0, hb.x1 - g * hb.width())), round2(std::max(0.0, hb.y1 - g * hb.height())),
                    round2(std::min(image_box.x2, hb.x2 + g * hb.width())),
                    round2(std::min(image_box.y2, hb.y2 + g * hb.height()))};
            break;
          }
        }
        Instance inst;
        inst.id = next_instance++;
        inst.image_id = im.id;
        inst.category_id = static_cast<long long>(c + 1);
        inst.box = b;
        inst.polygon = inscribed_octagon(b);
        out.ann.instances.push_back(std::move(inst));
        out.instance_counts[c]++;
      }
    }
    out.labels.push_back(std::move(labels));
  }
  out.ann.validate("synthetic corpus");
  return out;
}

SynthContext synth_context_inputs(std::uint64_t seed, std::size_t n_r, int n_d, std::size_t d_a,
                                  std::size_t d_m, int width, int height) {
  if (n_d < 1) throw ParameterError(kModule, "n_d must be >= 1");
  SplitMix rng(seed);
  SynthContext out;
  out.parts = synth_parts(rng, width, height);
  const LungUnion lu = lung_union(out.parts);
  for (std::size_t r = 0; r < n_r; ++r) out.inputs.rois.push_back(box_inside(rng, lu.box, 0.05, 0.4));
  const std::size_t cells = static_cast<std::size_t>(n_d) * n_d;
  out.inputs.f_a = gaussian_init({n_r, d_a}, seed ^ 0xA5A5A5A5ULL, 1.0);
  out.inputs.grids.n_d = n_d;
  out.inputs.grids.left_lung = out.parts.left_lung;
  out.inputs.grids.right_lung = out.parts.right_lung;
  out.inputs.grids.left = gaussian_init({cells, d_m}, seed ^ 0x5A5A5A5AULL, 1.0);
  out.inputs.grids.right = gaussian_init({cells, d_m}, seed ^ 0x3C3C3C3CULL, 1.0);
  return out;
}

std::vector<Instance> synth_detections(const AnnotationSet& gt, std::uint64_t seed, double recall) {
  if (!(recall >= 0.0 && recall <= 1.0)) throw ParameterError(kModule, "recall must lie in [0,1]");
  SplitMix rng(seed);
  auto score = [&](double lo, double hi) { return std::round(rng.uniform(lo, hi) * 1e4) / 1e4; };
  std::vector<Instance> dets;
  auto emit = [&](long long image_id, long long category_id, Box b, double s) {
    Instance d;
    d.id = static_cast<long long>(dets.size() + 1);
    d.image_id = image_id;
    d.category_id = category_id;
    d.box = b;
    d.polygon = inscribed_octagon(b);
    d.score = s;
    dets.push_back(std::move(d));
  };
  for (const auto& g : gt.instances) {
    if (rng.uniform() >= recall) continue;
    const Image& im = gt.image(g.image_id);
    const double jx = g.box.width() * 0.1, jy = g.box.height() * 0.1;
    Box b{round2(std::max(0.0, g.box.x1 + rng.uniform(-jx, jx))), round2(std::max(0.0, g.box.y1 + rng.uniform(-jy, jy))),
          round2(std::min<double>(im.width, g.box.x2 + rng.uniform(-jx, jx))),
          round2(std::min<double>(im.height, g.box.y2 + rng.uniform(-jy, jy)))};
    if (!b.valid()) b = g.box;
    emit(g.image_id, g.category_id, b, score(0.3, 1.0));
  }
  for (const auto& im : gt.images) {
    const int n_fp = static_cast<int>(rng.uniform() * 3);
    for (int k = 0; k < n_fp; ++k) {
      const auto& cat = gt.categories[static_cast<std::size_t>(rng.uniform() * gt.categories.size())];
      const Box host{0, 0, static_cast<double>(im.width), static_cast<double>(im.height)};
      emit(im.id, cat.id, box_inside(rng, host, 0.05, 0.2), score(0.0, 0.7));
    }
  }
  return dets;
}

}  // namespace sarnet
