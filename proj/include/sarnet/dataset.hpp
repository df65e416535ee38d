#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarnet/context.hpp"
#include "sarnet/geometry.hpp"

namespace sarnet {

enum class Parent { Lung, Pleura, Mediastinum };
const char* parent_name(Parent p);

inline constexpr std::size_t kNumCategories = 13;

struct CategoryInfo {
  const char* name;
  Parent parent;
};

// Canonical category order; also the printing order of the statistics table.
inline constexpr std::array<CategoryInfo, kNumCategories> kCategories = {{
    {"Atelectasis", Parent::Lung},
    {"Calcification", Parent::Lung},
    {"Consolidation", Parent::Lung},
    {"Diffusive Nodule", Parent::Lung},
    {"Emphysema", Parent::Lung},
    {"Fibrosis", Parent::Lung},
    {"Fracture", Parent::Lung},
    {"Mass", Parent::Lung},
    {"Nodule", Parent::Lung},
    {"Effusion", Parent::Pleura},
    {"Pleural Thickening", Parent::Pleura},
    {"Pneumothorax", Parent::Pleura},
    {"Cardiomegaly", Parent::Mediastinum},
}};

// Instance counts (train&val, test) published with the ChestX-Det release.
inline constexpr std::array<std::array<int, 2>, kNumCategories> kPublishedChestXDetCounts = {{
    {289, 51}, {281, 67}, {2110, 453}, {195, 51}, {232, 66}, {619, 120}, {547, 115},
    {133, 34}, {848, 182}, {1734, 379}, {526, 105}, {169, 42}, {223, 70},
}};

// Index into kCategories, or -1.
int canonical_index(const std::string& name);

struct Image {
  long long id = 0;
  int width = 0, height = 0;
  std::string file_name;
};

struct Category {
  long long id = 0;
  std::string name;
  Parent parent = Parent::Lung;
};

using Polygon = std::vector<Point>;

struct Instance {
  long long id = 0;
  long long image_id = 0;
  long long category_id = 0;
  Box box;
  std::optional<Polygon> polygon;
  std::optional<double> score;
};

struct AnnotationSet {
  std::vector<Image> images;
  std::vector<Category> categories;
  std::vector<Instance> instances;

  // Canonical category index for a category id; throws SchemaError if unknown.
  int category_index(long long category_id) const;
  const Image& image(long long image_id) const;
  // Sorted canonical indices present in each image, in image order.
  std::vector<std::vector<int>> image_label_sets() const;
  // Checks referential integrity, bounds, and the canonical taxonomy.
  // Every violation is listed in one SchemaError.
  void validate(const std::string& source = "annotations") const;
};

// The standard 13 categories with ids 1..13 in canonical order.
std::vector<Category> canonical_categories();

// Detection-dataset convention: images / categories / annotations tables,
// bbox as [x, y, width, height], segmentation as flat vertex lists.
AnnotationSet parse_annotations(const nlohmann::json& doc, const std::string& source = "annotations");
// Also accepts the ChestX-Det release layout: an array of
// {"file_name", "syms", "boxes" (corner form), "polygons"} records.
AnnotationSet load_annotations(const std::string& path);
nlohmann::json to_json(const AnnotationSet& ann);
// The "annotations" table alone; also the bare detections layout.
nlohmann::json instances_to_json(const std::vector<Instance>& instances);
void write_annotations(const std::string& path, const AnnotationSet& ann);

// ChestX-Det records carry no image extents; the NIH images are 1024 x 1024.
AnnotationSet from_chestxdet_json(const nlohmann::json& doc, const std::string& source,
                                  int width = 1024, int height = 1024);

// Detections: a bare array of {image_id, category_id, bbox, score} or a full
// annotation document. Ids must resolve against `gt`.
std::vector<Instance> load_detections(const std::string& path, const AnnotationSet& gt);
std::vector<Instance> parse_detections(const nlohmann::json& doc, const AnnotationSet& gt,
                                       const std::string& source = "detections");

struct SplitStats {
  std::string name;
  std::size_t images = 0;
  std::array<std::size_t, kNumCategories> instances{};
  std::array<std::size_t, kNumCategories> images_with{};
};

struct DatasetStats {
  std::vector<SplitStats> splits;
  // Image-level co-occurrence over every split.
  std::array<std::array<std::size_t, kNumCategories>, kNumCategories> cooccurrence{};
};

SplitStats split_stats(const AnnotationSet& ann, const std::string& name);
DatasetStats stats(const std::vector<std::pair<std::string, const AnnotationSet*>>& splits);
std::string format_stats_table(const DatasetStats& s, bool with_parents);
nlohmann::json to_json(const DatasetStats& s);

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_images = 100;
  std::array<double, kNumCategories> priors = default_priors();
  // Probability that category c pulls in category (c + 1) mod 13.
  double cooccurrence_strength = 0.3;
  int width = 1024, height = 1024;

  static std::array<double, kNumCategories> default_priors();
};

struct SynthCorpus {
  AnnotationSet ann;
  std::vector<PartsRecord> parts;
  // Generator bookkeeping, recorded while sampling.
  std::vector<std::vector<int>> labels;
  std::array<std::size_t, kNumCategories> instance_counts{};
};

// Per image: parts are sampled first (right lung left of the midline in
// image space, left lung right of it, scapulae above them, heart between),
// then labels (independent Bernoulli(prior) draws, followed by one
// pull-in pass where each drawn category adds its successor with
// probability cooccurrence_strength), then 1-3 instances per label. Lung
// categories sit inside one lung, pleural ones inside the lung union,
// cardiomegaly around the heart. Every instance gets an octagon polygon
// inscribed in its box.
SynthCorpus synth_corpus(const SynthConfig& cfg);

// Scored detections against `gt`: each ground truth is found with
// probability `recall` as a box jittered by up to 10% of its size, scored in
// [0.3, 1); each image also gets 0-2 background false positives scored in
// [0, 0.7). Scores are rounded to 1e-4. Polygons are inscribed octagons.
std::vector<Instance> synth_detections(const AnnotationSet& gt, std::uint64_t seed, double recall = 0.8);

// Random contextual-module inputs on a synthetic parts layout.
struct SynthContext {
  AnatomicalParts parts;
  ContextInputs inputs;
};
SynthContext synth_context_inputs(std::uint64_t seed, std::size_t n_r, int n_d, std::size_t d_a,
                                  std::size_t d_m, int width = 1024, int height = 1024);

// Deterministic uniform doubles in [0, 1) from a 64-bit stream.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

}  // namespace sarnet
