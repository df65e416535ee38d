#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sarnet/context.hpp"
#include "sarnet/dataset.hpp"
#include "sarnet/disease.hpp"
#include "sarnet/error.hpp"
#include "sarnet/eval.hpp"
#include "sarnet/fusion.hpp"
#include "sarnet/geometry.hpp"
#include "sarnet/gradcheck.hpp"
#include "sarnet/io.hpp"
#include "sarnet/tensor.hpp"

namespace fs = std::filesystem;
using namespace sarnet;

namespace {

// Exit codes: 0 ok, 1 gradient check failed, 2 usage, 3.. library error categories.
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

int exit_code_for(const std::string& category) {
  static const std::vector<std::string> order = {"dimension", "degenerate", "parameter", "schema",
                                                 "io",        "probe",      "fixture"};
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == category) return 3 + static_cast<int>(i);
  return 10;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

std::string sibling(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

struct StatsOpts {
  std::vector<std::string> ann, split;
  bool parents = false;
  std::string out;
};

int run_stats(const StatsOpts& o) {
  if (!o.split.empty() && o.split.size() != o.ann.size()) {
    throw ParameterError("cli", "--split must be given once per --ann");
  }
  std::vector<AnnotationSet> sets;
  sets.reserve(o.ann.size());
  for (const auto& path : o.ann) sets.push_back(load_annotations(path));
  std::vector<std::pair<std::string, const AnnotationSet*>> splits;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    splits.push_back({o.split.empty() ? fs::path(o.ann[i]).stem().string() : o.split[i], &sets[i]});
  }
  const DatasetStats s = stats(splits);
  std::cout << format_stats_table(s, o.parents);
  if (!o.out.empty()) io::write_json_atomic(o.out, to_json(s));
  return 0;
}

int run_graph(const std::string& ann_path, const std::string& out) {
  const RelationGraph g = build_graph(load_annotations(ann_path));
  io::write_json_atomic(out, to_json(g));
  std::cout << "graph: " << g.size() << " categories";
  std::size_t edges = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) edges += (i != j && g.edges(i, j) > 0.0) ? 1 : 0;
  std::cout << ", " << edges << " nonzero off-diagonal edges\n";
  return 0;
}

struct SpatialOpts {
  std::string rois, parts, out;
  long long image_id = -1;
  int d_e = 8;
};

int run_encode_spatial(const SpatialOpts& o) {
  const std::vector<PartsRecord> records = read_parts_file(o.parts);
  const PartsRecord* chosen = nullptr;
  if (o.image_id >= 0) {
    for (const auto& r : records)
      if (r.image_id == o.image_id) chosen = &r;
    if (!chosen) throw SchemaError("cli", o.parts + ": no parts record for image " + std::to_string(o.image_id));
  } else {
    if (records.size() != 1) {
      throw ParameterError("cli", o.parts + " holds " + std::to_string(records.size()) +
                                      " records; pick one with --image-id");
    }
    chosen = &records.front();
  }
  const Tensor f = spatial_features(rois_from_tensor(read_tensor(o.rois)), chosen->parts, o.d_e);
  write_tensor(o.out, f);
  std::cout << "f_spa " << shape_str(f.shape()) << '\n';
  return 0;
}

struct AttendOpts {
  std::string rois, features, grids, params, out, attn_out;
};

int run_attend(const AttendOpts& o) {
  ContextInputs in;
  in.rois = rois_from_tensor(read_tensor(o.rois));
  in.f_a = read_tensor(o.features);
  in.grids = grids_from_json(io::read_json(o.grids));
  const ContextParams p = context_params_from_json(io::read_json(o.params));
  const ContextOutput out = context_forward(in, p);
  write_tensor(o.out, out.f_cxt);
  if (!o.attn_out.empty()) write_tensor(o.attn_out, out.attn);
  std::cout << "f_cxt " << shape_str(out.f_cxt.shape()) << '\n';
  return 0;
}

struct DiseaseOpts {
  std::string features, probs, graph, params, out, beta_out;
};

int run_disease(const DiseaseOpts& o) {
  DiseaseInputs in;
  const Tensor feat = read_tensor(o.features);
  in.f_s = feat.rank() == 3 ? global_pool(feat) : feat;
  in.probs = read_tensor(o.probs);
  in.edges = graph_from_json(io::read_json(o.graph)).edges;
  const DiseaseParams p = disease_params_from_json(io::read_json(o.params));
  const DiseaseOutput out = disease_forward(in, p);
  write_tensor(o.out, out.f_cate);
  if (!o.beta_out.empty()) write_tensor(o.beta_out, out.beta);
  std::cout << "f_cate " << shape_str(out.f_cate.shape()) << '\n';
  return 0;
}

struct FuseOpts {
  std::string f, f_spa, f_cxt, f_cate, out, layout_out;
};

int run_fuse(const FuseOpts& o) {
  const FusedFeatures fused = fuse(read_tensor(o.f), read_tensor(o.f_spa), read_tensor(o.f_cxt), read_tensor(o.f_cate));
  write_tensor(o.out, fused.f_prime);
  io::write_json_atomic(o.layout_out.empty() ? sibling(o.out, ".layout.json") : o.layout_out, layout_json(fused));
  std::cout << "f' " << shape_str(fused.f_prime.shape()) << " =";
  for (const auto& seg : fused.layout) std::cout << ' ' << seg.name << '[' << seg.width << ']';
  std::cout << '\n';
  return 0;
}

struct EvalOpts {
  std::string gt, det, out, csv;
  std::vector<double> iou = {0.25, 0.5, 0.75};
  std::vector<double> recall_fp = {0.1};
  double recall_iou = 0.25;
  bool mask = false;
};

int run_eval(const EvalOpts& o) {
  const AnnotationSet gt = load_annotations(o.gt);
  const std::vector<Instance> dets = load_detections(o.det, gt);
  EvalConfig cfg;
  cfg.iou_thresholds = o.iou;
  cfg.fp_per_image = o.recall_fp;
  cfg.recall_iou = o.recall_iou;
  cfg.mask = o.mask;
  for (double t : cfg.iou_thresholds)
    if (!(t > 0.0 && t <= 1.0)) throw ParameterError("cli", "--iou thresholds must lie in (0,1]");
  const EvalReport r = evaluate(gt, dets, cfg);
  io::write_json_atomic(o.out, to_json(r));
  io::write_text_atomic(o.csv.empty() ? sibling(o.out, ".csv") : o.csv, to_csv(r));

  std::cout << std::left << std::setw(20) << "category";
  for (double t : cfg.iou_thresholds) std::cout << std::right << std::setw(9) << ("AP" + std::to_string(std::lround(t * 100)));
  for (double f : cfg.fp_per_image) {
    std::ostringstream h;
    h << "R@" << f << "fp";
    std::cout << std::right << std::setw(10) << h.str();
  }
  std::cout << '\n';
  auto row = [&](const std::string& name, const std::vector<std::optional<double>>& ap,
                 const std::vector<std::optional<double>>& rec) {
    std::cout << std::left << std::setw(20) << name;
    for (const auto& v : ap) std::cout << std::right << std::setw(9) << fmt_opt(v);
    for (const auto& v : rec) std::cout << std::right << std::setw(10) << fmt_opt(v);
    std::cout << '\n';
  };
  for (const auto& c : r.categories) row(c.name, c.ap, c.recall);
  for (const auto& s : r.superclasses) row(parent_name(s.parent), s.ap, {});
  row("mean", r.mean_ap, r.mean_recall);
  if (r.degenerate_masks > 0) std::cout << "degenerate masks: " << r.degenerate_masks << '\n';
  return 0;
}

struct GradOpts {
  std::string module;
  std::uint64_t seed = 0;
  double tol = kDefaultTol, step = kDefaultStep;
};

int run_gradcheck(const GradOpts& o) {
  const GradReport r = o.module == "context" ? certify_context(o.seed, {}, o.tol, o.step)
                                             : certify_disease(o.seed, {}, o.tol, o.step);
  std::cout << r.format();
  return r.passed() ? 0 : kExitCheckFailed;
}

struct SynthOpts {
  std::string out_dir;
  std::uint64_t seed = 0;
  int n_images = 100;
  double strength = 0.3;
  std::size_t n_r = 8;
  int n_d = 7;
  std::size_t d_a = 1024, d_m = 256, d_h = 1024, d_out = 1024;
  std::size_t d = 1024, d_cate = 256, d_pool = 256;
};

int run_synth(const SynthOpts& o) {
  fs::create_directories(o.out_dir);
  auto at = [&](const char* name) { return (fs::path(o.out_dir) / name).string(); };

  SynthConfig cfg;
  cfg.seed = o.seed;
  cfg.n_images = o.n_images;
  cfg.cooccurrence_strength = o.strength;
  const SynthCorpus corpus = synth_corpus(cfg);
  write_annotations(at("annotations.json"), corpus.ann);
  write_parts_file(at("parts.json"), corpus.parts);
  io::write_json_atomic(at("detections.json"), instances_to_json(synth_detections(corpus.ann, o.seed + 1)));
  io::write_json_atomic(at("graph.json"), to_json(build_graph(corpus.ann)));

  const SynthContext sc = synth_context_inputs(o.seed + 2, o.n_r, o.n_d, o.d_a, o.d_m);
  io::write_json_atomic(at("sample_parts.json"), to_json(sc.parts));
  write_tensor(at("rois.json"), rois_to_tensor(sc.inputs.rois));
  write_tensor(at("f_a.json"), sc.inputs.f_a);
  io::write_json_atomic(at("grids.json"), to_json(sc.inputs.grids));
  io::write_json_atomic(at("context_params.json"),
                        to_json(ContextParams::init({o.d_a, o.d_m, o.d_h, o.d_out}, o.seed + 3)));

  write_tensor(at("f_s.json"), gaussian_init({o.d_pool}, o.seed + 4, 1.0));
  // Class probabilities: a softmax over the categories plus background, background dropped.
  Tensor logits = gaussian_init({o.n_r, kNumCategories + 1}, o.seed + 5, 2.0);
  Tensor probs({o.n_r, kNumCategories});
  for (std::size_t i = 0; i < o.n_r; ++i) {
    double mx = logits(i, 0), sum = 0.0;
    for (std::size_t c = 1; c <= kNumCategories; ++c) mx = std::max(mx, logits(i, c));
    for (std::size_t c = 0; c <= kNumCategories; ++c) sum += std::exp(logits(i, c) - mx);
    for (std::size_t c = 0; c < kNumCategories; ++c) probs(i, c) = std::exp(logits(i, c) - mx) / sum;
  }
  write_tensor(at("probs.json"), probs);
  io::write_json_atomic(at("disease_params.json"),
                        to_json(DiseaseParams::init({kNumCategories, o.d, o.d_cate, o.d_pool}, o.seed + 6)));

  std::cout << "synth: " << corpus.ann.images.size() << " images, " << corpus.ann.instances.size()
            << " instances -> " << o.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anatomy-aware relation modules for chest X-ray detection: feature encoders, evaluation, tooling"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  StatsOpts stats_o;
  auto* stats_cmd = app.add_subcommand("stats", "Per-category instance counts per split");
  stats_cmd->add_option("--ann", stats_o.ann, "Annotation file (repeat for several splits)")->required();
  stats_cmd->add_option("--split", stats_o.split, "Split name per --ann (default: file stem)");
  stats_cmd->add_flag("--parents", stats_o.parents, "Show parent classes and their totals");
  stats_cmd->add_option("--out", stats_o.out, "Also write the statistics as JSON");

  std::string graph_ann, graph_out;
  auto* graph_cmd = app.add_subcommand("graph", "Build the co-occurrence relation graph");
  graph_cmd->add_option("--ann", graph_ann, "Annotation file")->required();
  graph_cmd->add_option("--out", graph_out, "Graph file to write")->required();

  SpatialOpts sp_o;
  auto* sp_cmd = app.add_subcommand("encode-spatial", "Sinusoidal spatial relation features f_spa");
  sp_cmd->add_option("--rois", sp_o.rois, "RoI tensor [n_r x 4], corner form")->required();
  sp_cmd->add_option("--parts", sp_o.parts, "Anatomical parts file")->required();
  sp_cmd->add_option("--image-id", sp_o.image_id, "Parts record to use when the file holds several");
  sp_cmd->add_option("--d-e", sp_o.d_e, "Embedding width per scalar")->check(CLI::PositiveNumber);
  sp_cmd->add_option("--out", sp_o.out, "Output tensor [n_r x 80 d_e]")->required();

  AttendOpts at_o;
  auto* at_cmd = app.add_subcommand("attend", "Contextual relation features f_cxt");
  at_cmd->add_option("--rois", at_o.rois, "RoI tensor [n_r x 4]")->required();
  at_cmd->add_option("--features", at_o.features, "RoI feature tensor f_a [n_r x d_a]")->required();
  at_cmd->add_option("--grids", at_o.grids, "Lung grid features file")->required();
  at_cmd->add_option("--params", at_o.params, "Contextual module weights")->required();
  at_cmd->add_option("--out", at_o.out, "Output tensor [n_r x d_out]")->required();
  at_cmd->add_option("--attn-out", at_o.attn_out, "Also write the attention weights");

  DiseaseOpts di_o;
  auto* di_cmd = app.add_subcommand("disease", "Disease relation features f_cate");
  di_cmd->add_option("--features", di_o.features, "Pooled feature F_s [d'] or feature map [h x w x d']")
      ->required();
  di_cmd->add_option("--probs", di_o.probs, "RoI class probabilities [n_r x 13]")->required();
  di_cmd->add_option("--graph", di_o.graph, "Relation graph file")->required();
  di_cmd->add_option("--params", di_o.params, "Disease module weights")->required();
  di_cmd->add_option("--out", di_o.out, "Output tensor [n_r x d_cate]")->required();
  di_cmd->add_option("--beta-out", di_o.beta_out, "Also write the global scores");

  FuseOpts fu_o;
  auto* fu_cmd = app.add_subcommand("fuse", "Concatenate [f : f_spa : f_cxt : f_cate]");
  fu_cmd->add_option("--f", fu_o.f, "Base RoI features")->required();
  fu_cmd->add_option("--f-spa", fu_o.f_spa, "Spatial features")->required();
  fu_cmd->add_option("--f-cxt", fu_o.f_cxt, "Contextual features")->required();
  fu_cmd->add_option("--f-cate", fu_o.f_cate, "Disease features")->required();
  fu_cmd->add_option("--out", fu_o.out, "Fused tensor")->required();
  fu_cmd->add_option("--layout-out", fu_o.layout_out, "Layout sidecar (default: <out>.layout.json)");

  EvalOpts ev_o;
  auto* ev_cmd = app.add_subcommand("eval", "Detection AP and recall at fixed FP/image");
  ev_cmd->add_option("--gt", ev_o.gt, "Ground-truth annotation file")->required();
  ev_cmd->add_option("--det", ev_o.det, "Detections file")->required();
  ev_cmd->add_option("--iou", ev_o.iou, "IoU thresholds for AP")->delimiter(',')->capture_default_str();
  ev_cmd->add_option("--recall-fp", ev_o.recall_fp, "FP/image targets for recall")
      ->delimiter(',')
      ->capture_default_str();
  ev_cmd->add_option("--recall-iou", ev_o.recall_iou, "IoU threshold for recall matching")->capture_default_str();
  ev_cmd->add_flag("--mask", ev_o.mask, "Match on rasterized polygons instead of boxes");
  ev_cmd->add_option("--out", ev_o.out, "Report JSON")->required();
  ev_cmd->add_option("--csv", ev_o.csv, "Per-category CSV (default: <out>.csv)");

  GradOpts gr_o;
  auto* gr_cmd = app.add_subcommand("gradcheck", "Certify analytic gradients by central differences");
  gr_cmd->add_option("--module", gr_o.module, "Module to check")
      ->required()
      ->check(CLI::IsMember({"context", "disease"}));
  gr_cmd->add_option("--seed", gr_o.seed, "Fixture seed")->capture_default_str();
  gr_cmd->add_option("--tol", gr_o.tol, "Max relative error")->capture_default_str();
  gr_cmd->add_option("--step", gr_o.step, "Finite-difference step")->capture_default_str();

  SynthOpts sy_o;
  auto* sy_cmd = app.add_subcommand("synth", "Write a seeded synthetic corpus and sample module inputs");
  sy_cmd->add_option("--out-dir", sy_o.out_dir, "Output directory")->required();
  sy_cmd->add_option("--seed", sy_o.seed, "Seed")->capture_default_str();
  sy_cmd->add_option("--n-images", sy_o.n_images, "Corpus size")->capture_default_str();
  sy_cmd->add_option("--strength", sy_o.strength, "Co-occurrence pull-in probability")->capture_default_str();
  sy_cmd->add_option("--n-r", sy_o.n_r, "Sample RoIs")->capture_default_str();
  sy_cmd->add_option("--n-d", sy_o.n_d, "Grid side per lung")->capture_default_str();
  sy_cmd->add_option("--d-a", sy_o.d_a, "RoI feature width")->capture_default_str();
  sy_cmd->add_option("--d-m", sy_o.d_m, "Grid feature width")->capture_default_str();
  sy_cmd->add_option("--d-h", sy_o.d_h, "Shared attention width")->capture_default_str();
  sy_cmd->add_option("--d-out", sy_o.d_out, "f_cxt width")->capture_default_str();
  sy_cmd->add_option("--d", sy_o.d, "Category embedding width")->capture_default_str();
  sy_cmd->add_option("--d-cate", sy_o.d_cate, "f_cate width")->capture_default_str();
  sy_cmd->add_option("--d-pool", sy_o.d_pool, "Pooled image feature width")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*stats_cmd) return run_stats(stats_o);
    if (*graph_cmd) return run_graph(graph_ann, graph_out);
    if (*sp_cmd) return run_encode_spatial(sp_o);
    if (*at_cmd) return run_attend(at_o);
    if (*di_cmd) return run_disease(di_o);
    if (*fu_cmd) return run_fuse(fu_o);
    if (*ev_cmd) return run_eval(ev_o);
    if (*gr_cmd) return run_gradcheck(gr_o);
    if (*sy_cmd) return run_synth(sy_o);
  } catch (const Error& e) {
    std::cerr << "error[" << e.category() << "] " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[io] cli: " << e.what() << '\n';
    return exit_code_for("io");
  } catch (const std::exception& e) {
    std::cerr << "error[internal] " << e.what() << '\n';
    return 10;
  }
  return kExitUsage;
}
