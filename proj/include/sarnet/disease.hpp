#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarnet/dataset.hpp"
#include "sarnet/tensor.hpp"

namespace sarnet {

// Image-level co-occurrence counts and conditional-probability edges.
// edges[i][j] = P(j | i), the weight of the directed edge i -> j.
struct RelationGraph {
  std::vector<std::string> categories;
  std::vector<std::vector<long long>> counts;
  Tensor edges;  // [C x C]

  std::size_t size() const { return categories.size(); }
  void validate() const;
};

// counts[i][i] = #images holding category i; counts[i][j] = #images holding both.
std::vector<std::vector<long long>> count_cooccurrence(const std::vector<std::vector<int>>& label_sets,
                                                       std::size_t num_categories);
std::vector<std::vector<long long>> count_cooccurrence(const AnnotationSet& ann);

Tensor build_edges(const std::vector<std::vector<long long>>& counts);
RelationGraph build_graph(const AnnotationSet& ann);

nlohmann::json to_json(const RelationGraph& g);
RelationGraph graph_from_json(const nlohmann::json& j);

struct DiseaseParams {
  Tensor W_emb;  // [C x d]       category embeddings, one per row
  Tensor W_t;    // [d x d_cate]
  Tensor W_cls;  // [d' x C]      global score head

  struct Dims {
    std::size_t categories = kNumCategories, d = 1024, d_cate = 256, d_pool = 256;
  };
  static DiseaseParams init(const Dims& dims, std::uint64_t seed, double stddev = 0.01);
  Dims dims() const;
  std::size_t element_count() const;
  void validate() const;
};

struct DiseaseInputs {
  Tensor f_s;    // [d'] pooled image feature
  Tensor probs;  // [n_r x C] per-roi class probabilities
  Tensor edges;  // [C x C]
};

struct DiseaseOutput {
  Tensor logits;  // [C]
  Tensor beta;    // [C]
  Tensor z;       // [C x d]
  Tensor r;       // [n_r x d]
  Tensor f_cate;  // [n_r x d_cate]
};

struct DiseaseGrads {
  Tensor W_emb, W_t, W_cls, f_s, probs;
};

struct GlobalScores {
  Tensor logits, beta;
};
GlobalScores global_scores(const Tensor& f_s, const DiseaseParams& p);

// Channel means of an [h x w x d'] map.
Tensor global_pool(const Tensor& feature_map);

// Summed binary cross-entropy in logit form.
double bce_loss(const Tensor& logits, const std::vector<int>& labels);
Tensor bce_grad(const Tensor& logits, const std::vector<int>& labels);

// z_i = sum_j beta_j e_{j->i} w_j.
Tensor category_embeddings(const Tensor& beta, const Tensor& edges, const Tensor& W_emb);
// r_k = sum_i p_ki z_i.
Tensor map_to_regions(const Tensor& probs, const Tensor& z);
Tensor reduce_cate(const Tensor& r, const Tensor& W_t);

DiseaseOutput disease_forward(const DiseaseInputs& in, const DiseaseParams& p);
// Gradients of <cotangent, f_cate>.
DiseaseGrads disease_grads(const DiseaseInputs& in, const DiseaseParams& p, const Tensor& cotangent);

nlohmann::json to_json(const DiseaseParams& p);
DiseaseParams disease_params_from_json(const nlohmann::json& j);

}  // namespace sarnet
