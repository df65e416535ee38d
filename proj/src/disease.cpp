#include "sarnet/disease.hpp"

#include <algorithm>
#include <cmath>

#include "sarnet/error.hpp"

namespace sarnet {

namespace {
constexpr const char* kModule = "disease_graph";

void require_rank(const Tensor& t, std::size_t rank, const char* name) {
  if (t.rank() != rank) {
    throw DimensionError(kModule, std::string(name) + " must be rank " + std::to_string(rank) +
                                      ", got " + shape_str(t.shape()));
  }
}

void require_labels(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 1, "logits");
  if (labels.size() != logits.size()) {
    throw DimensionError(kModule, "label count " + std::to_string(labels.size()) +
                                      " does not match logits " + shape_str(logits.shape()));
  }
  for (int y : labels)
    if (y != 0 && y != 1) throw ParameterError(kModule, "labels must be 0 or 1");
}
}  // namespace

void RelationGraph::validate() const {
  const std::size_t c = categories.size();
  if (counts.size() != c || edges.shape() != Shape{c, c}) {
    throw SchemaError(kModule, "graph needs " + std::to_string(c) + "x" + std::to_string(c) +
                                   " counts and edges");
  }
  for (std::size_t i = 0; i < c; ++i) {
    if (counts[i].size() != c) throw SchemaError(kModule, "counts row " + std::to_string(i) + " is ragged");
    for (std::size_t j = 0; j < c; ++j) {
      if (counts[i][j] < 0) throw SchemaError(kModule, "negative count");
      if (counts[i][j] != counts[j][i]) throw SchemaError(kModule, "counts are not symmetric");
      if (counts[i][j] > std::min(counts[i][i], counts[j][j])) {
        throw SchemaError(kModule, "pair count exceeds a marginal count");
      }
      if (!(edges(i, j) >= 0.0 && edges(i, j) <= 1.0)) throw SchemaError(kModule, "edge outside [0,1]");
    }
  }
}

std::vector<std::vector<long long>> count_cooccurrence(const std::vector<std::vector<int>>& label_sets,
                                                       std::size_t num_categories) {
  std::vector<std::vector<long long>> counts(num_categories, std::vector<long long>(num_categories, 0));
  std::vector<char> present(num_categories);
  for (std::size_t img = 0; img < label_sets.size(); ++img) {
    std::fill(present.begin(), present.end(), 0);
    for (int c : label_sets[img]) {
      if (c < 0 || static_cast<std::size_t>(c) >= num_categories) {
        throw SchemaError(kModule, "image " + std::to_string(img) + " has unknown category id " +
                                       std::to_string(c));
      }
      present[static_cast<std::size_t>(c)] = 1;
    }
    for (std::size_t a = 0; a < num_categories; ++a) {
      if (!present[a]) continue;
      for (std::size_t b = 0; b < num_categories; ++b)
        if (present[b]) counts[a][b]++;
    }
  }
  return counts;
}

std::vector<std::vector<long long>> count_cooccurrence(const AnnotationSet& ann) {
  return count_cooccurrence(ann.image_label_sets(), kNumCategories);
}

Tensor build_edges(const std::vector<std::vector<long long>>& counts) {
  const std::size_t c = counts.size();
  Tensor edges({c, c});
  for (std::size_t i = 0; i < c; ++i) {
    if (counts[i].size() != c) throw DimensionError(kModule, "counts matrix must be square");
    const long long self = counts[i][i];
    if (self <= 0) continue;
    for (std::size_t j = 0; j < c; ++j) {
      edges(i, j) = i == j ? 1.0 : static_cast<double>(counts[i][j]) / static_cast<double>(self);
    }
  }
  return edges;
}

RelationGraph build_graph(const AnnotationSet& ann) {
  RelationGraph g;
  for (const auto& info : kCategories) g.categories.emplace_back(info.name);
  g.counts = count_cooccurrence(ann);
  g.edges = build_edges(g.counts);
  return g;
}

nlohmann::json to_json(const RelationGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto row = g.edges.row(i);
    edges.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"categories", g.categories}, {"counts", g.counts}, {"edges", edges}};
}

RelationGraph graph_from_json(const nlohmann::json& j) {
  for (const char* key : {"categories", "counts", "edges"}) {
    if (!j.contains(key) || !j.at(key).is_array()) {
      throw SchemaError(kModule, std::string("graph document lacks array \"") + key + "\"");
    }
  }
  RelationGraph g;
  g.categories = j.at("categories").get<std::vector<std::string>>();
  g.counts = j.at("counts").get<std::vector<std::vector<long long>>>();
  const auto rows = j.at("edges").get<std::vector<std::vector<double>>>();
  const std::size_t c = g.categories.size();
  if (rows.size() != c) throw SchemaError(kModule, "edges must be CxC");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != c) throw SchemaError(kModule, "edges must be CxC");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  g.edges = Tensor({c, c}, std::move(flat));
  g.validate();
  return g;
}

DiseaseParams DiseaseParams::init(const Dims& d, std::uint64_t seed, double stddev) {
  DiseaseParams p;
  p.W_emb = gaussian_init({d.categories, d.d}, seed, stddev);
  p.W_t = gaussian_init({d.d, d.d_cate}, seed + 1, stddev);
  p.W_cls = gaussian_init({d.d_pool, d.categories}, seed + 2, stddev);
  return p;
}

DiseaseParams::Dims DiseaseParams::dims() const {
  return Dims{W_emb.rows(), W_emb.cols(), W_t.cols(), W_cls.rows()};
}

std::size_t DiseaseParams::element_count() const { return W_emb.size() + W_t.size() + W_cls.size(); }

void DiseaseParams::validate() const {
  require_rank(W_emb, 2, "W_emb");
  require_rank(W_t, 2, "W_t");
  require_rank(W_cls, 2, "W_cls");
  if (W_t.rows() != W_emb.cols()) {
    throw DimensionError(kModule, "W_t " + shape_str(W_t.shape()) + " does not take W_emb width " +
                                      shape_str(W_emb.shape()));
  }
  if (W_cls.cols() != W_emb.rows()) {
    throw DimensionError(kModule, "W_cls " + shape_str(W_cls.shape()) + " scores a different category count than W_emb " +
                                      shape_str(W_emb.shape()));
  }
}

GlobalScores global_scores(const Tensor& f_s, const DiseaseParams& p) {
  require_rank(f_s, 1, "F_s");
  require_rank(p.W_cls, 2, "W_cls");
  if (f_s.size() != p.W_cls.rows()) {
    throw DimensionError(kModule, "F_s " + shape_str(f_s.shape()) + " does not match W_cls " +
                                      shape_str(p.W_cls.shape()));
  }
  const Tensor row({1, f_s.size()}, std::vector<double>(f_s.data().begin(), f_s.data().end()));
  const Tensor l = matmul(row, p.W_cls);
  GlobalScores out;
  out.logits = Tensor({l.size()}, std::vector<double>(l.data().begin(), l.data().end()));
  out.beta = sigmoid(out.logits);
  return out;
}

Tensor global_pool(const Tensor& fm) {
  require_rank(fm, 3, "feature map");
  const std::size_t h = fm.dim(0), w = fm.dim(1), d = fm.dim(2);
  if (h == 0 || w == 0) throw DimensionError(kModule, "feature map has an empty spatial extent");
  Tensor out({d});
  const auto src = fm.data();
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < d; ++c) out[c] += src[p * d + c];
  const double n = static_cast<double>(h * w);
  for (std::size_t c = 0; c < d; ++c) out[c] /= n;
  return out;
}

double bce_loss(const Tensor& logits, const std::vector<int>& labels) {
  require_labels(logits, labels);
  // -y log p - (1-y) log(1-p) = max(x,0) - x y + log1p(exp(-|x|))
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double x = logits[i];
    total += std::max(x, 0.0) - x * labels[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return total;
}

Tensor bce_grad(const Tensor& logits, const std::vector<int>& labels) {
  require_labels(logits, labels);
  Tensor g(logits.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) g[i] = sigmoid(logits[i]) - labels[i];
  return g;
}

Tensor category_embeddings(const Tensor& beta, const Tensor& edges, const Tensor& W_emb) {
  require_rank(beta, 1, "beta");
  require_rank(edges, 2, "edges");
  require_rank(W_emb, 2, "W_emb");
  const std::size_t c = beta.size();
  if (edges.shape() != Shape{c, c} || W_emb.rows() != c) {
    throw DimensionError(kModule, "category_embeddings: beta " + shape_str(beta.shape()) + ", edges " +
                                      shape_str(edges.shape()) + ", W_emb " + shape_str(W_emb.shape()));
  }
  // z = E^T diag(beta) W_emb
  Tensor scaled = W_emb;
  for (std::size_t j = 0; j < c; ++j)
    for (auto& v : scaled.row(j)) v *= beta[j];
  return matmul(transpose(edges), scaled);
}

Tensor map_to_regions(const Tensor& probs, const Tensor& z) {
  require_rank(probs, 2, "P");
  require_rank(z, 2, "z");
  if (probs.cols() != z.rows()) {
    throw DimensionError(kModule, "P " + shape_str(probs.shape()) + " does not match z " + shape_str(z.shape()));
  }
  for (double v : probs.data())
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError(kModule, "roi probabilities must lie in [0,1]");
  return matmul(probs, z);
}

Tensor reduce_cate(const Tensor& r, const Tensor& W_t) {
  require_rank(r, 2, "r");
  require_rank(W_t, 2, "W_t");
  if (r.cols() != W_t.rows()) {
    throw DimensionError(kModule, "r " + shape_str(r.shape()) + " does not match W_t " + shape_str(W_t.shape()));
  }
  return matmul(r, W_t);
}

DiseaseOutput disease_forward(const DiseaseInputs& in, const DiseaseParams& p) {
  p.validate();
  DiseaseOutput out;
  const GlobalScores gs = global_scores(in.f_s, p);
  out.logits = gs.logits;
  out.beta = gs.beta;
  out.z = category_embeddings(out.beta, in.edges, p.W_emb);
  out.r = map_to_regions(in.probs, out.z);
  out.f_cate = reduce_cate(out.r, p.W_t);
  return out;
}

DiseaseGrads disease_grads(const DiseaseInputs& in, const DiseaseParams& p, const Tensor& cotangent) {
  const DiseaseOutput fwd = disease_forward(in, p);
  if (cotangent.shape() != fwd.f_cate.shape()) {
    throw DimensionError(kModule, "cotangent " + shape_str(cotangent.shape()) + " does not match f_cate " +
                                      shape_str(fwd.f_cate.shape()));
  }
  const std::size_t c = fwd.beta.size();
  DiseaseGrads g;
  g.W_t = matmul(transpose(fwd.r), cotangent);
  const Tensor dr = matmul(cotangent, transpose(p.W_t));
  g.probs = matmul(dr, transpose(fwd.z));
  const Tensor dz = matmul(transpose(in.probs), dr);

  // z = E^T diag(beta) W  =>  d(diag(beta) W) = E dz.
  const Tensor e_dz = matmul(in.edges, dz);
  g.W_emb = e_dz;
  Tensor dlogits({c});
  for (std::size_t j = 0; j < c; ++j) {
    double dbeta = 0.0;
    auto er = e_dz.row(j);
    auto wr = p.W_emb.row(j);
    for (std::size_t k = 0; k < er.size(); ++k) dbeta += er[k] * wr[k];
    for (auto& v : g.W_emb.row(j)) v *= fwd.beta[j];
    dlogits[j] = dbeta * fwd.beta[j] * (1.0 - fwd.beta[j]);
  }

  const std::size_t dp = in.f_s.size();
  g.W_cls = Tensor({dp, c});
  for (std::size_t a = 0; a < dp; ++a)
    for (std::size_t j = 0; j < c; ++j) g.W_cls(a, j) = in.f_s[a] * dlogits[j];
  g.f_s = Tensor({dp});
  for (std::size_t a = 0; a < dp; ++a) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += p.W_cls(a, j) * dlogits[j];
    g.f_s[a] = s;
  }
  return g;
}

nlohmann::json to_json(const DiseaseParams& p) {
  return {{"W_emb", to_json(p.W_emb)}, {"W_t", to_json(p.W_t)}, {"W_cls", to_json(p.W_cls)}};
}

DiseaseParams disease_params_from_json(const nlohmann::json& j) {
  for (const char* key : {"W_emb", "W_t", "W_cls"}) {
    if (!j.contains(key)) throw SchemaError(kModule, std::string("params document lacks ") + key);
  }
  DiseaseParams p;
  p.W_emb = tensor_from_json(j.at("W_emb"));
  p.W_t = tensor_from_json(j.at("W_t"));
  p.W_cls = tensor_from_json(j.at("W_cls"));
  p.validate();
  return p;
}

}  // namespace sarnet
