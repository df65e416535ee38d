#include "sarnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "sarnet/dataset.hpp"
#include "sarnet/error.hpp"

namespace sarnet {

namespace {
constexpr const char* kModule = "gradcheck";
constexpr int kMaxReseeds = 1000;
}  // namespace

Tensor central_diff(const ScalarFn& f, const Tensor& point, double step) {
  if (!(step > 0.0)) throw ParameterError(kModule, "step must be positive");
  Tensor grad(point.shape());
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x = point[i];
    probe[i] = x + step;
    const double hi = f(probe);
    probe[i] = x - step;
    const double lo = f(probe);
    probe[i] = x;
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw ProbeError(kModule, "non-finite evaluation probing coordinate " + std::to_string(i));
    }
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({kRelFloor, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

bool GradReport::passed() const {
  return std::all_of(params.begin(), params.end(), [](const ParamReport& p) { return p.passed; });
}

std::string GradReport::format() const {
  std::ostringstream os;
  os << "gradcheck module=" << module << " seed=" << seed << " rejected_seeds=" << rejected_seeds
     << " tol=" << tol << '\n';
  os << std::left << std::setw(12) << "param" << std::right << std::setw(14) << "max_rel"
     << std::setw(14) << "max_abs" << std::setw(8) << "worst" << std::setw(10) << "step"
     << "  status\n";
  os << std::scientific << std::setprecision(3);
  for (const auto& p : params) {
    os << std::left << std::setw(12) << p.name << std::right << std::setw(14) << p.max_rel
       << std::setw(14) << p.max_abs << std::setw(8) << p.worst_index << std::setw(10) << p.step
       << "  " << (p.passed ? "ok" : "FAIL") << '\n';
  }
  os << (passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

GradReport check(const std::vector<GradTarget>& targets, double tol, double step) {
  GradReport report;
  report.tol = tol;
  for (const auto& t : targets) {
    if (t.analytic.shape() != t.point.shape()) {
      throw DimensionError(kModule, t.name + ": analytic gradient shape " + shape_str(t.analytic.shape()) +
                                        " differs from parameter " + shape_str(t.point.shape()));
    }
    const Tensor numeric = central_diff(t.loss, t.point, step);
    ParamReport pr;
    pr.name = t.name;
    pr.step = step;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double abs_err = std::abs(t.analytic[i] - numeric[i]);
      const double rel = relative_error(t.analytic[i], numeric[i]);
      pr.max_abs = std::max(pr.max_abs, abs_err);
      if (rel > pr.max_rel) {
        pr.max_rel = rel;
        pr.worst_index = i;
      }
    }
    pr.passed = pr.max_rel <= tol;
    report.params.push_back(pr);
  }
  return report;
}

ContextFixture make_context_fixture(std::uint64_t seed, const ContextFixtureDims& d) {
  SynthContext sc = synth_context_inputs(seed, d.n_r, d.n_d, d.d_a, d.d_m);
  ContextFixture fx;
  fx.inputs = std::move(sc.inputs);
  fx.params.W_a = gaussian_init({d.d_a, d.d_h}, seed + 101, 1.0 / std::sqrt(static_cast<double>(d.d_a)));
  fx.params.W_g = gaussian_init({d.d_m, d.d_h}, seed + 102, 1.0 / std::sqrt(static_cast<double>(d.d_m)));
  fx.params.W_s = gaussian_init({1, 4}, seed + 103, 1.0);
  fx.params.W_k = gaussian_init({d.d_m, d.d_out}, seed + 104, 1.0 / std::sqrt(static_cast<double>(d.d_m)));
  fx.cotangent = gaussian_init({d.n_r, d.d_out}, seed + 105, 1.0);

  const Tensor U = prior_preactivation(fx.inputs.rois, fx.inputs.grids, fx.params.W_s);
  for (std::size_t i = 0; i < U.rows(); ++i) {
    bool any_active = false;
    for (std::size_t j = 0; j < U.cols(); ++j) {
      if (std::abs(U(i, j)) <= kKinkMargin) {
        throw FixtureRejected(kModule, "prior (" + std::to_string(i) + "," + std::to_string(j) +
                                           ") sits on the ReLU kink");
      }
      any_active = any_active || U(i, j) > 0.0;
    }
    if (!any_active) {
      throw FixtureRejected(kModule, "proposal " + std::to_string(i) + " has no active grid cell");
    }
  }
  const Tensor attn = context_forward(fx.inputs, fx.params).attn;
  for (std::size_t k = 0; k < attn.size(); ++k) {
    if (attn[k] > 0.0 && attn[k] < kSaturation) {
      throw FixtureRejected(kModule, "attention weight " + std::to_string(k) + " is saturated");
    }
  }
  return fx;
}

std::vector<GradTarget> context_targets(const ContextFixture& fx) {
  const ContextGrads g = context_grads(fx.inputs, fx.params, fx.cotangent);
  auto loss_with = [fx](auto mutate) {
    return [fx, mutate](const Tensor& x) {
      ContextInputs in = fx.inputs;
      ContextParams p = fx.params;
      mutate(in, p, x);
      return dot(fx.cotangent, context_forward(in, p).f_cxt);
    };
  };
  std::vector<GradTarget> t;
  t.push_back({"W_a", fx.params.W_a, g.W_a,
               loss_with([](ContextInputs&, ContextParams& p, const Tensor& x) { p.W_a = x; })});
  t.push_back({"W_g", fx.params.W_g, g.W_g,
               loss_with([](ContextInputs&, ContextParams& p, const Tensor& x) { p.W_g = x; })});
  t.push_back({"W_s", fx.params.W_s, g.W_s,
               loss_with([](ContextInputs&, ContextParams& p, const Tensor& x) { p.W_s = x; })});
  t.push_back({"W_k", fx.params.W_k, g.W_k,
               loss_with([](ContextInputs&, ContextParams& p, const Tensor& x) { p.W_k = x; })});
  t.push_back({"f_a", fx.inputs.f_a, g.f_a,
               loss_with([](ContextInputs& in, ContextParams&, const Tensor& x) { in.f_a = x; })});
  t.push_back({"grid_left", fx.inputs.grids.left, g.grid_left,
               loss_with([](ContextInputs& in, ContextParams&, const Tensor& x) { in.grids.left = x; })});
  t.push_back({"grid_right", fx.inputs.grids.right, g.grid_right,
               loss_with([](ContextInputs& in, ContextParams&, const Tensor& x) { in.grids.right = x; })});
  return t;
}

DiseaseFixture make_disease_fixture(std::uint64_t seed, const DiseaseFixtureDims& d) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_images = 60;
  cfg.cooccurrence_strength = 0.5;
  const SynthCorpus corpus = synth_corpus(cfg);
  const std::size_t c = kNumCategories;

  DiseaseFixture fx;
  fx.inputs.edges = build_edges(count_cooccurrence(corpus.labels, c));
  fx.inputs.f_s = gaussian_init({d.d_pool}, seed + 201, 1.0);
  fx.inputs.probs = Tensor({d.n_r, c});
  SplitMix rng(seed + 202);
  for (auto& v : fx.inputs.probs.data()) v = rng.uniform(0.05, 0.95);
  fx.params.W_emb = gaussian_init({c, d.d}, seed + 203, 1.0);
  fx.params.W_t = gaussian_init({d.d, d.d_cate}, seed + 204, 1.0 / std::sqrt(static_cast<double>(d.d)));
  fx.params.W_cls = gaussian_init({d.d_pool, c}, seed + 205, 1.0 / std::sqrt(static_cast<double>(d.d_pool)));
  fx.cotangent = gaussian_init({d.n_r, d.d_cate}, seed + 206, 1.0);
  const Tensor beta = global_scores(fx.inputs.f_s, fx.params).beta;
  for (std::size_t c = 0; c < beta.size(); ++c) {
    if (beta[c] < kSaturation || beta[c] > 1.0 - kSaturation) {
      throw FixtureRejected(kModule, "global score " + std::to_string(c) + " is saturated");
    }
  }
  return fx;
}

std::vector<GradTarget> disease_targets(const DiseaseFixture& fx) {
  const DiseaseGrads g = disease_grads(fx.inputs, fx.params, fx.cotangent);
  auto loss_with = [fx](auto mutate) {
    return [fx, mutate](const Tensor& x) {
      DiseaseInputs in = fx.inputs;
      DiseaseParams p = fx.params;
      mutate(in, p, x);
      return dot(fx.cotangent, disease_forward(in, p).f_cate);
    };
  };
  std::vector<GradTarget> t;
  t.push_back({"W_emb", fx.params.W_emb, g.W_emb,
               loss_with([](DiseaseInputs&, DiseaseParams& p, const Tensor& x) { p.W_emb = x; })});
  t.push_back({"W_t", fx.params.W_t, g.W_t,
               loss_with([](DiseaseInputs&, DiseaseParams& p, const Tensor& x) { p.W_t = x; })});
  t.push_back({"W_cls", fx.params.W_cls, g.W_cls,
               loss_with([](DiseaseInputs&, DiseaseParams& p, const Tensor& x) { p.W_cls = x; })});
  t.push_back({"F_s", fx.inputs.f_s, g.f_s,
               loss_with([](DiseaseInputs& in, DiseaseParams&, const Tensor& x) { in.f_s = x; })});
  t.push_back({"P", fx.inputs.probs, g.probs,
               loss_with([](DiseaseInputs& in, DiseaseParams&, const Tensor& x) { in.probs = x; })});
  return t;
}

namespace {
template <typename Make, typename Targets>
GradReport certify(const char* module, std::uint64_t seed, Make make, Targets targets, double tol, double step) {
  for (int attempt = 0; attempt < kMaxReseeds; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    decltype(make(s)) fx;
    try {
      fx = make(s);
    } catch (const FixtureRejected&) {
      continue;
    }
    GradReport r = check(targets(fx), tol, step);
    r.module = module;
    r.seed = s;
    r.rejected_seeds = static_cast<std::size_t>(attempt);
    return r;
  }
  throw FixtureRejected(kModule, std::string("no usable ") + module + " fixture within " +
                                     std::to_string(kMaxReseeds) + " seeds");
}
}  // namespace

GradReport certify_context(std::uint64_t seed, const ContextFixtureDims& dims, double tol, double step) {
  return certify(
      "context", seed, [&](std::uint64_t s) { return make_context_fixture(s, dims); }, context_targets, tol, step);
}

GradReport certify_disease(std::uint64_t seed, const DiseaseFixtureDims& dims, double tol, double step) {
  return certify(
      "disease", seed, [&](std::uint64_t s) { return make_disease_fixture(s, dims); }, disease_targets, tol, step);
}

}  // namespace sarnet
