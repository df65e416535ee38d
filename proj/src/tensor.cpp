#include "sarnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "sarnet/error.hpp"
#include "sarnet/io.hpp"

namespace sarnet {

namespace {
constexpr const char* kModule = "tensor_core";

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(kModule, std::string(what) + " expects rank " + std::to_string(rank) +
                                      ", got shape " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(kModule, std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  }
}
}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw DimensionError(kModule, "data length " + std::to_string(data_.size()) +
                                      " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError(kModule, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError(kModule, "axis " + std::to_string(axis) + " out of range for shape " +
                                      shape_str(shape_));
  }
  return shape_[axis];
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError(kModule, "matmul inner extents disagree: " + shape_str(a.shape()) +
                                      " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  auto od = out.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = od.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor softmax_stable(const Tensor& logits) {
  require_rank(logits, 1, "softmax_stable");
  if (logits.size() == 0) throw DimensionError(kModule, "softmax_stable of empty vector");
  const auto x = logits.data();
  const double m = *std::max_element(x.begin(), x.end());
  if (m == -std::numeric_limits<double>::infinity()) {
    throw DegenerateError(kModule, "softmax_stable: every logit is -inf");
  }
  if (!std::isfinite(m)) throw DegenerateError(kModule, "softmax_stable: non-finite logit");
  Tensor out(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x[i] == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(x[i] - m);
    out[i] = e;
    total += e;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= total;
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

Tensor concat_last_axis(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError(kModule, "concat_last_axis of nothing");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw DimensionError(kModule, "concat_last_axis of a scalar");
  const Shape lead(first.begin(), first.end() - 1);
  const std::size_t outer = shape_numel(lead);
  std::size_t width = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw DimensionError(kModule, "concat_last_axis: leading extents differ: " +
                                        shape_str(first) + " vs " + shape_str(s));
    }
    width += s.back();
  }
  Shape out_shape = lead;
  out_shape.push_back(width);
  Tensor out(out_shape);
  auto od = out.data();
  for (std::size_t r = 0; r < outer; ++r) {
    std::size_t offset = r * width;
    for (const auto& p : parts) {
      const std::size_t w = p.shape().back();
      auto src = p.data().subspan(r * w, w);
      std::copy(src.begin(), src.end(), od.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += w;
    }
  }
  return out;
}

Tensor gaussian_init(const Shape& shape, std::uint64_t seed, double stddev) {
  if (!(stddev > 0.0) || !std::isfinite(stddev)) {
    throw ParameterError(kModule, "gaussian_init requires stddev > 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor out(shape);
  for (auto& v : out.data()) v = dist(rng);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

nlohmann::json to_json(const Tensor& t) {
  nlohmann::json doc;
  doc["shape"] = t.shape();
  doc["data"] = std::vector<double>(t.data().begin(), t.data().end());
  return doc;
}

Tensor tensor_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("shape") || !doc.contains("data")) {
    throw SchemaError(kModule, "tensor document needs \"shape\" and \"data\"");
  }
  const auto& js = doc.at("shape");
  const auto& jd = doc.at("data");
  if (!js.is_array() || !jd.is_array()) {
    throw SchemaError(kModule, "tensor \"shape\" and \"data\" must be arrays");
  }
  Shape shape;
  for (const auto& e : js) {
    if (!e.is_number_integer() || e.get<long long>() < 0) {
      throw SchemaError(kModule, "tensor shape entries must be nonnegative integers");
    }
    shape.push_back(e.get<std::size_t>());
  }
  std::vector<double> data;
  data.reserve(jd.size());
  for (const auto& e : jd) {
    if (!e.is_number()) throw SchemaError(kModule, "tensor data entries must be numbers");
    data.push_back(e.get<double>());
  }
  if (data.size() != shape_numel(shape)) {
    throw SchemaError(kModule, "tensor data length " + std::to_string(data.size()) +
                                   " does not match shape " + shape_str(shape));
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor read_tensor(const std::string& path) { return tensor_from_json(io::read_json(path)); }

void write_tensor(const std::string& path, const Tensor& t) {
  io::write_json_atomic(path, to_json(t));
}

}  // namespace sarnet
