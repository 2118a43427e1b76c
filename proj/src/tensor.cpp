#include "iilm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "iilm/errors.hpp"

namespace iilm {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

void require_2d(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a 2-D tensor, got " + shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,k] += a[m,n] * b[k,n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      const double* brow = b + j * n;
      double s = 0.0;
      for (std::size_t p = 0; p < n; ++p) s += arow[p] * brow[p];
      c[i * k + j] += s;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t p = 0; p < m; ++p) {
    const double* arow = a + p * k;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < k; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add_into(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape_) + " cannot hold " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::span<double> Tensor::grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) return {};
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

bool BoolMatrix::row_any(std::size_t r) const {
  const auto* row = bits_.data() + r * cols_;
  return std::any_of(row, row + cols_, [](std::uint8_t b) { return b != 0; });
}

std::size_t BoolMatrix::row_count(std::size_t r) const {
  const auto* row = bits_.data() + r * cols_;
  return static_cast<std::size_t>(std::count(row, row + cols_, std::uint8_t{1}));
}

Tensor log_softmax_rows(const Tensor& logits) {
  Tensor out(logits.shape());
  const std::size_t n = logits.rows();
  const std::size_t v = logits.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = logits.data().data() + r * v;
    const double mx = *std::max_element(x, x + v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(x[j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < v; ++j) out.at(r, j) = x[j] - lz;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape plumbing

Var Tape::push(Node n) {
  if (swept_) throw StateError("tape already swept; record a new tape");
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw IndexError("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw IndexError("variable does not belong to this tape");
  return nodes_[v.id];
}

std::vector<double>& Tape::grad_buf(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad.assign(value(v).numel(), 0.0);
  return n.grad;
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.ext ? *n.ext : n.own;
}

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.numel() != 1) throw DimensionError("scalar() on tensor of shape " + shape_str(t.shape()));
  return t[0];
}

std::span<const double> Tape::grad(Var v) const { return node(v).grad; }

Var Tape::param(Tensor& t) {
  Node n;
  n.ext = &t;
  n.sink = &t;
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& t) {
  Node n;
  n.ext = &t;
  return push(std::move(n));
}

Var Tape::constant(Tensor t) {
  Node n;
  n.own = std::move(t);
  return push(std::move(n));
}

Var Tape::variable(Tensor t) {
  Node n;
  n.own = std::move(t);
  n.needs_grad = true;
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (swept_) throw StateError("backward() called twice on the same tape");
  if (value(loss).numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + shape_str(value(loss).shape()));
  }
  swept_ = true;
  if (!needs(loss)) return;
  grad_buf(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.needs_grad) continue;
    if (n.backward) {
      n.backward(*this);
    }
  }
  for (auto& n : nodes_) {
    if (n.sink && !n.grad.empty()) {
      auto g = n.sink->grad();
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += n.grad[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a) || needs(b);
  const std::size_t self = nodes_.size();
  nd.backward = [a, b, m, k, n, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs(a)) {
      auto& ga = t.grad_buf(a);
      gemm_nt(g.data(), t.value(b).data().data(), ga.data(), m, n, k);
    }
    if (t.needs(b)) {
      auto& gb = t.grad_buf(b);
      gemm_tn(t.value(a).data().data(), g.data(), gb.data(), m, k, n);
    }
  };
  return push(std::move(nd));
}

Var Tape::transpose(Var a) {
  const Tensor& av = value(a);
  require_2d(av, "transpose");
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = av.at(i, j);
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a);
  const std::size_t self = nodes_.size();
  nd.backward = [a, m, n, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_buf(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  };
  return push(std::move(nd));
}

Var Tape::add(Var a, Var b) {
  require_same(value(a), value(b), "add");
  Tensor out = value(a);
  out.clear_grad();
  const auto bd = value(b).data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a) || needs(b);
  const std::size_t self = nodes_.size();
  nd.backward = [a, b, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs(a)) add_into(t.grad_buf(a), g);
    if (t.needs(b)) add_into(t.grad_buf(b), g);
  };
  return push(std::move(nd));
}

Var Tape::sub(Var a, Var b) {
  require_same(value(a), value(b), "sub");
  Tensor out = value(a);
  out.clear_grad();
  const auto bd = value(b).data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a) || needs(b);
  const std::size_t self = nodes_.size();
  nd.backward = [a, b, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs(a)) add_into(t.grad_buf(a), g);
    if (t.needs(b)) {
      auto& gb = t.grad_buf(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  };
  return push(std::move(nd));
}

Var Tape::mul(Var a, Var b) {
  require_same(value(a), value(b), "mul");
  Tensor out = value(a);
  out.clear_grad();
  const auto bd = value(b).data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a) || needs(b);
  const std::size_t self = nodes_.size();
  nd.backward = [a, b, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs(a)) {
      auto& ga = t.grad_buf(a);
      const auto bd = t.value(b).data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bd[i];
    }
    if (t.needs(b)) {
      auto& gb = t.grad_buf(b);
      const auto ad = t.value(a).data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * ad[i];
    }
  };
  return push(std::move(nd));
}

Var Tape::scale(Var a, double s) {
  Tensor out = value(a);
  out.clear_grad();
  for (auto& x : out.data()) x *= s;
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a);
  const std::size_t self = nodes_.size();
  nd.backward = [a, s, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_buf(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * s;
  };
  return push(std::move(nd));
}

Var Tape::add_row(Var a, Var bias) {
  const Tensor& av = value(a);
  const Tensor& bv = value(bias);
  if (bv.numel() != av.cols()) {
    throw DimensionError("add_row: bias " + shape_str(bv.shape()) + " does not match rows of " +
                         shape_str(av.shape()));
  }
  Tensor out = av;
  out.clear_grad();
  const std::size_t n = av.cols();
  auto od = out.data();
  const auto bd = bv.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i % n];
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a) || needs(bias);
  const std::size_t self = nodes_.size();
  nd.backward = [a, bias, n, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs(a)) add_into(t.grad_buf(a), g);
    if (t.needs(bias)) {
      auto& gb = t.grad_buf(bias);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
  };
  return push(std::move(nd));
}

Var Tape::scale_rows(Var a, std::vector<double> weights) {
  const Tensor& av = value(a);
  if (weights.size() != av.rows()) {
    throw DimensionError("scale_rows: " + std::to_string(weights.size()) + " weights for " +
                         shape_str(av.shape()));
  }
  Tensor out = av;
  out.clear_grad();
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < weights.size(); ++r)
    for (std::size_t j = 0; j < n; ++j) out.at(r, j) *= weights[r];
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a);
  const std::size_t self = nodes_.size();
  nd.backward = [a, w = std::move(weights), n, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_buf(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * w[i / n];
  };
  return push(std::move(nd));
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  out.clear_grad();
  for (auto& x : out.data()) x = x > 0.0 ? x : 0.0;
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a);
  const std::size_t self = nodes_.size();
  nd.backward = [a, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_buf(a);
    const auto ad = t.value(a).data();
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (ad[i] > 0.0) ga[i] += g[i];
  };
  return push(std::move(nd));
}

Var Tape::square(Var a) {
  Tensor out = value(a);
  out.clear_grad();
  for (auto& x : out.data()) x = x * x;
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a);
  const std::size_t self = nodes_.size();
  nd.backward = [a, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_buf(a);
    const auto ad = t.value(a).data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * ad[i] * g[i];
  };
  return push(std::move(nd));
}

Var Tape::sum(Var a) {
  const auto ad = value(a).data();
  double s = 0.0;
  for (double x : ad) s += x;
  Node nd;
  nd.own = Tensor({1}, std::vector<double>{s});
  nd.needs_grad = needs(a);
  const std::size_t self = nodes_.size();
  nd.backward = [a, self](Tape& t) {
    const double g = t.nodes_[self].grad[0];
    auto& ga = t.grad_buf(a);
    for (auto& x : ga) x += g;
  };
  return push(std::move(nd));
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = value(x);
  const std::size_t d = xv.cols();
  if (d < 2) throw DimensionError("layer_norm needs at least 2 features, got " + shape_str(xv.shape()));
  if (value(gain).numel() != d || value(bias).numel() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(value(gain).shape()) + "/" +
                         shape_str(value(bias).shape()) + " vs input " + shape_str(xv.shape()));
  }
  const std::size_t rows = xv.rows();
  // xhat and 1/sigma are needed by the backward pass.
  std::vector<double> xhat(xv.numel());
  std::vector<double> inv_sigma(rows);
  Tensor out(xv.shape());
  const auto g = value(gain).data();
  const auto b = value(bias).data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data().data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mean) * is;
      xhat[r * d + j] = h;
      out.at(r, j) = g[j] * h + b[j];
    }
  }
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(x) || needs(gain) || needs(bias);
  const std::size_t self = nodes_.size();
  nd.backward = [x, gain, bias, d, rows, xhat = std::move(xhat),
                 inv_sigma = std::move(inv_sigma), self](Tape& t) {
    const auto& gy = t.nodes_[self].grad;
    if (t.needs(gain)) {
      auto& gg = t.grad_buf(gain);
      for (std::size_t i = 0; i < gy.size(); ++i) gg[i % d] += gy[i] * xhat[i];
    }
    if (t.needs(bias)) {
      auto& gb = t.grad_buf(bias);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i % d] += gy[i];
    }
    if (t.needs(x)) {
      auto& gx = t.grad_buf(x);
      const auto gv = t.value(gain).data();
      std::vector<double> dh(d);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dh[j] = gy[r * d + j] * gv[j];
          mean_dh += dh[j];
          mean_dh_h += dh[j] * xhat[r * d + j];
        }
        mean_dh /= static_cast<double>(d);
        mean_dh_h /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          gx[r * d + j] += inv_sigma[r] * (dh[j] - mean_dh - xhat[r * d + j] * mean_dh_h);
        }
      }
    }
  };
  return push(std::move(nd));
}

Var Tape::masked_softmax(Var logits, const BoolMatrix& mask) {
  const Tensor& lv = value(logits);
  require_2d(lv, "masked_softmax");
  if (mask.rows() != lv.dim(0) || mask.cols() != lv.dim(1)) {
    throw DimensionError("masked_softmax: mask " +
                         shape_str({mask.rows(), mask.cols()}) + " vs logits " +
                         shape_str(lv.shape()));
  }
  const std::size_t q = lv.dim(0), k = lv.dim(1);
  Tensor out({q, k});
  for (std::size_t r = 0; r < q; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (mask(r, c)) mx = std::max(mx, lv.at(r, c));
    if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully masked row
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (!mask(r, c)) continue;
      const double e = std::exp(lv.at(r, c) - mx);
      out.at(r, c) = e;
      z += e;
    }
    for (std::size_t c = 0; c < k; ++c) out.at(r, c) /= z;
  }
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(logits);
  const std::size_t self = nodes_.size();
  nd.backward = [logits, q, k, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    const auto p = t.nodes_[self].own.data();
    auto& gl = t.grad_buf(logits);
    for (std::size_t r = 0; r < q; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += p[r * k + c] * g[r * k + c];
      for (std::size_t c = 0; c < k; ++c) gl[r * k + c] += p[r * k + c] * (g[r * k + c] - dot);
    }
  };
  return push(std::move(nd));
}

Var Tape::embedding(Var table, std::span<const std::int64_t> ids) {
  const Tensor& tv = value(table);
  require_2d(tv, "embedding");
  const std::size_t v = tv.dim(0), d = tv.dim(1);
  if (ids.empty()) throw DimensionError("embedding: empty id list");
  Tensor out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= v) {
      throw IndexError("embedding: id " + std::to_string(ids[r]) + " outside table of " +
                       std::to_string(v) + " rows");
    }
    const double* src = tv.data().data() + static_cast<std::size_t>(ids[r]) * d;
    std::copy(src, src + d, out.data().data() + r * d);
  }
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(table);
  const std::size_t self = nodes_.size();
  nd.backward = [table, idv = std::vector<std::int64_t>(ids.begin(), ids.end()), d,
                 self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    auto& gt = t.grad_buf(table);
    for (std::size_t r = 0; r < idv.size(); ++r) {
      double* dst = gt.data() + static_cast<std::size_t>(idv[r]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[r * d + j];
    }
  };
  return push(std::move(nd));
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = value(a);
  require_2d(av, "slice_cols");
  const std::size_t m = av.dim(0), n = av.dim(1);
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: bad range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") for " + shape_str(av.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = av.at(i, begin + j);
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = needs(a);
  const std::size_t self = nodes_.size();
  nd.backward = [a, m, n, w, begin, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_buf(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * n + begin + j] += g[i * w + j];
  };
  return push(std::move(nd));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t m = value(parts[0]).dim(0);
  std::size_t n = 0;
  std::vector<std::size_t> widths;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    require_2d(pv, "concat_cols");
    if (pv.dim(0) != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(value(parts[0]).shape()) +
                           " vs " + shape_str(pv.shape()));
    }
    widths.push_back(pv.dim(1));
    n += pv.dim(1);
  }
  Tensor out({m, n});
  bool any = false;
  std::size_t off = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const Tensor& pv = value(parts[pi]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[pi]; ++j) out.at(i, off + j) = pv.at(i, j);
    off += widths[pi];
    any = any || needs(parts[pi]);
  }
  Node nd;
  nd.own = std::move(out);
  nd.needs_grad = any;
  const std::size_t self = nodes_.size();
  nd.backward = [pv = std::vector<Var>(parts.begin(), parts.end()), widths, m, n, self](Tape& t) {
    const auto& g = t.nodes_[self].grad;
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < pv.size(); ++pi) {
      if (t.needs(pv[pi])) {
        auto& gp = t.grad_buf(pv[pi]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[pi]; ++j) gp[i * widths[pi] + j] += g[i * n + off + j];
      }
      off += widths[pi];
    }
  };
  return push(std::move(nd));
}

Var Tape::nll_sum(Var logits, std::span<const std::int64_t> targets,
                  std::span<const std::uint8_t> include) {
  const Tensor& lv = value(logits);
  require_2d(lv, "nll_sum");
  const std::size_t n = lv.dim(0), v = lv.dim(1);
  if (targets.size() != n) {
    throw DimensionError("nll_sum: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(lv.shape()));
  }
  if (!include.empty() && include.size() != n) {
    throw DimensionError("nll_sum: include mask length " + std::to_string(include.size()) +
                         " for " + std::to_string(n) + " rows");
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= v) {
      throw IndexError("cross-entropy target " + std::to_string(targets[r]) + " at row " +
                       std::to_string(r) + " outside [0," + std::to_string(v) + ")");
    }
  }
  Tensor logp = log_softmax_rows(lv);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!include.empty() && !include[r]) continue;
    total -= logp.at(r, static_cast<std::size_t>(targets[r]));
  }
  Node nd;
  nd.own = Tensor({1}, std::vector<double>{total});
  nd.needs_grad = needs(logits);
  const std::size_t self = nodes_.size();
  nd.backward = [logits, logp = std::move(logp),
                 tg = std::vector<std::int64_t>(targets.begin(), targets.end()),
                 inc = std::vector<std::uint8_t>(include.begin(), include.end()), n, v,
                 self](Tape& t) {
    const double g = t.nodes_[self].grad[0];
    auto& gl = t.grad_buf(logits);
    for (std::size_t r = 0; r < n; ++r) {
      if (!inc.empty() && !inc[r]) continue;
      for (std::size_t j = 0; j < v; ++j) gl[r * v + j] += g * std::exp(logp.at(r, j));
      gl[r * v + static_cast<std::size_t>(tg[r])] -= g;
    }
  };
  return push(std::move(nd));
}

Var Tape::cross_entropy(Var logits, std::span<const std::int64_t> targets,
                        std::span<const std::uint8_t> include) {
  std::size_t count = targets.size();
  if (!include.empty()) {
    count = static_cast<std::size_t>(std::count_if(include.begin(), include.end(),
                                                   [](std::uint8_t b) { return b != 0; }));
  }
  Var total = nll_sum(logits, targets, include);
  return scale(total, count ? 1.0 / static_cast<double>(count) : 0.0);
}

}  // namespace iilm
