#pragma once

// Dense float64 tensors with a tape-based reverse-mode autodiff.
//
// A Tape records every primitive in creation order, which is already a
// topological order, so the backward sweep simply walks the node list in
// reverse. Parameters enter a tape by reference (Tape::param) and receive
// their gradient in Tensor::grad() when the tape is swept.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iilm {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  // Row-major 2-D literal, e.g. Tensor::matrix({{1, 0}, {0, 1}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  // Size of the last axis; 2-D views treat everything before it as rows.
  std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : numel() / cols(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  // Allocates a zero gradient on first use.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();
  void clear_grad() noexcept { grad_.reset(); }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  std::optional<std::vector<double>> grad_;
};

// Dense boolean matrix used for attention masks.
class BoolMatrix {
 public:
  BoolMatrix() = default;
  BoolMatrix(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { bits_[r * cols_ + c] = v ? 1 : 0; }
  bool row_any(std::size_t r) const;
  std::size_t row_count(std::size_t r) const;

  bool operator==(const BoolMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Row-wise log-softmax outside of any tape.
Tensor log_softmax_rows(const Tensor& logits);

class Tape;

// Handle to a node on a Tape. Only meaningful together with its tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Leaves. param() and constant_ref() reference external storage, which must
  // outlive the tape. Gradients of param() leaves are added into t.grad() on
  // backward().
  Var param(Tensor& t);
  Var constant_ref(const Tensor& t);
  Var constant(Tensor t);
  // Differentiable leaf owned by the tape; read its gradient with grad().
  Var variable(Tensor t);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  // a[m,n] + bias[n] on every row.
  Var add_row(Var a, Var bias);
  // Multiplies row r of a by weights[r].
  Var scale_rows(Var a, std::vector<double> weights);
  Var relu(Var a);
  Var square(Var a);
  Var sum(Var a);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);
  // Rows with no enabled key produce all zeros.
  Var masked_softmax(Var logits, const BoolMatrix& mask);
  Var embedding(Var table, std::span<const std::int64_t> ids);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  Var concat_cols(std::span<const Var> parts);
  // Sum of -log softmax(logits[r])[targets[r]] over rows with include[r] != 0
  // (all rows when include is empty).
  Var nll_sum(Var logits, std::span<const std::int64_t> targets,
              std::span<const std::uint8_t> include = {});
  // Mean of the same quantity over included rows; 0 when none are included.
  Var cross_entropy(Var logits, std::span<const std::int64_t> targets,
                    std::span<const std::uint8_t> include = {});

  const Tensor& value(Var v) const;
  double scalar(Var v) const;
  // Gradient accumulated for v by backward(); empty before the sweep.
  std::span<const double> grad(Var v) const;

  void backward(Var loss);
  bool swept() const noexcept { return swept_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor own;
    const Tensor* ext = nullptr;
    Tensor* sink = nullptr;
    bool needs_grad = false;
    std::vector<double> grad;
    std::function<void(Tape&)> backward;
  };

  Var push(Node node);
  Node& node(Var v);
  const Node& node(Var v) const;
  bool needs(Var v) const { return node(v).needs_grad; }
  std::vector<double>& grad_buf(Var v);

  std::vector<Node> nodes_;
  bool swept_ = false;
};

}  // namespace iilm
