#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sncpd/errors.hpp"
#include "sncpd/mat.hpp"
#include "sncpd/rng.hpp"

namespace sncpd {

using Shape = std::vector<std::size_t>;

namespace detail {
struct TensorRec {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // lazily sized on first accumulation
  bool requires_grad = false;
};
}  // namespace detail

// Value node with shared storage. Copies alias the same buffer, so parameters
// can live in a model struct and still receive gradients recorded on a tape.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> value, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v);
  static Tensor from_mat(const Mat& m, bool requires_grad = false);

  bool defined() const { return rec_ != nullptr; }
  const Shape& shape() const { return rec_->shape; }
  std::size_t rank() const { return rec_->shape.size(); }
  std::size_t size() const { return rec_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::vector<double>& values() { return rec_->value; }
  const std::vector<double>& values() const { return rec_->value; }
  double item() const;

  bool requires_grad() const { return rec_->requires_grad; }
  void set_requires_grad(bool v) { rec_->requires_grad = v; }

  // Gradient buffer, sized and zeroed on first access.
  std::vector<double>& grad();
  bool has_grad() const { return !rec_->grad.empty(); }
  void zero_grad();

  Mat to_mat() const;  // rank 1 becomes a single row

  detail::TensorRec* rec() const { return rec_.get(); }

 private:
  std::shared_ptr<detail::TensorRec> rec_;
};

// Records backward closures during forward evaluation. A non-recording tape
// turns every op into plain value arithmetic.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void push(std::function<void()> backward_step);
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and replays the recorded steps in reverse.
  void backward(Tensor& loss);

 private:
  std::vector<std::function<void()>> nodes_;
  bool recording_;
};

// Elementwise and structural ops. All of them validate shapes, compute values
// eagerly, and record a backward step when the tape is recording and any
// input wants gradients.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor divide(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double s);
Tensor add_scalar(Tape& tape, const Tensor& a, double s);
Tensor neg(Tape& tape, const Tensor& a);
Tensor exp_t(Tape& tape, const Tensor& a);
Tensor log_t(Tape& tape, const Tensor& a);
Tensor sqrt_t(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor relu(Tape& tape, const Tensor& a);

// Inverted dropout; identity when training is false or rate is zero.
Tensor dropout(Tape& tape, const Tensor& a, double rate, bool training, Rng& rng);

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
Tensor reshape(Tape& tape, const Tensor& a, Shape shape);
// Adds a length-c vector to every row of an r x c matrix.
Tensor add_rowvec(Tape& tape, const Tensor& m, const Tensor& v);

Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
// Row-wise inner products of two equally shaped matrices -> length-r vector.
Tensor rows_dot(Tape& tape, const Tensor& a, const Tensor& b);
Tensor slice_rows(Tape& tape, const Tensor& a, std::size_t r0, std::size_t r1);
Tensor concat_rows(Tape& tape, std::span<const Tensor> parts);
Tensor concat_cols(Tape& tape, std::span<const Tensor> parts);
// Column means of a t x d matrix -> length-d vector.
Tensor mean_rows(Tape& tape, const Tensor& a);
// Non-overlapping max pooling along rows; trailing remainder rows dropped.
Tensor max_pool_time(Tape& tape, const Tensor& a, std::size_t width);
// Normalizes the whole tensor to unit Euclidean norm. A (near-)zero input is
// passed through unchanged with a warning.
Tensor l2_normalize(Tape& tape, const Tensor& a);
Tensor l2_normalize_rows(Tape& tape, const Tensor& a);
// out[r] = log sum_{c : mask(r,c) != 0} exp(m[r,c]). Every row of the mask
// must select at least one column.
Tensor logsumexp_rows_masked(Tape& tape, const Tensor& m, const Mat& mask);
Tensor diag_part(Tape& tape, const Tensor& m);

// 1-D dilated convolution over time. x is t x c_in, kernel is rank 3 with
// shape (c_out, c_in, kw); output is t x c_out with centered zero padding.
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, std::size_t dilation);

void zero_grads(std::span<Tensor> params);
void sgd_step(std::span<Tensor> params, double lr);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long step = 0;
};

void adam_step(std::span<Tensor> params, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace sncpd
