// Minimal reverse-mode autodiff over dense row-major double arrays.
//
// A Tensor is a shared handle to value + grad storage. A Graph records every
// operation on an append-only tape; Graph::backward replays the tape in
// reverse and accumulates gradients into every reachable leaf. One graph is
// single-writer; independent graphs may run on separate threads.

#ifndef SCAMA_TENSOR_H_
#define SCAMA_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace scama {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_str(const std::vector<std::size_t>& shape);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> data);
  static Tensor scalar(double v);

  bool defined() const { return d_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t size() const;
  // 2-D accessors; throw on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  std::vector<double>& value();
  const std::vector<double>& value() const;
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  double item() const;  // scalar or 1-element tensors

  void zero_grad();
  std::int64_t id() const;

  bool same_storage(const Tensor& other) const { return d_ == other.d_; }

 private:
  struct Data;
  std::shared_ptr<Data> d_;
};

enum class Reduction { kSum, kMean };

class Graph {
 public:
  explicit Graph(std::uint64_t seed = 0, bool training = false)
      : rng_(seed), training_(training) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return training_; }
  std::mt19937_64& rng() { return rng_; }

  // --- primitive ops -------------------------------------------------------
  // [m x n] * [n x p] -> [m x p]
  Tensor matmul(Tensor a, Tensor b);
  // [m x n] * [p x n]^T -> [m x p]
  Tensor matmul_nt(Tensor a, Tensor b);
  Tensor add(Tensor a, Tensor b);           // identical shapes
  Tensor add_rowvec(Tensor a, Tensor row);  // [T x d] + [d]
  Tensor mul(Tensor a, Tensor b);           // elementwise
  Tensor scale(Tensor a, double s);
  Tensor relu(Tensor a);
  Tensor log(Tensor a);  // elementwise; requires strictly positive input
  Tensor softmax_lastdim(Tensor a);
  Tensor layer_norm(Tensor x, Tensor gain, Tensor bias);  // eps 1e-6
  Tensor concat_lastdim(const std::vector<Tensor>& parts);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor slice_rows(Tensor a, std::size_t begin, std::size_t end);
  Tensor slice_cols(Tensor a, std::size_t begin, std::size_t end);
  Tensor reshape(Tensor a, std::vector<std::size_t> shape);
  Tensor dropout(Tensor a, double p);
  Tensor embed(Tensor table, const std::vector<int>& ids);
  // a + c where c carries no gradient (additive attention masks).
  Tensor add_const(Tensor a, const std::vector<double>& c);
  Tensor sum(Tensor a);  // -> scalar
  // alpha * a + beta * b over identical shapes (scalars included)
  Tensor lincomb(double alpha, Tensor a, double beta, Tensor b);
  // Smoothed CE over rows of logits [L x V]; smoothing mass is spread
  // uniformly over the non-target classes.
  Tensor cross_entropy_smoothed(Tensor logits, const std::vector<int>& targets,
                                double smoothing, Reduction reduction);
  // FSMN memory block: m_t = v_t + sum_{i=0}^{Lb-1} a_i (.) v_{t-i}
  //                        + sum_{j=1}^{La} c_j (.) v_{t+j}
  // back_taps [Lb x d]; ahead_taps [La x d] or undefined for unidirectional.
  // `history` (optional, h x d plain rows) extends the sequence to the left
  // for look-back across chunk boundaries; it receives no gradient.
  Tensor fsmn(Tensor v, Tensor back_taps, Tensor ahead_taps,
              const std::vector<double>& history = {},
              std::size_t history_rows = 0);

  // Populates grads of every leaf reachable from `loss` (scalar). Repeated
  // calls accumulate.
  void backward(Tensor loss);

 private:
  Tensor make(std::vector<std::size_t> shape);
  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }

  std::vector<std::function<void()>> tape_;
  std::mt19937_64 rng_;
  bool training_ = false;
};

// Glorot-style uniform init in +/- sqrt(6 / (fan_in + fan_out)).
Tensor glorot(std::vector<std::size_t> shape, std::size_t fan_in,
              std::size_t fan_out, std::mt19937_64& rng);

}  // namespace scama

#endif  // SCAMA_TENSOR_H_
