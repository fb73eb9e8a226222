#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace glassbox::ad {

// Dense row-major f32 tensor. Reductions and transcendental element math run
// in f64 and round once on store.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, float v);
  static Tensor from(std::vector<int> s, std::vector<float> d);

  std::int64_t numel() const;
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  float at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols() + c];
  }
  std::string shape_str() const;
};

// Trainable parameter: value plus gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, Tensor v);
  void zero_grad();
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Dynamic tape: nodes are appended in evaluation order, so the reverse pass
// is a single backward sweep. A tape is single-use; backward() invalidates it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Tensor value, bool requires_grad = false);
  Var param(Param& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var bias);  // bias (1 x n) broadcast over rows
  Var scale(Var a, float s);
  Var mul(Var a, Var b);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softmax_rows(Var a);
  Var masked_fill(Var a, const std::vector<std::uint8_t>& mask, float fill);
  Var layer_norm(Var a, Var gain, Var bias, float eps = 1e-5f);
  Var transpose(Var a);
  Var reshape(Var a, std::vector<int> shape);
  Var slice_rows(Var a, int r0, int r1);
  Var slice_cols(Var a, int c0, int c1);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var mean_pool_rows(Var a, int group);
  Var embedding_add(Var x, Var pos);  // x ((B*T) x E) + pos (T x E) tiled
  Var bce_with_logits(Var logits, const Tensor& targets);
  Var sum(Var a);

  void backward(Var loss);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;  // valid after backward()
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Param* bound = nullptr;
    std::function<void(Tape&)> backprop;
  };

  Var emit(Tensor value, bool requires_grad,
           std::function<void(Tape&)> backprop);
  Tensor& grad_buf(Var v);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t step = 0;
};

// One Adam update with bias correction; element math in f64.
void adam_step(Tensor& value, const Tensor& grad, AdamState& state, float lr,
               float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f);

}  // namespace glassbox::ad
