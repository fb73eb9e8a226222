#include "glassbox/tensor.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "glassbox/kernels.hpp"

namespace glassbox::ad {

namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& got) {
  throw std::invalid_argument(op + ": shape mismatch (" + got + ")");
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.shape.size() != 2) {
    shape_error(op, "expected rank 2, got " + t.shape_str());
  }
}

double sigmoid_d(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dim");
    n *= d;
  }
  data.assign(static_cast<std::size_t>(n), 0.0f);
}

Tensor Tensor::full(std::vector<int> s, float v) {
  Tensor t(std::move(s));
  for (auto& x : t.data) x = v;
  return t;
}

Tensor Tensor::from(std::vector<int> s, std::vector<float> d) {
  Tensor t;
  t.shape = std::move(s);
  std::int64_t n = 1;
  for (int dim : t.shape) n *= dim;
  if (n != static_cast<std::int64_t>(d.size())) {
    throw std::invalid_argument("tensor: data length does not match shape");
  }
  t.data = std::move(d);
  return t;
}

std::int64_t Tensor::numel() const {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Param::Param(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

void Param::zero_grad() {
  std::memset(grad.data.data(), 0, grad.data.size() * sizeof(float));
}

Var Tape::emit(Tensor value, bool requires_grad,
               std::function<void(Tape&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buf(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
  return n.grad;
}

const Tensor& Tape::value(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("tape: invalid var");
  }
  return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.data.empty()) {
    throw std::logic_error("tape: gradient not populated (run backward first)");
  }
  return n.grad;
}

Var Tape::input(Tensor value, bool requires_grad) {
  return emit(std::move(value), requires_grad, nullptr);
}

Var Tape::param(Param& p) {
  Var v = emit(p.value, true, nullptr);
  nodes_[v.id].bound = &p;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_rank2(ta, "matmul");
  require_rank2(tb, "matmul");
  if (ta.cols() != tb.rows()) {
    shape_error("matmul", ta.shape_str() + " * " + tb.shape_str());
  }
  const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out({static_cast<int>(m), static_cast<int>(n)});
  kernels::gemm(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
  Var self = emit(std::move(out), needs(a) || needs(b), nullptr);
  nodes_[self.id].backprop = [self, a, b, m, k, n](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    if (t.needs(a)) {
      // dA += dC * B^T
      const Tensor& tb2 = t.value(b);
      std::vector<float> bt(tb2.data.size());
      kernels::transpose(tb2.data.data(), bt.data(), k, n);
      kernels::gemm(gy.data.data(), bt.data(), t.grad_buf(a).data.data(), m, n,
                    k);
    }
    if (t.needs(b)) {
      // dB += A^T * dC
      const Tensor& ta2 = t.value(a);
      std::vector<float> at(ta2.data.size());
      kernels::transpose(ta2.data.data(), at.data(), m, k);
      kernels::gemm(at.data(), gy.data.data(), t.grad_buf(b).data.data(), k, m,
                    n);
    }
  };
  return self;
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape != tb.shape) {
    shape_error("add", ta.shape_str() + " + " + tb.shape_str());
  }
  Tensor out(ta.shape);
  kernels::add(ta.data.data(), tb.data.data(), out.data.data(),
               out.data.size());
  Var self = emit(std::move(out), needs(a) || needs(b), nullptr);
  nodes_[self.id].backprop = [self, a, b](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    if (t.needs(a)) {
      kernels::axpy(1.0f, gy.data.data(), t.grad_buf(a).data.data(),
                    gy.data.size());
    }
    if (t.needs(b)) {
      kernels::axpy(1.0f, gy.data.data(), t.grad_buf(b).data.data(),
                    gy.data.size());
    }
  };
  return self;
}

Var Tape::add_row(Var a, Var bias) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(bias);
  require_rank2(ta, "add_row");
  require_rank2(tb, "add_row");
  if (tb.rows() != 1 || tb.cols() != ta.cols()) {
    shape_error("add_row", ta.shape_str() + " + " + tb.shape_str());
  }
  const int m = ta.rows(), n = ta.cols();
  Tensor out(ta.shape);
  for (int i = 0; i < m; ++i) {
    kernels::add(ta.data.data() + static_cast<std::size_t>(i) * n,
                 tb.data.data(), out.data.data() + static_cast<std::size_t>(i) * n,
                 n);
  }
  Var self = emit(std::move(out), needs(a) || needs(bias), nullptr);
  nodes_[self.id].backprop = [self, a, bias, m, n](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    if (t.needs(a)) {
      kernels::axpy(1.0f, gy.data.data(), t.grad_buf(a).data.data(),
                    gy.data.size());
    }
    if (t.needs(bias)) {
      float* gb = t.grad_buf(bias).data.data();
      for (int i = 0; i < m; ++i) {
        kernels::axpy(1.0f, gy.data.data() + static_cast<std::size_t>(i) * n,
                      gb, n);
      }
    }
  };
  return self;
}

Var Tape::scale(Var a, float s) {
  const Tensor& ta = value(a);
  Tensor out = ta;
  kernels::scale(s, out.data.data(), out.data.size());
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a, s](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    if (t.needs(a)) {
      kernels::axpy(s, gy.data.data(), t.grad_buf(a).data.data(),
                    gy.data.size());
    }
  };
  return self;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape != tb.shape) {
    shape_error("mul", ta.shape_str() + " * " + tb.shape_str());
  }
  Tensor out(ta.shape);
  kernels::mul(ta.data.data(), tb.data.data(), out.data.data(),
               out.data.size());
  Var self = emit(std::move(out), needs(a) || needs(b), nullptr);
  nodes_[self.id].backprop = [self, a, b](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    const std::size_t n = gy.data.size();
    if (t.needs(a)) {
      const Tensor& tb2 = t.value(b);
      float* ga = t.grad_buf(a).data.data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += gy.data[i] * tb2.data[i];
    }
    if (t.needs(b)) {
      const Tensor& ta2 = t.value(a);
      float* gb = t.grad_buf(b).data.data();
      for (std::size_t i = 0; i < n; ++i) gb[i] += gy.data[i] * ta2.data[i];
    }
  };
  return self;
}

Var Tape::relu(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape);
  kernels::relu(ta.data.data(), out.data.data(), out.data.size());
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    const Tensor& x = t.value(a);
    kernels::relu_backward(x.data.data(), gy.data.data(),
                           t.grad_buf(a).data.data(), gy.data.size());
  };
  return self;
}

Var Tape::sigmoid(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape);
  for (std::size_t i = 0; i < ta.data.size(); ++i) {
    out.data[i] = static_cast<float>(sigmoid_d(ta.data[i]));
  }
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    const Tensor& y = t.nodes_[self.id].value;
    float* ga = t.grad_buf(a).data.data();
    for (std::size_t i = 0; i < gy.data.size(); ++i) {
      const double yi = y.data[i];
      ga[i] += static_cast<float>(gy.data[i] * yi * (1.0 - yi));
    }
  };
  return self;
}

Var Tape::softmax_rows(Var a) {
  const Tensor& ta = value(a);
  require_rank2(ta, "softmax_rows");
  const int m = ta.rows(), n = ta.cols();
  Tensor out(ta.shape);
  for (int i = 0; i < m; ++i) {
    const float* x = ta.data.data() + static_cast<std::size_t>(i) * n;
    float* y = out.data.data() + static_cast<std::size_t>(i) * n;
    double mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, static_cast<double>(x[j]));
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      const double e = std::exp(static_cast<double>(x[j]) - mx);
      y[j] = static_cast<float>(e);
      total += e;
    }
    const double inv = 1.0 / total;
    for (int j = 0; j < n; ++j) {
      y[j] = static_cast<float>(static_cast<double>(y[j]) * inv);
    }
  }
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a, m, n](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    const Tensor& y = t.nodes_[self.id].value;
    float* ga = t.grad_buf(a).data.data();
    for (int i = 0; i < m; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * n;
      const float* yr = y.data.data() + off;
      const float* gr = gy.data.data() + off;
      const double dot = kernels::dot_f64(yr, gr, n);
      for (int j = 0; j < n; ++j) {
        ga[off + j] += static_cast<float>(
            static_cast<double>(yr[j]) * (static_cast<double>(gr[j]) - dot));
      }
    }
  };
  return self;
}

Var Tape::masked_fill(Var a, const std::vector<std::uint8_t>& mask,
                      float fill) {
  const Tensor& ta = value(a);
  if (mask.size() != ta.data.size()) {
    shape_error("masked_fill", "mask length " + std::to_string(mask.size()) +
                                   " vs " + ta.shape_str());
  }
  Tensor out = ta;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.data[i] = fill;
  }
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a, mask](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    float* ga = t.grad_buf(a).data.data();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) ga[i] += gy.data[i];
    }
  };
  return self;
}

Var Tape::layer_norm(Var a, Var gain, Var bias, float eps) {
  const Tensor& ta = value(a);
  const Tensor& tg = value(gain);
  const Tensor& tb = value(bias);
  require_rank2(ta, "layer_norm");
  const int m = ta.rows(), n = ta.cols();
  if (tg.rows() != 1 || tg.cols() != n || tb.rows() != 1 || tb.cols() != n) {
    shape_error("layer_norm", ta.shape_str() + " with gain " + tg.shape_str() +
                                  ", bias " + tb.shape_str());
  }
  Tensor out(ta.shape);
  // Normalized values and per-row inverse stddev are saved for backward.
  auto xhat = std::make_shared<std::vector<float>>(ta.data.size());
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (int i = 0; i < m; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * n;
    const float* x = ta.data.data() + off;
    double mean = kernels::sum_f64(x, n) / n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = static_cast<double>(x[j]) - mean;
      var += d * d;
    }
    var /= n;
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    (*inv_std)[i] = is;
    for (int j = 0; j < n; ++j) {
      const double xh = (static_cast<double>(x[j]) - mean) * is;
      (*xhat)[off + j] = static_cast<float>(xh);
      out.data[off + j] = static_cast<float>(
          xh * static_cast<double>(tg.data[j]) + static_cast<double>(tb.data[j]));
    }
  }
  Var self = emit(std::move(out), needs(a) || needs(gain) || needs(bias),
                  nullptr);
  nodes_[self.id].backprop = [self, a, gain, bias, m, n, xhat,
                              inv_std](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    const Tensor& tg2 = t.value(gain);
    if (t.needs(gain)) {
      float* gg = t.grad_buf(gain).data.data();
      for (int i = 0; i < m; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          gg[j] += gy.data[off + j] * (*xhat)[off + j];
        }
      }
    }
    if (t.needs(bias)) {
      float* gb = t.grad_buf(bias).data.data();
      for (int i = 0; i < m; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * n;
        kernels::axpy(1.0f, gy.data.data() + off, gb, n);
      }
    }
    if (t.needs(a)) {
      float* ga = t.grad_buf(a).data.data();
      for (int i = 0; i < m; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * n;
        // dxhat = gy * gain; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
        //         * inv_std
        double s1 = 0.0, s2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double dxh = static_cast<double>(gy.data[off + j]) *
                             static_cast<double>(tg2.data[j]);
          s1 += dxh;
          s2 += dxh * static_cast<double>((*xhat)[off + j]);
        }
        s1 /= n;
        s2 /= n;
        const double is = (*inv_std)[i];
        for (int j = 0; j < n; ++j) {
          const double dxh = static_cast<double>(gy.data[off + j]) *
                             static_cast<double>(tg2.data[j]);
          ga[off + j] += static_cast<float>(
              (dxh - s1 - static_cast<double>((*xhat)[off + j]) * s2) * is);
        }
      }
    }
  };
  return self;
}

Var Tape::transpose(Var a) {
  const Tensor& ta = value(a);
  require_rank2(ta, "transpose");
  const int m = ta.rows(), n = ta.cols();
  Tensor out({n, m});
  kernels::transpose(ta.data.data(), out.data.data(), m, n);
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a, m, n](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    std::vector<float> gt(gy.data.size());
    kernels::transpose(gy.data.data(), gt.data(), n, m);
    kernels::axpy(1.0f, gt.data(), t.grad_buf(a).data.data(), gt.size());
  };
  return self;
}

Var Tape::reshape(Var a, std::vector<int> shape) {
  const Tensor& ta = value(a);
  Tensor out;
  out.shape = std::move(shape);
  std::int64_t n = 1;
  for (int d : out.shape) n *= d;
  if (n != ta.numel()) {
    shape_error("reshape", ta.shape_str() + " -> " + out.shape_str());
  }
  out.data = ta.data;
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    kernels::axpy(1.0f, gy.data.data(), t.grad_buf(a).data.data(),
                  gy.data.size());
  };
  return self;
}

Var Tape::slice_rows(Var a, int r0, int r1) {
  const Tensor& ta = value(a);
  require_rank2(ta, "slice_rows");
  if (r0 < 0 || r1 > ta.rows() || r0 >= r1) {
    shape_error("slice_rows", ta.shape_str() + " rows [" + std::to_string(r0) +
                                  "," + std::to_string(r1) + ")");
  }
  const int n = ta.cols();
  Tensor out({r1 - r0, n});
  std::memcpy(out.data.data(),
              ta.data.data() + static_cast<std::size_t>(r0) * n,
              out.data.size() * sizeof(float));
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a, r0, n](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    float* ga = t.grad_buf(a).data.data() + static_cast<std::size_t>(r0) * n;
    kernels::axpy(1.0f, gy.data.data(), ga, gy.data.size());
  };
  return self;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  const Tensor& ta = value(a);
  require_rank2(ta, "slice_cols");
  if (c0 < 0 || c1 > ta.cols() || c0 >= c1) {
    shape_error("slice_cols", ta.shape_str() + " cols [" + std::to_string(c0) +
                                  "," + std::to_string(c1) + ")");
  }
  const int m = ta.rows(), n = ta.cols(), w = c1 - c0;
  Tensor out({m, w});
  for (int i = 0; i < m; ++i) {
    std::memcpy(out.data.data() + static_cast<std::size_t>(i) * w,
                ta.data.data() + static_cast<std::size_t>(i) * n + c0,
                static_cast<std::size_t>(w) * sizeof(float));
  }
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a, m, n, c0, w](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    float* ga = t.grad_buf(a).data.data();
    for (int i = 0; i < m; ++i) {
      kernels::axpy(1.0f, gy.data.data() + static_cast<std::size_t>(i) * w,
                    ga + static_cast<std::size_t>(i) * n + c0, w);
    }
  };
  return self;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  int n = value(parts[0]).cols();
  int m = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    require_rank2(tp, "concat_rows");
    if (tp.cols() != n) shape_error("concat_rows", tp.shape_str());
    m += tp.rows();
    rg = rg || needs(p);
  }
  Tensor out({m, n});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    std::memcpy(out.data.data() + off, tp.data.data(),
                tp.data.size() * sizeof(float));
    off += tp.data.size();
  }
  Var self = emit(std::move(out), rg, nullptr);
  auto parts_copy = parts;
  nodes_[self.id].backprop = [self, parts_copy](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    std::size_t off = 0;
    for (Var p : parts_copy) {
      const std::size_t len = t.value(p).data.size();
      if (t.needs(p)) {
        kernels::axpy(1.0f, gy.data.data() + off,
                      t.grad_buf(p).data.data(), len);
      }
      off += len;
    }
  };
  return self;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const int m = value(parts[0]).rows();
  int n = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    require_rank2(tp, "concat_cols");
    if (tp.rows() != m) shape_error("concat_cols", tp.shape_str());
    n += tp.cols();
    rg = rg || needs(p);
  }
  Tensor out({m, n});
  int c0 = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    const int w = tp.cols();
    for (int i = 0; i < m; ++i) {
      std::memcpy(out.data.data() + static_cast<std::size_t>(i) * n + c0,
                  tp.data.data() + static_cast<std::size_t>(i) * w,
                  static_cast<std::size_t>(w) * sizeof(float));
    }
    c0 += w;
  }
  Var self = emit(std::move(out), rg, nullptr);
  auto parts_copy = parts;
  nodes_[self.id].backprop = [self, parts_copy, m, n](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    int c0 = 0;
    for (Var p : parts_copy) {
      const int w = t.value(p).cols();
      if (t.needs(p)) {
        float* gp = t.grad_buf(p).data.data();
        for (int i = 0; i < m; ++i) {
          kernels::axpy(1.0f,
                        gy.data.data() + static_cast<std::size_t>(i) * n + c0,
                        gp + static_cast<std::size_t>(i) * w, w);
        }
      }
      c0 += w;
    }
  };
  return self;
}

Var Tape::mean_pool_rows(Var a, int group) {
  const Tensor& ta = value(a);
  require_rank2(ta, "mean_pool_rows");
  if (group <= 0 || ta.rows() % group != 0) {
    shape_error("mean_pool_rows", ta.shape_str() + " with group " +
                                      std::to_string(group));
  }
  const int m = ta.rows() / group, n = ta.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int g = 0; g < group; ++g) {
        acc += static_cast<double>(
            ta.data[static_cast<std::size_t>(i * group + g) * n + j]);
      }
      out.data[static_cast<std::size_t>(i) * n + j] =
          static_cast<float>(acc / group);
    }
  }
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a, m, n, group](Tape& t) {
    if (!t.needs(a)) return;
    const Tensor& gy = t.nodes_[self.id].grad;
    float* ga = t.grad_buf(a).data.data();
    const float inv = 1.0f / static_cast<float>(group);
    for (int i = 0; i < m; ++i) {
      for (int g = 0; g < group; ++g) {
        kernels::axpy(inv, gy.data.data() + static_cast<std::size_t>(i) * n,
                      ga + static_cast<std::size_t>(i * group + g) * n, n);
      }
    }
  };
  return self;
}

Var Tape::embedding_add(Var x, Var pos) {
  const Tensor& tx = value(x);
  const Tensor& tp = value(pos);
  require_rank2(tx, "embedding_add");
  require_rank2(tp, "embedding_add");
  const int T = tp.rows(), E = tp.cols();
  if (tx.cols() != E || T == 0 || tx.rows() % T != 0) {
    shape_error("embedding_add", tx.shape_str() + " + " + tp.shape_str());
  }
  const int batch = tx.rows() / T;
  Tensor out(tx.shape);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < T; ++t) {
      kernels::add(tx.data.data() + static_cast<std::size_t>(b * T + t) * E,
                   tp.data.data() + static_cast<std::size_t>(t) * E,
                   out.data.data() + static_cast<std::size_t>(b * T + t) * E,
                   E);
    }
  }
  Var self = emit(std::move(out), needs(x) || needs(pos), nullptr);
  nodes_[self.id].backprop = [self, x, pos, batch, T, E](Tape& t) {
    const Tensor& gy = t.nodes_[self.id].grad;
    if (t.needs(x)) {
      kernels::axpy(1.0f, gy.data.data(), t.grad_buf(x).data.data(),
                    gy.data.size());
    }
    if (t.needs(pos)) {
      float* gp = t.grad_buf(pos).data.data();
      for (int b = 0; b < batch; ++b) {
        for (int tt = 0; tt < T; ++tt) {
          kernels::axpy(1.0f,
                        gy.data.data() + static_cast<std::size_t>(b * T + tt) * E,
                        gp + static_cast<std::size_t>(tt) * E, E);
        }
      }
    }
  };
  return self;
}

Var Tape::bce_with_logits(Var logits, const Tensor& targets) {
  const Tensor& tz = value(logits);
  if (tz.shape != targets.shape) {
    shape_error("bce_with_logits", tz.shape_str() + " vs targets");
  }
  const std::size_t n = tz.data.size();
  if (n == 0) throw std::invalid_argument("bce_with_logits: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = tz.data[i];
    const double y = targets.data[i];
    acc += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Tensor out({1});
  out.data[0] = static_cast<float>(acc / static_cast<double>(n));
  Var self = emit(std::move(out), needs(logits), nullptr);
  const Tensor targets_copy = targets;
  nodes_[self.id].backprop = [self, logits, targets_copy, n](Tape& t) {
    if (!t.needs(logits)) return;
    const float g = t.nodes_[self.id].grad.data[0];
    const Tensor& tz2 = t.value(logits);
    float* gz = t.grad_buf(logits).data.data();
    const double invn = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid_d(tz2.data[i]);
      gz[i] += static_cast<float>(
          g * (p - static_cast<double>(targets_copy.data[i])) * invn);
    }
  };
  return self;
}

Var Tape::sum(Var a) {
  const Tensor& ta = value(a);
  Tensor out({1});
  out.data[0] =
      static_cast<float>(kernels::sum_f64(ta.data.data(), ta.data.size()));
  Var self = emit(std::move(out), needs(a), nullptr);
  nodes_[self.id].backprop = [self, a](Tape& t) {
    if (!t.needs(a)) return;
    const float g = t.nodes_[self.id].grad.data[0];
    Tensor& ga = t.grad_buf(a);
    for (auto& v : ga.data) v += g;
  };
  return self;
}

void Tape::backward(Var loss) {
  if (consumed_) {
    throw std::logic_error(
        "tape: backward called twice without rebuilding the forward pass");
  }
  const Tensor& lv = value(loss);
  if (lv.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  consumed_ = true;
  grad_buf(loss).data[0] = 1.0f;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.data.empty()) continue;
    if (n.backprop) n.backprop(*this);
    if (n.bound) {
      kernels::axpy(1.0f, n.grad.data.data(), n.bound->grad.data.data(),
                    n.grad.data.size());
    }
  }
}

void adam_step(Tensor& value, const Tensor& grad, AdamState& state, float lr,
               float beta1, float beta2, float eps) {
  if (value.shape != grad.shape) {
    throw std::invalid_argument("adam_step: value/grad shape mismatch");
  }
  if (state.m.data.empty()) {
    state.m = Tensor(value.shape);
    state.v = Tensor(value.shape);
    state.step = 0;
  }
  state.step += 1;
  const double b1 = beta1, b2 = beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < value.data.size(); ++i) {
    const double g = grad.data[i];
    const double m = b1 * state.m.data[i] + (1.0 - b1) * g;
    const double v = b2 * state.v.data[i] + (1.0 - b2) * g * g;
    state.m.data[i] = static_cast<float>(m);
    state.v.data[i] = static_cast<float>(v);
    const double mhat = m / c1;
    const double vhat = v / c2;
    value.data[i] -= static_cast<float>(
        static_cast<double>(lr) * mhat / (std::sqrt(vhat) + eps));
  }
}

}  // namespace glassbox::ad
