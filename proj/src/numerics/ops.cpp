// Copyright 2026 The HybridMT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hmt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hmt/errors.hpp"
#include "hmt/kernels.hpp"

namespace hmt {

namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

std::vector<double>& grad_of(detail::TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) +
                       " and " + to_string(b.shape()));
}

void require_matrix(const char* op, const Tensor& x) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + to_string(x.shape()));
  }
}

// Wraps freshly computed values into a tensor, validates them, and records a
// tape node when any input participates in differentiation.
template <class MakeBackward>
Tensor finish(const char* op, Shape shape, std::vector<double> data,
              const std::vector<const Tensor*>& inputs, MakeBackward&& make_backward) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": produced a non-finite value");
  }
  auto out = std::make_shared<detail::TensorImpl>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  Tape* tape = active_tape();
  bool track = false;
  if (tape) {
    for (const Tensor* in : inputs) track = track || in->requires_grad();
  }
  if (track) {
    out->requires_grad = true;
    out->is_leaf = false;
    Tape::Node node;
    node.op = op;
    for (const Tensor* in : inputs) node.inputs.push_back(in->impl());
    node.output = out;
    node.backward = make_backward(out.get());
    tape->record(std::move(node));
  }
  return Tensor(std::move(out));
}

const kernels::KernelTable& kt() { return kernels::active(); }

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + to_string(x.shape()));
  }
  AxisSplit s{1, x.shape()[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= x.shape()[i];
  for (std::size_t i = axis + 1; i < x.rank(); ++i) s.inner *= x.shape()[i];
  return s;
}

template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  ImplPtr xi = x.impl();
  return finish(op, x.shape(), std::move(out), {&x}, [xi, df](detail::TensorImpl* o) {
    return [xi, o, df] {
      if (!xi->requires_grad) return;
      auto& g = grad_of(*xi);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * df(xi->data[i], o->data[i]);
    };
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  ImplPtr ai = a.impl(), bi = b.impl();
  return finish("add", a.shape(), std::move(out), {&a, &b}, [ai, bi](detail::TensorImpl* o) {
    return [ai, bi, o] {
      if (ai->requires_grad) kt().axpy(1.0, o->grad.data(), grad_of(*ai).data(), o->grad.size());
      if (bi->requires_grad) kt().axpy(1.0, o->grad.data(), grad_of(*bi).data(), o->grad.size());
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  ImplPtr ai = a.impl(), bi = b.impl();
  return finish("sub", a.shape(), std::move(out), {&a, &b}, [ai, bi](detail::TensorImpl* o) {
    return [ai, bi, o] {
      if (ai->requires_grad) kt().axpy(1.0, o->grad.data(), grad_of(*ai).data(), o->grad.size());
      if (bi->requires_grad) kt().axpy(-1.0, o->grad.data(), grad_of(*bi).data(), o->grad.size());
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  ImplPtr ai = a.impl(), bi = b.impl();
  return finish("mul", a.shape(), std::move(out), {&a, &b}, [ai, bi](detail::TensorImpl* o) {
    return [ai, bi, o] {
      const std::size_t n = o->grad.size();
      if (ai->requires_grad) {
        auto& g = grad_of(*ai);
        for (std::size_t i = 0; i < n; ++i) g[i] += o->grad[i] * bi->data[i];
      }
      if (bi->requires_grad) {
        auto& g = grad_of(*bi);
        for (std::size_t i = 0; i < n; ++i) g[i] += o->grad[i] * ai->data[i];
      }
    };
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.cols();
  if (bias.size() != n) dim_error("add_bias", x, bias);
  std::vector<double> out(x.data().begin(), x.data().end());
  const std::size_t m = x.size() / n;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias.at(j);
  }
  ImplPtr xi = x.impl(), bi = bias.impl();
  return finish("add_bias", x.shape(), std::move(out), {&x, &bias},
                [xi, bi, m, n](detail::TensorImpl* o) {
                  return [xi, bi, o, m, n] {
                    if (xi->requires_grad) {
                      kt().axpy(1.0, o->grad.data(), grad_of(*xi).data(), o->grad.size());
                    }
                    if (bi->requires_grad) {
                      auto& g = grad_of(*bi);
                      for (std::size_t i = 0; i < m; ++i) kt().axpy(1.0, &o->grad[i * n], g.data(), n);
                    }
                  };
                });
}

Tensor scale(const Tensor& x, double factor) { return affine(x, factor, 0.0); }

Tensor affine(const Tensor& x, double alpha, double beta) {
  return unary(
      "affine", x, [alpha, beta](double v) { return alpha * v + beta; },
      [alpha](double, double) { return alpha; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) dim_error("matmul", a, b);
  std::vector<double> out(m * n, 0.0);
  kt().gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  ImplPtr ai = a.impl(), bi = b.impl();
  return finish("matmul", {m, n}, std::move(out), {&a, &b}, [ai, bi, m, k, n](detail::TensorImpl* o) {
    return [ai, bi, o, m, k, n] {
      if (ai->requires_grad) kt().gemm_nt(o->grad.data(), bi->data.data(), grad_of(*ai).data(), m, n, k);
      if (bi->requires_grad) kt().gemm_tn(ai->data.data(), o->grad.data(), grad_of(*bi).data(), m, k, n);
    };
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix("matmul_nt", a);
  require_matrix("matmul_nt", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) dim_error("matmul_nt", a, b);
  std::vector<double> out(m * n, 0.0);
  kt().gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n);
  ImplPtr ai = a.impl(), bi = b.impl();
  return finish("matmul_nt", {m, n}, std::move(out), {&a, &b},
                [ai, bi, m, k, n](detail::TensorImpl* o) {
                  return [ai, bi, o, m, k, n] {
                    if (ai->requires_grad) {
                      kt().gemm_nn(o->grad.data(), bi->data.data(), grad_of(*ai).data(), m, n, k);
                    }
                    if (bi->requires_grad) {
                      kt().gemm_tn(o->grad.data(), ai->data.data(), grad_of(*bi).data(), m, n, k);
                    }
                  };
                });
}

Tensor transpose(const Tensor& x) {
  require_matrix("transpose", x);
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.at(i * n + j);
  }
  ImplPtr xi = x.impl();
  return finish("transpose", {n, m}, std::move(out), {&x}, [xi, m, n](detail::TensorImpl* o) {
    return [xi, o, m, n] {
      if (!xi->requires_grad) return;
      auto& g = grad_of(*xi);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o->grad[j * m + i];
      }
    };
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  ImplPtr xi = x.impl();
  return finish("sum", {1}, {acc}, {&x}, [xi](detail::TensorImpl* o) {
    return [xi, o] {
      if (!xi->requires_grad) return;
      for (double& g : grad_of(*xi)) g += o->grad[0];
    };
  });
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  ImplPtr xi = x.impl();
  return finish("mean", {1}, {acc * inv}, {&x}, [xi, inv](detail::TensorImpl* o) {
    return [xi, o, inv] {
      if (!xi->requires_grad) return;
      for (double& g : grad_of(*xi)) g += o->grad[0] * inv;
    };
  });
}

Tensor mean_rows(const Tensor& x) {
  require_matrix("mean_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  const double inv = 1.0 / static_cast<double>(m);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) kt().axpy(1.0, &x.data()[i * n], out.data(), n);
  for (double& v : out) v *= inv;
  ImplPtr xi = x.impl();
  return finish("mean_rows", {1, n}, std::move(out), {&x}, [xi, m, n, inv](detail::TensorImpl* o) {
    return [xi, o, m, n, inv] {
      if (!xi->requires_grad) return;
      auto& g = grad_of(*xi);
      for (std::size_t i = 0; i < m; ++i) kt().axpy(inv, o->grad.data(), &g[i * n], n);
    };
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x, axis, "softmax");
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t r = 0; r < s.inner; ++r) {
      const std::size_t base = o * s.len * s.inner + r;
      double mx = in[base];
      for (std::size_t i = 1; i < s.len; ++i) mx = std::max(mx, in[base + i * s.inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < s.len; ++i) {
        const double e = std::exp(in[base + i * s.inner] - mx);
        out[base + i * s.inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < s.len; ++i) out[base + i * s.inner] /= total;
    }
  }
  ImplPtr xi = x.impl();
  return finish("softmax", x.shape(), std::move(out), {&x}, [xi, s](detail::TensorImpl* o) {
    return [xi, o, s] {
      if (!xi->requires_grad) return;
      auto& g = grad_of(*xi);
      for (std::size_t a = 0; a < s.outer; ++a) {
        for (std::size_t r = 0; r < s.inner; ++r) {
          const std::size_t base = a * s.len * s.inner + r;
          double dotp = 0.0;
          for (std::size_t i = 0; i < s.len; ++i) {
            dotp += o->grad[base + i * s.inner] * o->data[base + i * s.inner];
          }
          for (std::size_t i = 0; i < s.len; ++i) {
            const std::size_t idx = base + i * s.inner;
            g[idx] += o->data[idx] * (o->grad[idx] - dotp);
          }
        }
      }
    };
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x, axis, "log_softmax");
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t r = 0; r < s.inner; ++r) {
      const std::size_t base = o * s.len * s.inner + r;
      double mx = in[base];
      for (std::size_t i = 1; i < s.len; ++i) mx = std::max(mx, in[base + i * s.inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < s.len; ++i) total += std::exp(in[base + i * s.inner] - mx);
      const double log_z = mx + std::log(total);
      for (std::size_t i = 0; i < s.len; ++i) out[base + i * s.inner] = in[base + i * s.inner] - log_z;
    }
  }
  ImplPtr xi = x.impl();
  return finish("log_softmax", x.shape(), std::move(out), {&x}, [xi, s](detail::TensorImpl* o) {
    return [xi, o, s] {
      if (!xi->requires_grad) return;
      auto& g = grad_of(*xi);
      for (std::size_t a = 0; a < s.outer; ++a) {
        for (std::size_t r = 0; r < s.inner; ++r) {
          const std::size_t base = a * s.len * s.inner + r;
          double gsum = 0.0;
          for (std::size_t i = 0; i < s.len; ++i) gsum += o->grad[base + i * s.inner];
          for (std::size_t i = 0; i < s.len; ++i) {
            const std::size_t idx = base + i * s.inner;
            g[idx] += o->grad[idx] - std::exp(o->data[idx]) * gsum;
          }
        }
      }
    };
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t n = x.cols();
  if (gain.size() != n) dim_error("layer_norm", x, gain);
  if (bias.size() != n) dim_error("layer_norm", x, bias);
  const std::size_t m = x.size() / n;
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(m);
  const auto in = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = &in[i * n];
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * inv_std[i];
      xhat[i * n + j] = h;
      out[i * n + j] = h * gain.at(j) + bias.at(j);
    }
  }
  ImplPtr xi = x.impl(), gi = gain.impl(), bi = bias.impl();
  return finish("layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
                [xi, gi, bi, m, n, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](detail::TensorImpl* o) mutable {
                  return [xi, gi, bi, o, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
                    const auto& go = o->grad;
                    if (gi->requires_grad) {
                      auto& g = grad_of(*gi);
                      for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < n; ++j) g[j] += go[i * n + j] * xhat[i * n + j];
                      }
                    }
                    if (bi->requires_grad) {
                      auto& g = grad_of(*bi);
                      for (std::size_t i = 0; i < m; ++i) kt().axpy(1.0, &go[i * n], g.data(), n);
                    }
                    if (xi->requires_grad) {
                      auto& g = grad_of(*xi);
                      const double inv_n = 1.0 / static_cast<double>(n);
                      for (std::size_t i = 0; i < m; ++i) {
                        double mean_d = 0.0, mean_dx = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                          const double d = go[i * n + j] * gi->data[j];
                          mean_d += d;
                          mean_dx += d * xhat[i * n + j];
                        }
                        mean_d *= inv_n;
                        mean_dx *= inv_n;
                        for (std::size_t j = 0; j < n; ++j) {
                          const double d = go[i * n + j] * gi->data[j];
                          g[i * n + j] += inv_std[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
                        }
                      }
                    }
                  };
                });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  for (const Tensor& p : parts) require_matrix("concat_cols", p);
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != m) dim_error("concat_cols", parts[0], p);
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(&p.data()[i * w], w, &out[i * n + offset]);
    }
    offset += w;
  }
  std::vector<const Tensor*> inputs;
  std::vector<ImplPtr> impls;
  for (const Tensor& p : parts) {
    inputs.push_back(&p);
    impls.push_back(p.impl());
  }
  return finish("concat_cols", {m, n}, std::move(out), inputs, [impls, m, n](detail::TensorImpl* o) {
    return [impls, o, m, n] {
      std::size_t off = 0;
      for (const ImplPtr& p : impls) {
        const std::size_t w = p->shape.back();
        if (p->requires_grad) {
          auto& g = grad_of(*p);
          for (std::size_t i = 0; i < m; ++i) kt().axpy(1.0, &o->grad[i * n + off], &g[i * w], w);
        }
        off += w;
      }
    };
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  for (const Tensor& p : parts) require_matrix("concat_rows", p);
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != n) dim_error("concat_rows", parts[0], p);
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<const Tensor*> inputs;
  std::vector<ImplPtr> impls;
  for (const Tensor& p : parts) {
    inputs.push_back(&p);
    impls.push_back(p.impl());
  }
  return finish("concat_rows", {m, n}, std::move(out), inputs, [impls](detail::TensorImpl* o) {
    return [impls, o] {
      std::size_t off = 0;
      for (const ImplPtr& p : impls) {
        const std::size_t len = p->data.size();
        if (p->requires_grad) kt().axpy(1.0, &o->grad[off], grad_of(*p).data(), len);
        off += len;
      }
    };
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " + to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(&x.data()[i * n + begin], w, &out[i * w]);
  ImplPtr xi = x.impl();
  return finish("slice_cols", {m, w}, std::move(out), {&x}, [xi, m, n, w, begin](detail::TensorImpl* o) {
    return [xi, o, m, n, w, begin] {
      if (!xi->requires_grad) return;
      auto& g = grad_of(*xi);
      for (std::size_t i = 0; i < m; ++i) kt().axpy(1.0, &o->grad[i * w], &g[i * n + begin], w);
    };
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > m) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " + to_string(x.shape()));
  }
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          x.data().begin() + static_cast<std::ptrdiff_t>(end * n));
  ImplPtr xi = x.impl();
  return finish("slice_rows", {end - begin, n}, std::move(out), {&x}, [xi, n, begin](detail::TensorImpl* o) {
    return [xi, o, n, begin] {
      if (!xi->requires_grad) return;
      kt().axpy(1.0, o->grad.data(), &grad_of(*xi)[begin * n], o->grad.size());
    };
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  ImplPtr xi = x.impl();
  return finish("reshape", std::move(shape), std::move(out), {&x}, [xi](detail::TensorImpl* o) {
    return [xi, o] {
      if (xi->requires_grad) kt().axpy(1.0, o->grad.data(), grad_of(*xi).data(), o->grad.size());
    };
  });
}

Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> allowed, double fill) {
  if (allowed.size() != x.size()) {
    throw DimensionError("masked_fill: mask of " + std::to_string(allowed.size()) +
                         " entries for tensor " + to_string(x.shape()));
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = allowed[i] ? x.at(i) : fill;
  ImplPtr xi = x.impl();
  std::vector<std::uint8_t> keep(allowed.begin(), allowed.end());
  return finish("masked_fill", x.shape(), std::move(out), {&x},
                [xi, keep = std::move(keep)](detail::TensorImpl* o) mutable {
                  return [xi, o, keep = std::move(keep)] {
                    if (!xi->requires_grad) return;
                    auto& g = grad_of(*xi);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      if (keep[i]) g[i] += o->grad[i];
                    }
                  };
                });
}

Tensor embed(const Tensor& table, std::span<const TokenId> ids) {
  require_matrix("embed", table);
  if (ids.empty()) throw ContractError("embed: empty id sequence");
  const std::size_t v = table.rows(), d = table.cols();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= v) {
      throw IndexError("embed: token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                       std::to_string(v));
    }
    std::copy_n(&table.data()[ids[i] * d], d, &out[i * d]);
  }
  ImplPtr ti = table.impl();
  std::vector<TokenId> idv(ids.begin(), ids.end());
  return finish("embed", {ids.size(), d}, std::move(out), {&table},
                [ti, d, idv = std::move(idv)](detail::TensorImpl* o) mutable {
                  return [ti, o, d, idv = std::move(idv)] {
                    if (!ti->requires_grad) return;
                    auto& g = grad_of(*ti);
                    for (std::size_t i = 0; i < idv.size(); ++i) {
                      kt().axpy(1.0, &o->grad[i * d], &g[idv[i] * d], d);
                    }
                  };
                });
}

Tensor cross_entropy(const Tensor& logits, std::span<const TokenId> targets) {
  require_matrix("cross_entropy", logits);
  const std::size_t t = logits.rows(), v = logits.cols();
  if (targets.size() != t) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + to_string(logits.shape()));
  }
  std::vector<double> probs(t * v);
  double loss = 0.0;
  const auto in = logits.data();
  for (std::size_t i = 0; i < t; ++i) {
    if (targets[i] >= v) {
      throw IndexError("cross_entropy: target id " + std::to_string(targets[i]) +
                       " outside vocabulary of " + std::to_string(v));
    }
    const double* row = &in[i * v];
    const double mx = *std::max_element(row, row + v);
    double total = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      probs[i * v + j] = std::exp(row[j] - mx);
      total += probs[i * v + j];
    }
    for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= total;
    loss -= row[targets[i]] - mx - std::log(total);
  }
  loss /= static_cast<double>(t);
  ImplPtr li = logits.impl();
  std::vector<TokenId> tg(targets.begin(), targets.end());
  return finish("cross_entropy", {1}, {loss}, {&logits},
                [li, t, v, probs = std::move(probs), tg = std::move(tg)](detail::TensorImpl* o) mutable {
                  return [li, o, t, v, probs = std::move(probs), tg = std::move(tg)] {
                    if (!li->requires_grad) return;
                    auto& g = grad_of(*li);
                    const double s = o->grad[0] / static_cast<double>(t);
                    for (std::size_t i = 0; i < t; ++i) {
                      for (std::size_t j = 0; j < v; ++j) {
                        const double target = (j == tg[i]) ? 1.0 : 0.0;
                        g[i * v + j] += s * (probs[i * v + j] - target);
                      }
                    }
                  };
                });
}

Tensor kl_divergence(const Tensor& teacher_probs, const Tensor& student_logits) {
  require_matrix("kl_divergence", student_logits);
  if (teacher_probs.shape() != student_logits.shape()) {
    dim_error("kl_divergence", teacher_probs, student_logits);
  }
  if (teacher_probs.requires_grad()) {
    throw ContractError("kl_divergence: teacher distribution must be a constant");
  }
  const std::size_t t = student_logits.rows(), v = student_logits.cols();
  std::vector<double> q(t * v);
  double kl = 0.0;
  const auto p = teacher_probs.data();
  const auto in = student_logits.data();
  for (std::size_t i = 0; i < t; ++i) {
    const double* row = &in[i * v];
    const double mx = *std::max_element(row, row + v);
    double total = 0.0;
    for (std::size_t j = 0; j < v; ++j) total += std::exp(row[j] - mx);
    const double log_z = mx + std::log(total);
    for (std::size_t j = 0; j < v; ++j) {
      const double log_q = row[j] - log_z;
      q[i * v + j] = std::exp(log_q);
      const double pj = p[i * v + j];
      if (pj > 0.0) kl += pj * (std::log(pj) - log_q);
    }
  }
  kl /= static_cast<double>(t);
  ImplPtr li = student_logits.impl(), pi = teacher_probs.impl();
  return finish("kl_divergence", {1}, {kl}, {&student_logits},
                [li, pi, t, v, q = std::move(q)](detail::TensorImpl* o) mutable {
                  return [li, pi, o, t, v, q = std::move(q)] {
                    if (!li->requires_grad) return;
                    auto& g = grad_of(*li);
                    const double s = o->grad[0] / static_cast<double>(t);
                    for (std::size_t i = 0; i < t; ++i) {
                      double mass = 0.0;
                      for (std::size_t j = 0; j < v; ++j) mass += pi->data[i * v + j];
                      for (std::size_t j = 0; j < v; ++j) {
                        g[i * v + j] += s * (mass * q[i * v + j] - pi->data[i * v + j]);
                      }
                    }
                  };
                });
}

}  // namespace hmt
