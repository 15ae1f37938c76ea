#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdseg/array.hpp"

namespace mdseg {

// Reverse-mode automatic differentiation on a per-forward-pass tape.
// Values are dense arrays; matrix-shaped ops are backed by Eigen GEMM.
// A tape is built once, backward() runs once, then the tape is discarded.

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

namespace detail {
inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("autodiff: " + msg);
}
}  // namespace detail

template <typename T>
class Tape {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapM = Eigen::Map<Mat>;
  using CMapM = Eigen::Map<const Mat>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int size() const { return static_cast<int>(nodes_.size()); }

  Var leaf(const Array<T>& v, bool needs_grad = true) {
    return push(v, needs_grad, nullptr);
  }
  Var constant(const Array<T>& v) { return leaf(v, false); }
  Var zeros(std::vector<int> shape) { return constant(Array<T>(std::move(shape), T(0))); }

  const Array<T>& value(Var v) const { return nodes_[check_id(v)].value; }

  // valid after backward(); zero-shaped if the node was never reached
  const Array<T>& grad(Var v) const {
    detail::check(ran_backward_, "grad() before backward()");
    return grads_[check_id(v)];
  }

  void backward(Var root) {
    detail::check(!ran_backward_, "backward() may run once per tape");
    const Node& r = nodes_[check_id(root)];
    detail::check(r.value.numel() == 1, "backward root must be scalar");
    ran_backward_ = true;
    grads_.resize(nodes_.size());
    grad_buf(root.id)[0] = T(1);
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.back || grads_[i].data.empty()) continue;
      n.back();
    }
  }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    const auto &A = value(a), &B = value(b);
    detail::check(A.same_shape(B), "add: shape mismatch");
    Array<T> out = A;
    for (size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
    return push(std::move(out), needs(a) || needs(b), [this, a, b](int id) {
      const Array<T>& g = grads_[id];
      if (needs(a)) accumulate(a, g);
      if (needs(b)) accumulate(b, g);
    });
  }

  Var sub(Var a, Var b) {
    const auto &A = value(a), &B = value(b);
    detail::check(A.same_shape(B), "sub: shape mismatch");
    Array<T> out = A;
    for (size_t i = 0; i < out.numel(); ++i) out[i] -= B[i];
    return push(std::move(out), needs(a) || needs(b), [this, a, b](int id) {
      const Array<T>& g = grads_[id];
      if (needs(a)) accumulate(a, g);
      if (needs(b)) {
        Array<T>& gb = grad_buf(b.id);
        for (size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
      }
    });
  }

  Var scale(Var a, T s) {
    Array<T> out = value(a);
    for (auto& x : out.data) x *= s;
    return push(std::move(out), needs(a), [this, a, s](int id) {
      if (!needs(a)) return;
      Array<T>& ga = grad_buf(a.id);
      const Array<T>& g = grads_[id];
      for (size_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
    });
  }

  Var mul(Var a, Var b) {  // Hadamard
    const auto &A = value(a), &B = value(b);
    detail::check(A.same_shape(B), "mul: shape mismatch");
    Array<T> out = A;
    for (size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
    return push(std::move(out), needs(a) || needs(b), [this, a, b](int id) {
      const Array<T>& g = grads_[id];
      if (needs(a)) {
        const Array<T>& B = value(b);
        Array<T>& ga = grad_buf(a.id);
        for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * B[i];
      }
      if (needs(b)) {
        const Array<T>& A = value(a);
        Array<T>& gb = grad_buf(b.id);
        for (size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * A[i];
      }
    });
  }

  Var tanh_(Var a) {
    Array<T> out = value(a);
    for (auto& x : out.data) x = std::tanh(x);
    return push(std::move(out), needs(a), [this, a](int id) {
      if (!needs(a)) return;
      const Array<T>& y = nodes_[id].value;
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
    });
  }

  Var sigmoid_(Var a) {
    Array<T> out = value(a);
    for (auto& x : out.data) x = sigmoid_scalar(x);
    return push(std::move(out), needs(a), [this, a](int id) {
      if (!needs(a)) return;
      const Array<T>& y = nodes_[id].value;
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
    });
  }

  Var gelu(Var a) {
    Array<T> out = value(a);
    for (auto& x : out.data) x = x * normal_cdf(x);
    return push(std::move(out), needs(a), [this, a](int id) {
      if (!needs(a)) return;
      const Array<T>& x = value(a);
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      const T inv_sqrt2pi = T(0.3989422804014326779399460599344);
      for (size_t i = 0; i < g.numel(); ++i) {
        T xi = x[i];
        T d = normal_cdf(xi) + xi * inv_sqrt2pi * std::exp(T(-0.5) * xi * xi);
        ga[i] += g[i] * d;
      }
    });
  }

  // ---- matrix ops ----

  Var matmul(Var a, Var b) {  // (m,k) x (k,n)
    const auto &A = value(a), &B = value(b);
    detail::check(A.ndim() == 2 && B.ndim() == 2 && A.cols() == B.rows(), "matmul: bad shapes");
    Array<T> out({A.rows(), B.cols()});
    map(out).noalias() = cmap(A) * cmap(B);
    return push(std::move(out), needs(a) || needs(b), [this, a, b](int id) {
      const Array<T>& g = grads_[id];
      CMapM G = cmap(g);
      if (needs(a)) map(grad_buf(a.id)).noalias() += G * cmap(value(b)).transpose();
      if (needs(b)) map(grad_buf(b.id)).noalias() += cmap(value(a)).transpose() * G;
    });
  }

  Var transpose(Var a) {
    const auto& A = value(a);
    detail::check(A.ndim() == 2, "transpose: want 2-d");
    Array<T> out({A.cols(), A.rows()});
    map(out) = cmap(A).transpose();
    return push(std::move(out), needs(a), [this, a](int id) {
      if (needs(a)) map(grad_buf(a.id)) += cmap(grads_[id]).transpose();
    });
  }

  // y = x * w^T + b, with w stored (out_features, in_features)
  Var linear(Var x, Var w, Var b) {
    const auto &X = value(x), &W = value(w), &B = value(b);
    detail::check(X.ndim() == 2 && W.ndim() == 2 && X.cols() == W.cols(), "linear: bad shapes");
    detail::check(B.numel() == static_cast<size_t>(W.rows()), "linear: bad bias");
    Array<T> out({X.rows(), W.rows()});
    map(out).noalias() = cmap(X) * cmap(W).transpose();
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j) out.at(i, j) += B[j];
    return push(std::move(out), needs(x) || needs(w) || needs(b), [this, x, w, b](int id) {
      const Array<T>& g = grads_[id];
      CMapM G = cmap(g);
      if (needs(x)) map(grad_buf(x.id)).noalias() += G * cmap(value(w));
      if (needs(w)) map(grad_buf(w.id)).noalias() += G.transpose() * cmap(value(x));
      if (needs(b)) {
        Array<T>& gb = grad_buf(b.id);
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) gb[j] += g.at(i, j);
      }
    });
  }

  Var linear_nobias(Var x, Var w) {
    const auto &X = value(x), &W = value(w);
    detail::check(X.ndim() == 2 && W.ndim() == 2 && X.cols() == W.cols(),
                  "linear_nobias: bad shapes");
    Array<T> out({X.rows(), W.rows()});
    map(out).noalias() = cmap(X) * cmap(W).transpose();
    return push(std::move(out), needs(x) || needs(w), [this, x, w](int id) {
      const Array<T>& g = grads_[id];
      CMapM G = cmap(g);
      if (needs(x)) map(grad_buf(x.id)).noalias() += G * cmap(value(w));
      if (needs(w)) map(grad_buf(w.id)).noalias() += G.transpose() * cmap(value(x));
    });
  }

  Var slice_rows(Var a, int r0, int count) {
    const auto& A = value(a);
    detail::check(A.ndim() == 2 && r0 >= 0 && r0 + count <= A.rows(), "slice_rows: bad range");
    Array<T> out({count, A.cols()});
    std::copy_n(A.data.begin() + static_cast<size_t>(r0) * A.cols(), out.numel(),
                out.data.begin());
    return push(std::move(out), needs(a), [this, a, r0](int id) {
      if (!needs(a)) return;
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      size_t off = static_cast<size_t>(r0) * g.cols();
      for (size_t i = 0; i < g.numel(); ++i) ga[off + i] += g[i];
    });
  }

  Var slice_cols(Var a, int c0, int count) {
    const auto& A = value(a);
    detail::check(A.ndim() == 2 && c0 >= 0 && c0 + count <= A.cols(), "slice_cols: bad range");
    Array<T> out({A.rows(), count});
    for (int i = 0; i < A.rows(); ++i)
      std::copy_n(&A.at(i, c0), count, &out.at(i, 0));
    return push(std::move(out), needs(a), [this, a, c0](int id) {
      if (!needs(a)) return;
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) ga.at(i, c0 + j) += g.at(i, j);
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    detail::check(!parts.empty(), "concat_rows: empty");
    int cols = value(parts[0]).cols();
    int rows = 0;
    bool any = false;
    for (Var p : parts) {
      const auto& P = value(p);
      detail::check(P.ndim() == 2 && P.cols() == cols, "concat_rows: col mismatch");
      rows += P.rows();
      any = any || needs(p);
    }
    Array<T> out({rows, cols});
    size_t off = 0;
    for (Var p : parts) {
      const auto& P = value(p);
      std::copy_n(P.data.begin(), P.numel(), out.data.begin() + off);
      off += P.numel();
    }
    return push(std::move(out), any, [this, parts](int id) {
      const Array<T>& g = grads_[id];
      size_t off = 0;
      for (Var p : parts) {
        size_t n = value(p).numel();
        if (needs(p)) {
          Array<T>& gp = grad_buf(p.id);
          for (size_t i = 0; i < n; ++i) gp[i] += g[off + i];
        }
        off += n;
      }
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    detail::check(!parts.empty(), "concat_cols: empty");
    int rows = value(parts[0]).rows();
    int cols = 0;
    bool any = false;
    for (Var p : parts) {
      const auto& P = value(p);
      detail::check(P.ndim() == 2 && P.rows() == rows, "concat_cols: row mismatch");
      cols += P.cols();
      any = any || needs(p);
    }
    Array<T> out({rows, cols});
    int c0 = 0;
    for (Var p : parts) {
      const auto& P = value(p);
      for (int i = 0; i < rows; ++i) std::copy_n(&P.at(i, 0), P.cols(), &out.at(i, c0));
      c0 += P.cols();
    }
    return push(std::move(out), any, [this, parts](int id) {
      const Array<T>& g = grads_[id];
      int c0 = 0;
      for (Var p : parts) {
        const auto& P = value(p);
        if (needs(p)) {
          Array<T>& gp = grad_buf(p.id);
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < P.cols(); ++j) gp.at(i, j) += g.at(i, c0 + j);
        }
        c0 += P.cols();
      }
    });
  }

  Var reshape(Var a, std::vector<int> shape) {
    const auto& A = value(a);
    detail::check(Array<T>::numel_of(shape) == A.numel(), "reshape: numel mismatch");
    Array<T> out(std::move(shape), A.data);
    return push(std::move(out), needs(a), [this, a](int id) {
      if (!needs(a)) return;
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    });
  }

  Var detach(Var a) { return constant(value(a)); }

  // ---- reductions ----

  Var sum_all(Var a) {
    double s = 0;
    for (const T& x : value(a).data) s += static_cast<double>(x);
    Array<T> out({1}, static_cast<T>(s));
    return push(std::move(out), needs(a), [this, a](int id) {
      if (!needs(a)) return;
      T g = grads_[id][0];
      Array<T>& ga = grad_buf(a.id);
      for (auto& x : ga.data) x += g;
    });
  }

  Var mean_all(Var a) {
    size_t n = value(a).numel();
    return scale(sum_all(a), static_cast<T>(1.0 / static_cast<double>(n)));
  }

  // ---- normalization / softmax ----

  Var softmax_rows(Var a) {
    const auto& A = value(a);
    detail::check(A.ndim() == 2, "softmax_rows: want 2-d");
    Array<T> out = A;
    for (int i = 0; i < A.rows(); ++i) {
      T* row = &out.at(i, 0);
      T mx = row[0];
      for (int j = 1; j < A.cols(); ++j) mx = std::max(mx, row[j]);
      double z = 0;
      for (int j = 0; j < A.cols(); ++j) {
        row[j] = std::exp(row[j] - mx);
        z += static_cast<double>(row[j]);
      }
      T inv = static_cast<T>(1.0 / z);
      for (int j = 0; j < A.cols(); ++j) row[j] *= inv;
    }
    return push(std::move(out), needs(a), [this, a](int id) {
      if (!needs(a)) return;
      const Array<T>& y = nodes_[id].value;
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      for (int i = 0; i < g.rows(); ++i) {
        double dot = 0;
        for (int j = 0; j < g.cols(); ++j)
          dot += static_cast<double>(g.at(i, j)) * y.at(i, j);
        for (int j = 0; j < g.cols(); ++j)
          ga.at(i, j) += y.at(i, j) * (g.at(i, j) - static_cast<T>(dot));
      }
    });
  }

  Var layer_norm_rows(Var x, Var gamma, Var beta, T eps) {
    const auto &X = value(x), &G = value(gamma), &B = value(beta);
    detail::check(X.ndim() == 2, "layer_norm: want 2-d");
    int n = X.cols();
    detail::check(G.numel() == static_cast<size_t>(n) && B.numel() == static_cast<size_t>(n),
                  "layer_norm: bad affine shapes");
    auto xhat = std::make_shared<Array<T>>(X.shape);
    auto inv_std = std::make_shared<std::vector<T>>(X.rows());
    Array<T> out(X.shape);
    for (int i = 0; i < X.rows(); ++i) {
      double mu = 0;
      for (int j = 0; j < n; ++j) mu += X.at(i, j);
      mu /= n;
      double var = 0;
      for (int j = 0; j < n; ++j) {
        double d = X.at(i, j) - mu;
        var += d * d;
      }
      var /= n;
      T r = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*inv_std)[i] = r;
      for (int j = 0; j < n; ++j) {
        T xh = (X.at(i, j) - static_cast<T>(mu)) * r;
        xhat->at(i, j) = xh;
        out.at(i, j) = G[j] * xh + B[j];
      }
    }
    return push(std::move(out), needs(x) || needs(gamma) || needs(beta),
                [this, x, gamma, beta, xhat, inv_std](int id) {
      const Array<T>& g = grads_[id];
      int n = g.cols();
      const Array<T>& G = value(gamma);
      if (needs(gamma) || needs(beta)) {
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < n; ++j) {
            if (needs(gamma)) grad_buf(gamma.id)[j] += g.at(i, j) * xhat->at(i, j);
            if (needs(beta)) grad_buf(beta.id)[j] += g.at(i, j);
          }
      }
      if (!needs(x)) return;
      Array<T>& gx = grad_buf(x.id);
      for (int i = 0; i < g.rows(); ++i) {
        double m1 = 0, m2 = 0;
        for (int j = 0; j < n; ++j) {
          double dxh = static_cast<double>(g.at(i, j)) * G[j];
          m1 += dxh;
          m2 += dxh * xhat->at(i, j);
        }
        m1 /= n;
        m2 /= n;
        T r = (*inv_std)[i];
        for (int j = 0; j < n; ++j) {
          double dxh = static_cast<double>(g.at(i, j)) * G[j];
          gx.at(i, j) += static_cast<T>(r * (dxh - m1 - xhat->at(i, j) * m2));
        }
      }
    });
  }

  // rows normalized to unit L2 norm
  Var l2_normalize_rows(Var x, T eps = T(1e-12)) {
    const auto& X = value(x);
    detail::check(X.ndim() == 2, "l2_normalize: want 2-d");
    auto inv_norm = std::make_shared<std::vector<T>>(X.rows());
    Array<T> out = X;
    for (int i = 0; i < X.rows(); ++i) {
      double s = 0;
      for (int j = 0; j < X.cols(); ++j) s += static_cast<double>(X.at(i, j)) * X.at(i, j);
      T r = static_cast<T>(1.0 / std::sqrt(s + static_cast<double>(eps)));
      (*inv_norm)[i] = r;
      for (int j = 0; j < X.cols(); ++j) out.at(i, j) *= r;
    }
    return push(std::move(out), needs(x), [this, x, inv_norm](int id) {
      if (!needs(x)) return;
      const Array<T>& y = nodes_[id].value;
      const Array<T>& g = grads_[id];
      Array<T>& gx = grad_buf(x.id);
      for (int i = 0; i < g.rows(); ++i) {
        double dot = 0;
        for (int j = 0; j < g.cols(); ++j)
          dot += static_cast<double>(g.at(i, j)) * y.at(i, j);
        T r = (*inv_norm)[i];
        for (int j = 0; j < g.cols(); ++j)
          gx.at(i, j) += r * (g.at(i, j) - y.at(i, j) * static_cast<T>(dot));
      }
    });
  }

  // x: (C,H,W), per-group standardization + per-channel affine
  Var group_norm(Var x, Var gamma, Var beta, int groups, T eps) {
    const auto &X = value(x), &G = value(gamma), &B = value(beta);
    detail::check(X.ndim() == 3, "group_norm: want (C,H,W)");
    int C = X.dim(0), H = X.dim(1), W = X.dim(2);
    detail::check(C % groups == 0, "group_norm: C % groups != 0");
    detail::check(G.numel() == static_cast<size_t>(C) && B.numel() == static_cast<size_t>(C),
                  "group_norm: bad affine shapes");
    int cg = C / groups;
    size_t gsz = static_cast<size_t>(cg) * H * W;
    auto xhat = std::make_shared<Array<T>>(X.shape);
    auto inv_std = std::make_shared<std::vector<T>>(groups);
    Array<T> out(X.shape);
    for (int g = 0; g < groups; ++g) {
      const T* src = &X.data[g * gsz];
      double mu = 0;
      for (size_t i = 0; i < gsz; ++i) mu += src[i];
      mu /= static_cast<double>(gsz);
      double var = 0;
      for (size_t i = 0; i < gsz; ++i) {
        double d = src[i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(gsz);
      T r = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*inv_std)[g] = r;
      for (int c = g * cg; c < (g + 1) * cg; ++c) {
        size_t base = static_cast<size_t>(c) * H * W;
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) {
          T xh = (X.data[base + i] - static_cast<T>(mu)) * r;
          xhat->data[base + i] = xh;
          out.data[base + i] = G[c] * xh + B[c];
        }
      }
    }
    return push(std::move(out), needs(x) || needs(gamma) || needs(beta),
                [this, x, gamma, beta, groups, xhat, inv_std](int id) {
      const Array<T>& g = grads_[id];
      int C = g.dim(0), H = g.dim(1), W = g.dim(2);
      int cg = C / groups;
      size_t hw = static_cast<size_t>(H) * W;
      size_t gsz = static_cast<size_t>(cg) * hw;
      const Array<T>& G = value(gamma);
      if (needs(gamma) || needs(beta)) {
        for (int c = 0; c < C; ++c) {
          size_t base = c * hw;
          double dg = 0, db = 0;
          for (size_t i = 0; i < hw; ++i) {
            dg += static_cast<double>(g.data[base + i]) * xhat->data[base + i];
            db += g.data[base + i];
          }
          if (needs(gamma)) grad_buf(gamma.id)[c] += static_cast<T>(dg);
          if (needs(beta)) grad_buf(beta.id)[c] += static_cast<T>(db);
        }
      }
      if (!needs(x)) return;
      Array<T>& gx = grad_buf(x.id);
      for (int grp = 0; grp < groups; ++grp) {
        double m1 = 0, m2 = 0;
        for (int c = grp * cg; c < (grp + 1) * cg; ++c) {
          size_t base = c * hw;
          for (size_t i = 0; i < hw; ++i) {
            double dxh = static_cast<double>(g.data[base + i]) * G[c];
            m1 += dxh;
            m2 += dxh * xhat->data[base + i];
          }
        }
        m1 /= static_cast<double>(gsz);
        m2 /= static_cast<double>(gsz);
        T r = (*inv_std)[grp];
        for (int c = grp * cg; c < (grp + 1) * cg; ++c) {
          size_t base = c * hw;
          for (size_t i = 0; i < hw; ++i) {
            double dxh = static_cast<double>(g.data[base + i]) * G[c];
            gx.data[base + i] +=
                static_cast<T>(r * (dxh - m1 - xhat->data[base + i] * m2));
          }
        }
      }
    });
  }

  // ---- spatial ops ----

  // x: (Cin,H,W); w: (Cout,Cin,kh,kw); b: (Cout). Zero padding.
  Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    const auto &X = value(x), &W = value(w), &B = value(b);
    detail::check(X.ndim() == 3 && W.ndim() == 4, "conv2d: bad ranks");
    int cin = X.dim(0), h = X.dim(1), wd = X.dim(2);
    int cout = W.dim(0), kh = W.dim(2), kw = W.dim(3);
    detail::check(W.dim(1) == cin, "conv2d: channel mismatch");
    detail::check(B.numel() == static_cast<size_t>(cout), "conv2d: bad bias");
    int ho = (h + 2 * pad - kh) / stride + 1;
    int wo = (wd + 2 * pad - kw) / stride + 1;
    detail::check(ho > 0 && wo > 0, "conv2d: empty output");
    int K = cin * kh * kw;
    size_t npos = static_cast<size_t>(ho) * wo;

    auto col = std::make_shared<std::vector<T>>(npos * K, T(0));
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T* dst = col->data() + (static_cast<size_t>(oy) * wo + ox) * K;
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < kh; ++ky) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              dst[(ci * kh + ky) * kw + kx] = X.at(ci, iy, ix);
            }
          }
      }

    Array<T> out({cout, ho, wo});
    {
      CMapM Wm(W.data.data(), cout, K);
      CMapM Cm(col->data(), static_cast<Eigen::Index>(npos), K);
      MapM Om(out.data.data(), cout, static_cast<Eigen::Index>(npos));
      Om.noalias() = Wm * Cm.transpose();
      for (int co = 0; co < cout; ++co) Om.row(co).array() += B[co];
    }
    return push(std::move(out), needs(x) || needs(w) || needs(b),
                [this, x, w, b, stride, pad, col](int id) {
      const Array<T>& g = grads_[id];
      const Array<T>& X = value(x);
      const Array<T>& W = value(w);
      int cout = g.dim(0), ho = g.dim(1), wo = g.dim(2);
      int cin = X.dim(0), h = X.dim(1), wd = X.dim(2);
      int kh = W.dim(2), kw = W.dim(3);
      int K = cin * kh * kw;
      size_t npos = static_cast<size_t>(ho) * wo;
      CMapM Gm(g.data.data(), cout, static_cast<Eigen::Index>(npos));
      if (needs(b)) {
        // scalar accumulation: a vectorized reduction's summation order would
        // depend on the buffer's heap alignment, breaking run-to-run
        // reproducibility of the gradients
        Array<T>& gb = grad_buf(b.id);
        for (int co = 0; co < cout; ++co) {
          const T* row = g.data.data() + static_cast<size_t>(co) * npos;
          T s = T(0);
          for (size_t i = 0; i < npos; ++i) s += row[i];
          gb[co] += s;
        }
      }
      if (needs(w)) {
        CMapM Cm(col->data(), static_cast<Eigen::Index>(npos), K);
        MapM GW(grad_buf(w.id).data.data(), cout, K);
        GW.noalias() += Gm * Cm;
      }
      if (needs(x)) {
        Mat dcol(K, static_cast<Eigen::Index>(npos));
        CMapM Wm(W.data.data(), cout, K);
        dcol.noalias() = Wm.transpose() * Gm;
        Array<T>& gx = grad_buf(x.id);
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) {
            Eigen::Index q = static_cast<Eigen::Index>(oy) * wo + ox;
            for (int ci = 0; ci < cin; ++ci)
              for (int ky = 0; ky < kh; ++ky) {
                int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  int ix = ox * stride - pad + kx;
                  if (ix < 0 || ix >= wd) continue;
                  gx.at(ci, iy, ix) += dcol((ci * kh + ky) * kw + kx, q);
                }
              }
          }
      }
    });
  }

  Var upsample_nearest2x(Var a) {
    const auto& A = value(a);
    detail::check(A.ndim() == 3, "upsample: want (C,H,W)");
    int C = A.dim(0), H = A.dim(1), W = A.dim(2);
    Array<T> out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < 2 * H; ++y)
        for (int x = 0; x < 2 * W; ++x) out.at(c, y, x) = A.at(c, y / 2, x / 2);
    return push(std::move(out), needs(a), [this, a](int id) {
      if (!needs(a)) return;
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      int C = g.dim(0), H2 = g.dim(1), W2 = g.dim(2);
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < H2; ++y)
          for (int x = 0; x < W2; ++x) ga.at(c, y / 2, x / 2) += g.at(c, y, x);
    });
  }

  // keep the top-left (h,w) window of a (C,H,W) map
  Var crop2d(Var a, int h, int w) {
    const auto& A = value(a);
    detail::check(A.ndim() == 3 && h <= A.dim(1) && w <= A.dim(2), "crop2d: bad window");
    int C = A.dim(0);
    Array<T> out({C, h, w});
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < h; ++y)
        std::copy_n(&A.at(c, y, 0), w, &out.at(c, y, 0));
    return push(std::move(out), needs(a), [this, a](int id) {
      if (!needs(a)) return;
      const Array<T>& g = grads_[id];
      Array<T>& ga = grad_buf(a.id);
      int C = g.dim(0), h = g.dim(1), w = g.dim(2);
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) ga.at(c, y, x) += g.at(c, y, x);
    });
  }

  // ---- fused losses ----

  // Mean over rows of weight[i] * cross_entropy(logits_row_i, label_i).
  Var softmax_ce_weighted(Var logits, std::vector<int> labels, std::vector<T> weights) {
    const auto& Z = value(logits);
    detail::check(Z.ndim() == 2, "ce: want 2-d logits");
    int n = Z.rows(), k = Z.cols();
    detail::check(static_cast<int>(labels.size()) == n &&
                      static_cast<int>(weights.size()) == n,
                  "ce: label/weight count");
    auto sm = std::make_shared<Array<T>>(Z.shape);
    double total = 0;
    for (int i = 0; i < n; ++i) {
      detail::check(labels[i] >= 0 && labels[i] < k, "ce: label out of range");
      const T* row = &Z.at(i, 0);
      T mx = row[0];
      for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
      double z = 0;
      for (int j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j] - mx));
      double lse = std::log(z) + mx;
      for (int j = 0; j < k; ++j)
        sm->at(i, j) = static_cast<T>(std::exp(static_cast<double>(row[j]) - lse));
      total += weights[i] * (lse - static_cast<double>(row[labels[i]]));
    }
    Array<T> out({1}, static_cast<T>(total / n));
    auto lab = std::make_shared<std::vector<int>>(std::move(labels));
    auto wts = std::make_shared<std::vector<T>>(std::move(weights));
    return push(std::move(out), needs(logits), [this, logits, sm, lab, wts](int id) {
      if (!needs(logits)) return;
      T g = grads_[id][0];
      Array<T>& gz = grad_buf(logits.id);
      int n = gz.rows(), k = gz.cols();
      for (int i = 0; i < n; ++i) {
        T c = g * (*wts)[i] / static_cast<T>(n);
        for (int j = 0; j < k; ++j) gz.at(i, j) += c * sm->at(i, j);
        gz.at(i, (*lab)[i]) -= c;
      }
    });
  }

  // Alpha-balanced focal loss against a binary target, mean over elements.
  // probs holds probabilities in [0,1] (typically a sigmoid output).
  Var focal_loss_probs(Var probs, Array<T> target, T gamma, T alpha) {
    const auto& P = value(probs);
    detail::check(P.numel() == target.numel(), "focal: size mismatch");
    const double eps = 1e-8;
    double total = 0;
    size_t n = P.numel();
    for (size_t i = 0; i < n; ++i) {
      double p = P[i];
      if (target[i] > T(0.5)) {
        total += -static_cast<double>(alpha) * std::pow(1.0 - p, static_cast<double>(gamma)) *
                 std::log(std::max(p, eps));
      } else {
        total += -(1.0 - static_cast<double>(alpha)) * std::pow(p, static_cast<double>(gamma)) *
                 std::log(std::max(1.0 - p, eps));
      }
    }
    Array<T> out({1}, static_cast<T>(total / static_cast<double>(n)));
    auto tgt = std::make_shared<Array<T>>(std::move(target));
    return push(std::move(out), needs(probs), [this, probs, tgt, gamma, alpha](int id) {
      if (!needs(probs)) return;
      const double eps = 1e-8;
      const Array<T>& P = value(probs);
      T g = grads_[id][0];
      Array<T>& gp = grad_buf(probs.id);
      size_t n = P.numel();
      double inv_n = 1.0 / static_cast<double>(n);
      double ga = static_cast<double>(gamma);
      for (size_t i = 0; i < n; ++i) {
        double p = P[i];
        double d;
        if ((*tgt)[i] > T(0.5)) {
          double u = 1.0 - p;
          double L = std::log(std::max(p, eps));
          double dL = p > eps ? 1.0 / p : 0.0;
          d = -static_cast<double>(alpha) *
              (-ga * std::pow(u, ga - 1.0) * L + std::pow(u, ga) * dL);
        } else {
          double L = std::log(std::max(1.0 - p, eps));
          double dL = (1.0 - p) > eps ? -1.0 / (1.0 - p) : 0.0;
          d = -(1.0 - static_cast<double>(alpha)) *
              (ga * std::pow(p, ga - 1.0) * L + std::pow(p, ga) * dL);
        }
        gp[i] += static_cast<T>(static_cast<double>(g) * d * inv_n);
      }
    });
  }

  // Soft Dice loss against a binary target.
  Var dice_loss_probs(Var probs, Array<T> target, T smooth) {
    const auto& P = value(probs);
    detail::check(P.numel() == target.numel(), "dice: size mismatch");
    double inter = 0, psum = 0, tsum = 0;
    size_t n = P.numel();
    for (size_t i = 0; i < n; ++i) {
      inter += static_cast<double>(P[i]) * target[i];
      psum += P[i];
      tsum += target[i];
    }
    double A = 2.0 * inter + smooth;
    double B = psum + tsum + smooth;
    Array<T> out({1}, static_cast<T>(1.0 - A / B));
    auto tgt = std::make_shared<Array<T>>(std::move(target));
    auto cached = std::make_shared<std::pair<double, double>>(A, B);
    return push(std::move(out), needs(probs), [this, probs, tgt, cached](int id) {
      if (!needs(probs)) return;
      T g = grads_[id][0];
      Array<T>& gp = grad_buf(probs.id);
      double A = cached->first, B = cached->second;
      double invB2 = 1.0 / (B * B);
      size_t n = gp.numel();
      for (size_t i = 0; i < n; ++i) {
        double d = (A - 2.0 * static_cast<double>((*tgt)[i]) * B) * invB2;
        gp[i] += static_cast<T>(static_cast<double>(g) * d);
      }
    });
  }

 private:
  struct Node {
    Array<T> value;
    std::function<void()> back;
    bool needs_grad = false;
  };

  static T sigmoid_scalar(T x) {
    if (x >= T(0)) {
      T e = std::exp(-x);
      return T(1) / (T(1) + e);
    }
    T e = std::exp(x);
    return e / (T(1) + e);
  }

  static T normal_cdf(T x) {
    return T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440084436210485)));
  }

  int check_id(Var v) const {
    detail::check(v.id >= 0 && v.id < size(), "bad Var");
    return v.id;
  }

  bool needs(Var v) const { return nodes_[check_id(v)].needs_grad; }

  Array<T>& grad_buf(int id) {
    Array<T>& g = grads_[id];
    if (g.data.empty()) {
      g.shape = nodes_[id].value.shape;
      g.data.assign(nodes_[id].value.numel(), T(0));
    }
    return g;
  }

  void accumulate(Var v, const Array<T>& g) {
    Array<T>& gv = grad_buf(v.id);
    for (size_t i = 0; i < g.numel(); ++i) gv[i] += g[i];
  }

  static MapM map(Array<T>& a) { return MapM(a.data.data(), a.rows(), a.cols()); }
  static CMapM cmap(const Array<T>& a) { return CMapM(a.data.data(), a.rows(), a.cols()); }

  // f, when set, receives the id of the new node and accumulates into parents
  Var push(Array<T> v, bool needs_grad, std::function<void(int)> f) {
    int id = size();
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    if (needs_grad && f) n.back = [f = std::move(f), id] { f(id); };
    nodes_.push_back(std::move(n));
    return Var{id};
  }

  std::vector<Node> nodes_;
  std::vector<Array<T>> grads_;
  bool ran_backward_ = false;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace mdseg
