#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "cgre/tensor.hpp"

namespace cgre {

namespace detail {

inline void require_matrix(const Tensor& t, const char* op) {
  if (t.ndim() != 2)
    throw ShapeError(std::string(op) + ": expected matrix, got " + t.shape_str());
}

inline void require_vector(const Tensor& t, const char* op) {
  if (t.ndim() != 1)
    throw ShapeError(std::string(op) + ": expected vector, got " + t.shape_str());
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
}

}  // namespace detail

// C = A B for matrices (m,k) x (k,n).
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  if (a.shape[1] != b.shape[0])
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " x " +
                     b.shape_str());
  const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out = Tensor::zeros({m, n});
  const double* ad = a.data->data();
  const double* bd = b.data->data();
  double* od = out.data->data();
  for (int i = 0; i < m; ++i)
    for (int t = 0; t < k; ++t) {
      const double av = ad[i * k + t];
      if (av == 0.0) continue;
      const double* brow = bd + static_cast<std::size_t>(t) * n;
      double* orow = od + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  if (detail::track({&a, &b})) {
    detail::attach(out, {a, b}, [a, b, m, k, n](const Tensor& o) {
      const double* og = o.grad->data();
      if (a.requires_grad) {
        double* ag = a.grad->data();
        const double* bd2 = b.data->data();
        for (int i = 0; i < m; ++i)
          for (int t = 0; t < k; ++t) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += og[i * n + j] * bd2[t * n + j];
            ag[i * k + t] += s;
          }
      }
      if (b.requires_grad) {
        double* bg = b.grad->data();
        const double* ad2 = a.data->data();
        for (int t = 0; t < k; ++t)
          for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += ad2[i * k + t] * og[i * n + j];
            bg[t * n + j] += s;
          }
      }
    });
  }
  return out;
}

// y = A x for (m,k) x (k).
inline Tensor matvec(const Tensor& a, const Tensor& x) {
  detail::require_matrix(a, "matvec");
  detail::require_vector(x, "matvec");
  if (a.shape[1] != x.shape[0])
    throw ShapeError("matvec: incompatible shapes " + a.shape_str() + " x " +
                     x.shape_str());
  const int m = a.shape[0], k = a.shape[1];
  Tensor out = Tensor::zeros({m});
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int t = 0; t < k; ++t) s += a.at(i, t) * x.at(static_cast<std::size_t>(t));
    out.at(static_cast<std::size_t>(i)) = s;
  }
  if (detail::track({&a, &x})) {
    detail::attach(out, {a, x}, [a, x, m, k](const Tensor& o) {
      const double* og = o.grad->data();
      if (a.requires_grad) {
        double* ag = a.grad->data();
        for (int i = 0; i < m; ++i)
          for (int t = 0; t < k; ++t) ag[i * k + t] += og[i] * (*x.data)[t];
      }
      if (x.requires_grad) {
        double* xg = x.grad->data();
        for (int i = 0; i < m; ++i)
          for (int t = 0; t < k; ++t) xg[t] += (*a.data)[i * k + t] * og[i];
      }
    });
  }
  return out;
}

// y = x^T W for (k) x (k,n).
inline Tensor vecmat(const Tensor& x, const Tensor& w) {
  detail::require_vector(x, "vecmat");
  detail::require_matrix(w, "vecmat");
  if (x.shape[0] != w.shape[0])
    throw ShapeError("vecmat: incompatible shapes " + x.shape_str() + " x " +
                     w.shape_str());
  const int k = w.shape[0], n = w.shape[1];
  Tensor out = Tensor::zeros({n});
  for (int t = 0; t < k; ++t) {
    const double xv = x.at(static_cast<std::size_t>(t));
    if (xv == 0.0) continue;
    for (int j = 0; j < n; ++j) out.at(static_cast<std::size_t>(j)) += xv * w.at(t, j);
  }
  if (detail::track({&x, &w})) {
    detail::attach(out, {x, w}, [x, w, k, n](const Tensor& o) {
      const double* og = o.grad->data();
      if (x.requires_grad) {
        double* xg = x.grad->data();
        for (int t = 0; t < k; ++t)
          for (int j = 0; j < n; ++j) xg[t] += (*w.data)[t * n + j] * og[j];
      }
      if (w.requires_grad) {
        double* wg = w.grad->data();
        for (int t = 0; t < k; ++t)
          for (int j = 0; j < n; ++j) wg[t * n + j] += (*x.data)[t] * og[j];
      }
    });
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  detail::require_matrix(a, "transpose");
  const int m = a.shape[0], n = a.shape[1];
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  if (detail::track({&a})) {
    detail::attach(out, {a}, [a, m, n](const Tensor& o) {
      if (!a.requires_grad) return;
      double* ag = a.grad->data();
      const double* og = o.grad->data();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) ag[i * n + j] += og[j * m + i];
    });
  }
  return out;
}

namespace detail {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name,
                          Fwd fwd, Bwd bwd) {
  require_same_shape(a, b, name);
  Tensor out = Tensor::zeros(a.shape);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = fwd(a.at(i), b.at(i));
  if (track({&a, &b})) {
    attach(out, {a, b}, [a, b, n, bwd](const Tensor& o) {
      for (std::size_t i = 0; i < n; ++i) {
        double da = 0.0, db = 0.0;
        bwd(a.at(i), b.at(i), (*o.grad)[i], da, db);
        if (a.requires_grad) (*a.grad)[i] += da;
        if (b.requires_grad) (*b.grad)[i] += db;
      }
    });
  }
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = c * a.at(i);
  if (detail::track({&a})) {
    detail::attach(out, {a}, [a, c, n](const Tensor& o) {
      if (!a.requires_grad) return;
      for (std::size_t i = 0; i < n; ++i) (*a.grad)[i] += c * (*o.grad)[i];
    });
  }
  return out;
}

// M + b broadcast over rows.
inline Tensor add_row_bias(const Tensor& m, const Tensor& b) {
  detail::require_matrix(m, "add_row_bias");
  detail::require_vector(b, "add_row_bias");
  if (m.shape[1] != b.shape[0])
    throw ShapeError("add_row_bias: " + m.shape_str() + " vs " + b.shape_str());
  const int r = m.shape[0], c = m.shape[1];
  Tensor out = Tensor::zeros({r, c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.at(i, j) = m.at(i, j) + b.at(static_cast<std::size_t>(j));
  if (detail::track({&m, &b})) {
    detail::attach(out, {m, b}, [m, b, r, c](const Tensor& o) {
      const double* og = o.grad->data();
      if (m.requires_grad)
        for (std::size_t i = 0; i < m.numel(); ++i) (*m.grad)[i] += og[i];
      if (b.requires_grad)
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) (*b.grad)[j] += og[i * c + j];
    });
  }
  return out;
}

namespace detail {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& a, Fwd fwd, Bwd bwd) {
  Tensor out = Tensor::zeros(a.shape);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = fwd(a.at(i));
  if (track({&a})) {
    attach(out, {a}, [a, n, bwd](const Tensor& o) {
      if (!a.requires_grad) return;
      for (std::size_t i = 0; i < n; ++i)
        (*a.grad)[i] += bwd(a.at(i), o.at(i)) * (*o.grad)[i];
    });
  }
  return out;
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary_elementwise(
      a,
      [](double x) {
        // Split on sign so exp never overflows.
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary_elementwise(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary_elementwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// Numerically stable softmax over a vector: the max is subtracted before
// exponentiation, so arbitrarily large inputs cannot overflow.
inline Tensor softmax(const Tensor& v) {
  detail::require_vector(v, "softmax");
  const int n = v.shape[0];
  if (n < 1) throw DomainError("softmax: empty input");
  Tensor out = Tensor::zeros({n});
  double mx = v.at(std::size_t{0});
  for (int i = 1; i < n; ++i) mx = std::max(mx, v.at(static_cast<std::size_t>(i)));
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    double e = std::exp(v.at(static_cast<std::size_t>(i)) - mx);
    out.at(static_cast<std::size_t>(i)) = e;
    z += e;
  }
  for (int i = 0; i < n; ++i) out.at(static_cast<std::size_t>(i)) /= z;
  if (detail::track({&v})) {
    detail::attach(out, {v}, [v, n](const Tensor& o) {
      if (!v.requires_grad) return;
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += (*o.grad)[i] * (*o.data)[i];
      for (int i = 0; i < n; ++i)
        (*v.grad)[i] += (*o.data)[i] * ((*o.grad)[i] - dot);
    });
  }
  return out;
}

// Concatenation of vectors into one vector.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  int total = 0;
  for (const Tensor& p : parts) {
    detail::require_vector(p, "concat");
    total += p.shape[0];
  }
  Tensor out = Tensor::zeros({total});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < p.numel(); ++i) out.at(off + i) = p.at(i);
    off += p.numel();
  }
  bool tracked = detail::grad_mode_flag() &&
                 std::any_of(parts.begin(), parts.end(),
                             [](const Tensor& t) { return t.requires_grad; });
  if (tracked) {
    detail::attach(out, parts, [parts](const Tensor& o) {
      std::size_t off = 0;
      for (const Tensor& p : parts) {
        if (p.requires_grad)
          for (std::size_t i = 0; i < p.numel(); ++i)
            (*p.grad)[i] += (*o.grad)[off + i];
        off += p.numel();
      }
    });
  }
  return out;
}

// Column-wise concatenation of matrices with equal row counts.
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int rows = parts[0].ndim() == 2 ? parts[0].shape[0] : -1;
  int cols = 0;
  for (const Tensor& p : parts) {
    detail::require_matrix(p, "concat_cols");
    if (p.shape[0] != rows)
      throw ShapeError("concat_cols: row mismatch " + p.shape_str());
    cols += p.shape[1];
  }
  Tensor out = Tensor::zeros({rows, cols});
  int at = 0;
  for (const Tensor& p : parts) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < p.shape[1]; ++j) out.at(i, at + j) = p.at(i, j);
    at += p.shape[1];
  }
  bool tracked = detail::grad_mode_flag() &&
                 std::any_of(parts.begin(), parts.end(),
                             [](const Tensor& t) { return t.requires_grad; });
  if (tracked) {
    detail::attach(out, parts, [parts, rows](const Tensor& o) {
      int at = 0;
      for (const Tensor& p : parts) {
        if (p.requires_grad)
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < p.shape[1]; ++j)
              (*p.grad)[static_cast<std::size_t>(i) * p.shape[1] + j] +=
                  (*o.grad)[static_cast<std::size_t>(i) * o.shape[1] + at + j];
        at += p.shape[1];
      }
    });
  }
  return out;
}

// Stacks equal-length vectors as matrix rows.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  const int d = rows[0].ndim() == 1 ? rows[0].shape[0] : -1;
  for (const Tensor& r : rows) {
    detail::require_vector(r, "stack_rows");
    if (r.shape[0] != d)
      throw ShapeError("stack_rows: length mismatch " + r.shape_str());
  }
  const int k = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({k, d});
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) = rows[static_cast<std::size_t>(i)].at(static_cast<std::size_t>(j));
  bool tracked = detail::grad_mode_flag() &&
                 std::any_of(rows.begin(), rows.end(),
                             [](const Tensor& t) { return t.requires_grad; });
  if (tracked) {
    detail::attach(out, rows, [rows, k, d](const Tensor& o) {
      for (int i = 0; i < k; ++i) {
        const Tensor& r = rows[static_cast<std::size_t>(i)];
        if (!r.requires_grad) continue;
        for (int j = 0; j < d; ++j)
          (*r.grad)[j] += (*o.grad)[static_cast<std::size_t>(i) * d + j];
      }
    });
  }
  return out;
}

// Row gather: out[i] = m[idx[i]].
inline Tensor rows(const Tensor& m, const std::vector<int>& idx) {
  detail::require_matrix(m, "rows");
  if (idx.empty()) throw DomainError("rows: empty index list");
  const int r = m.shape[0], c = m.shape[1];
  for (int i : idx)
    if (i < 0 || i >= r)
      throw DomainError("rows: index " + std::to_string(i) + " outside [0," +
                        std::to_string(r) + ")");
  const int k = static_cast<int>(idx.size());
  Tensor out = Tensor::zeros({k, c});
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) = m.at(idx[static_cast<std::size_t>(i)], j);
  if (detail::track({&m})) {
    detail::attach(out, {m}, [m, idx, k, c](const Tensor& o) {
      if (!m.requires_grad) return;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < c; ++j)
          (*m.grad)[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * c + j] +=
              (*o.grad)[static_cast<std::size_t>(i) * c + j];
    });
  }
  return out;
}

// Single row of a matrix, as a vector.
inline Tensor row(const Tensor& m, int i) {
  detail::require_matrix(m, "row");
  if (i < 0 || i >= m.shape[0])
    throw DomainError("row: index " + std::to_string(i) + " outside [0," +
                      std::to_string(m.shape[0]) + ")");
  const int c = m.shape[1];
  Tensor out = Tensor::zeros({c});
  for (int j = 0; j < c; ++j) out.at(static_cast<std::size_t>(j)) = m.at(i, j);
  if (detail::track({&m})) {
    detail::attach(out, {m}, [m, i, c](const Tensor& o) {
      if (!m.requires_grad) return;
      for (int j = 0; j < c; ++j)
        (*m.grad)[static_cast<std::size_t>(i) * c + j] += (*o.grad)[j];
    });
  }
  return out;
}

// Mean of the selected rows, as a vector.
inline Tensor mean_rows(const Tensor& m, const std::vector<int>& idx) {
  if (idx.empty()) throw DomainError("mean_rows: empty index set");
  Tensor gathered = rows(m, idx);
  const int k = gathered.shape[0], c = gathered.shape[1];
  Tensor out = Tensor::zeros({c});
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < c; ++j) out.at(static_cast<std::size_t>(j)) += gathered.at(i, j);
  for (int j = 0; j < c; ++j) out.at(static_cast<std::size_t>(j)) /= k;
  if (detail::track({&gathered})) {
    detail::attach(out, {gathered}, [gathered, k, c](const Tensor& o) {
      if (!gathered.requires_grad) return;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < c; ++j)
          (*gathered.grad)[static_cast<std::size_t>(i) * c + j] += (*o.grad)[j] / k;
    });
  }
  return out;
}

// Contiguous row slice [r0, r1).
inline Tensor slice_rows(const Tensor& m, int r0, int r1) {
  detail::require_matrix(m, "slice_rows");
  if (r0 < 0 || r1 > m.shape[0] || r0 >= r1)
    throw ShapeError("slice_rows: bad range [" + std::to_string(r0) + "," +
                     std::to_string(r1) + ") for " + m.shape_str());
  const int c = m.shape[1];
  Tensor out = Tensor::zeros({r1 - r0, c});
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < c; ++j) out.at(i - r0, j) = m.at(i, j);
  if (detail::track({&m})) {
    detail::attach(out, {m}, [m, r0, r1, c](const Tensor& o) {
      if (!m.requires_grad) return;
      for (int i = r0; i < r1; ++i)
        for (int j = 0; j < c; ++j)
          (*m.grad)[static_cast<std::size_t>(i) * c + j] +=
              (*o.grad)[static_cast<std::size_t>(i - r0) * c + j];
    });
  }
  return out;
}

// One row repeated l times.
inline Tensor tile_row(const Tensor& v, int l) {
  detail::require_vector(v, "tile_row");
  if (l < 1) throw ShapeError("tile_row: need at least one row");
  const int d = v.shape[0];
  Tensor out = Tensor::zeros({l, d});
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < d; ++j) out.at(i, j) = v.at(static_cast<std::size_t>(j));
  if (detail::track({&v})) {
    detail::attach(out, {v}, [v, l, d](const Tensor& o) {
      if (!v.requires_grad) return;
      for (int i = 0; i < l; ++i)
        for (int j = 0; j < d; ++j)
          (*v.grad)[j] += (*o.grad)[static_cast<std::size_t>(i) * d + j];
    });
  }
  return out;
}

inline Tensor dot(const Tensor& u, const Tensor& v) {
  detail::require_vector(u, "dot");
  detail::require_vector(v, "dot");
  detail::require_same_shape(u, v, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < u.numel(); ++i) s += u.at(i) * v.at(i);
  Tensor out = Tensor::scalar(s);
  if (detail::track({&u, &v})) {
    detail::attach(out, {u, v}, [u, v](const Tensor& o) {
      const double g = (*o.grad)[0];
      for (std::size_t i = 0; i < u.numel(); ++i) {
        if (u.requires_grad) (*u.grad)[i] += g * v.at(i);
        if (v.requires_grad) (*v.grad)[i] += g * u.at(i);
      }
    });
  }
  return out;
}

// sum_i alpha[i] * g[i,:] for g (k,d), alpha (k).
inline Tensor weighted_sum_rows(const Tensor& g, const Tensor& alpha) {
  detail::require_matrix(g, "weighted_sum_rows");
  detail::require_vector(alpha, "weighted_sum_rows");
  if (g.shape[0] != alpha.shape[0])
    throw ShapeError("weighted_sum_rows: " + g.shape_str() + " vs " +
                     alpha.shape_str());
  const int k = g.shape[0], d = g.shape[1];
  Tensor out = Tensor::zeros({d});
  for (int i = 0; i < k; ++i) {
    const double a = alpha.at(static_cast<std::size_t>(i));
    for (int j = 0; j < d; ++j) out.at(static_cast<std::size_t>(j)) += a * g.at(i, j);
  }
  if (detail::track({&g, &alpha})) {
    detail::attach(out, {g, alpha}, [g, alpha, k, d](const Tensor& o) {
      const double* og = o.grad->data();
      for (int i = 0; i < k; ++i) {
        if (g.requires_grad) {
          const double a = alpha.at(static_cast<std::size_t>(i));
          for (int j = 0; j < d; ++j)
            (*g.grad)[static_cast<std::size_t>(i) * d + j] += a * og[j];
        }
        if (alpha.requires_grad) {
          double s = 0.0;
          for (int j = 0; j < d; ++j) s += g.at(i, j) * og[j];
          (*alpha.grad)[i] += s;
        }
      }
    });
  }
  return out;
}

// Elementwise sum of same-shaped tensors.
inline Tensor add_n(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("add_n: no inputs");
  Tensor out = Tensor::zeros(parts[0].shape);
  for (const Tensor& p : parts) {
    detail::require_same_shape(p, out, "add_n");
    for (std::size_t i = 0; i < p.numel(); ++i) out.at(i) += p.at(i);
  }
  bool tracked = detail::grad_mode_flag() &&
                 std::any_of(parts.begin(), parts.end(),
                             [](const Tensor& t) { return t.requires_grad; });
  if (tracked) {
    detail::attach(out, parts, [parts](const Tensor& o) {
      for (const Tensor& p : parts)
        if (p.requires_grad)
          for (std::size_t i = 0; i < p.numel(); ++i)
            (*p.grad)[i] += (*o.grad)[i];
    });
  }
  return out;
}

// Scalar pick out[0] = v[i].
inline Tensor pick(const Tensor& v, int i) {
  detail::require_vector(v, "pick");
  if (i < 0 || i >= v.shape[0])
    throw DomainError("pick: index " + std::to_string(i) + " outside [0," +
                      std::to_string(v.shape[0]) + ")");
  Tensor out = Tensor::scalar(v.at(static_cast<std::size_t>(i)));
  if (detail::track({&v})) {
    detail::attach(out, {v}, [v, i](const Tensor& o) {
      if (v.requires_grad) (*v.grad)[i] += (*o.grad)[0];
    });
  }
  return out;
}

// 1-D convolution over the rows of x (l,d) with m kernels spanning `window`
// consecutive rows. Kernel k occupies w[k, :] laid out window-major, i.e.
// w[k, j*d + c] multiplies x[i - window + 1 + j, c]; rows before the start of
// the sequence act as zeros, so output position i sees the window ending at i.
inline Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
                     int window) {
  detail::require_matrix(x, "conv1d");
  detail::require_matrix(w, "conv1d");
  detail::require_vector(b, "conv1d");
  if (window < 1) throw DomainError("conv1d: window must be positive");
  const int l = x.shape[0], d = x.shape[1], m = w.shape[0];
  if (w.shape[1] != window * d)
    throw ShapeError("conv1d: kernel width " + w.shape_str() +
                     " does not cover window*" + std::to_string(d));
  if (b.shape[0] != m)
    throw ShapeError("conv1d: bias " + b.shape_str() + " vs " +
                     std::to_string(m) + " kernels");
  Tensor out = Tensor::zeros({l, m});
  for (int i = 0; i < l; ++i)
    for (int k = 0; k < m; ++k) {
      double s = b.at(static_cast<std::size_t>(k));
      for (int j = 0; j < window; ++j) {
        const int t = i - window + 1 + j;
        if (t < 0 || t >= l) continue;
        for (int c = 0; c < d; ++c) s += w.at(k, j * d + c) * x.at(t, c);
      }
      out.at(i, k) = s;
    }
  if (detail::track({&x, &w, &b})) {
    detail::attach(out, {x, w, b}, [x, w, b, window, l, d, m](const Tensor& o) {
      const double* og = o.grad->data();
      for (int i = 0; i < l; ++i)
        for (int k = 0; k < m; ++k) {
          const double g = og[static_cast<std::size_t>(i) * m + k];
          if (g == 0.0) continue;
          if (b.requires_grad) (*b.grad)[k] += g;
          for (int j = 0; j < window; ++j) {
            const int t = i - window + 1 + j;
            if (t < 0 || t >= l) continue;
            for (int c = 0; c < d; ++c) {
              if (w.requires_grad)
                (*w.grad)[static_cast<std::size_t>(k) * w.shape[1] + j * d + c] +=
                    g * x.at(t, c);
              if (x.requires_grad)
                (*x.grad)[static_cast<std::size_t>(t) * d + c] +=
                    g * w.at(k, j * d + c);
            }
          }
        }
    });
  }
  return out;
}

// Piecewise max pooling of h (l,m) over the three segments delimited by the
// two entity positions: with lo = min(p1,p2) and hi = max(p1,p2) the segments
// are rows [0,lo), [lo,hi) and [hi,l). An empty segment (only the first or
// second can be empty) pools to 0. Output is kernel-major: out[k*3+s].
inline Tensor piecewise_max_pool(const Tensor& h, int p1, int p2) {
  detail::require_matrix(h, "piecewise_max_pool");
  const int l = h.shape[0], m = h.shape[1];
  if (p1 < 0 || p1 >= l || p2 < 0 || p2 >= l)
    throw DomainError("piecewise_max_pool: entity position outside [0," +
                      std::to_string(l) + ")");
  const int lo = std::min(p1, p2), hi = std::max(p1, p2);
  const int bounds[4] = {0, lo, hi, l};
  Tensor out = Tensor::zeros({3 * m});
  auto arg = std::make_shared<std::vector<int>>(static_cast<std::size_t>(3) * m, -1);
  for (int k = 0; k < m; ++k)
    for (int s = 0; s < 3; ++s) {
      const int r0 = bounds[s], r1 = bounds[s + 1];
      if (r0 >= r1) continue;  // empty segment pools to 0
      int best = r0;
      for (int i = r0 + 1; i < r1; ++i)
        if (h.at(i, k) > h.at(best, k)) best = i;
      out.at(static_cast<std::size_t>(k) * 3 + s) = h.at(best, k);
      (*arg)[static_cast<std::size_t>(k) * 3 + s] = best;
    }
  if (detail::track({&h})) {
    detail::attach(out, {h}, [h, arg, m](const Tensor& o) {
      if (!h.requires_grad) return;
      for (std::size_t i = 0; i < arg->size(); ++i) {
        const int r = (*arg)[i];
        if (r < 0) continue;
        (*h.grad)[static_cast<std::size_t>(r) * m + i / 3] += (*o.grad)[i];
      }
    });
  }
  return out;
}

// -log softmax(logits)[label], fused for stability: computed via the
// log-sum-exp with max subtraction, never through an explicit softmax.
inline Tensor cross_entropy_with_logits(const Tensor& logits, int label) {
  detail::require_vector(logits, "cross_entropy_with_logits");
  const int n = logits.shape[0];
  if (label < 0 || label >= n)
    throw DomainError("cross_entropy_with_logits: label " + std::to_string(label) +
                      " outside [0," + std::to_string(n) + ")");
  double mx = logits.at(std::size_t{0});
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits.at(static_cast<std::size_t>(i)));
  double z = 0.0;
  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    (*probs)[i] = std::exp(logits.at(static_cast<std::size_t>(i)) - mx);
    z += (*probs)[i];
  }
  for (int i = 0; i < n; ++i) (*probs)[i] /= z;
  const double loss = std::log(z) + mx - logits.at(static_cast<std::size_t>(label));
  Tensor out = Tensor::scalar(loss);
  if (detail::track({&logits})) {
    detail::attach(out, {logits}, [logits, probs, label, n](const Tensor& o) {
      if (!logits.requires_grad) return;
      const double g = (*o.grad)[0];
      for (int i = 0; i < n; ++i)
        (*logits.grad)[i] += g * ((*probs)[i] - (i == label ? 1.0 : 0.0));
    });
  }
  return out;
}

}  // namespace cgre
