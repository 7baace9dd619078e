// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "srf/threading.hpp"

namespace srf {

namespace {

size_t dim_product(const std::vector<int>& dims) {
  size_t n = 1;
  for (const int d : dims) n *= static_cast<size_t>(d);
  return n;
}

Var alloc_out(Tape& tape, std::vector<int> dims, bool track) {
  auto v = std::make_shared<VarData>();
  v->dims = std::move(dims);
  v->val.assign(dim_product(v->dims), 0.0);
  v->requires_grad = track && tape.recording;
  if (v->requires_grad) v->ensure_grad();
  return v;
}

void check_same_size(const Var& a, const Var& b, const char* op) {
  if (a->size() != b->size()) throw std::invalid_argument(std::string(op) + ": size mismatch");
}

double stable_logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var make_leaf(std::vector<int> dims, std::vector<double> values, bool requires_grad) {
  auto v = std::make_shared<VarData>();
  if (dim_product(dims) != values.size())
    throw std::invalid_argument("make_leaf: dims/value size mismatch");
  v->dims = std::move(dims);
  v->val = std::move(values);
  v->requires_grad = requires_grad;
  if (requires_grad) v->ensure_grad();
  return v;
}

Var make_param(std::vector<int> dims, std::vector<double> values) {
  return make_leaf(std::move(dims), std::move(values), true);
}

Var clone_var(const Var& v) {
  auto c = std::make_shared<VarData>(*v);
  c->zero_grad();
  return c;
}

void Tape::backward(const Var& root) {
  if (root->size() != 1) throw std::invalid_argument("backward: root must be a scalar");
  if (!root->requires_grad) return;  // constant graph, nothing to do
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = backward_ops_.rbegin(); it != backward_ops_.rend(); ++it) (*it)();
}

Var constant(Tape& tape, std::vector<int> dims, std::vector<double> values) {
  (void)tape;
  return make_leaf(std::move(dims), std::move(values), false);
}

Var constant_scalar(Tape& tape, double v) { return constant(tape, {1}, {v}); }

// ---- elementwise ----

Var add(Tape& tape, const Var& a, const Var& b) {
  check_same_size(a, b, "add");
  const bool tr = tape.track({&a, &b});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] + b->val[i];
  if (tr)
    tape.record([a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i];
      }
    });
  return out;
}

Var sub(Tape& tape, const Var& a, const Var& b) {
  check_same_size(a, b, "sub");
  const bool tr = tape.track({&a, &b});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] - b->val[i];
  if (tr)
    tape.record([a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->size(); ++i) b->grad[i] -= out->grad[i];
      }
    });
  return out;
}

Var mul(Tape& tape, const Var& a, const Var& b) {
  check_same_size(a, b, "mul");
  const bool tr = tape.track({&a, &b});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] * b->val[i];
  if (tr)
    tape.record([a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * b->val[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i] * a->val[i];
      }
    });
  return out;
}

Var div(Tape& tape, const Var& a, const Var& b) {
  check_same_size(a, b, "div");
  const bool tr = tape.track({&a, &b});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] / b->val[i];
  if (tr)
    tape.record([a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] / b->val[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->size(); ++i)
          b->grad[i] -= out->grad[i] * out->val[i] / b->val[i];
      }
    });
  return out;
}

Var scale(Tape& tape, const Var& a, double s) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] * s;
  if (tr)
    tape.record([a, out, s] {
      a->ensure_grad();
      for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * s;
    });
  return out;
}

Var add_scalar(Tape& tape, const Var& a, double s) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] + s;
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
    });
  return out;
}

Var relu(Tape& tape, const Var& a) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = a->val[i] > 0.0 ? a->val[i] : 0.0;
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      for (size_t i = 0; i < a->size(); ++i)
        if (a->val[i] > 0.0) a->grad[i] += out->grad[i];
    });
  return out;
}

Var logistic(Tape& tape, const Var& a) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = stable_logistic(a->val[i]);
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      for (size_t i = 0; i < a->size(); ++i) {
        const double y = out->val[i];
        a->grad[i] += out->grad[i] * y * (1.0 - y);
      }
    });
  return out;
}

Var softplus(Tape& tape, const Var& a) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) {
    const double x = a->val[i];
    out->val[i] = x > 30.0 ? x : std::log1p(std::exp(x));
  }
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * stable_logistic(a->val[i]);
    });
  return out;
}

Var sin_ew(Tape& tape, const Var& a) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = std::sin(a->val[i]);
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * std::cos(a->val[i]);
    });
  return out;
}

Var cos_ew(Tape& tape, const Var& a) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = std::cos(a->val[i]);
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      for (size_t i = 0; i < a->size(); ++i) a->grad[i] -= out->grad[i] * std::sin(a->val[i]);
    });
  return out;
}

Var sqrt_ew(Tape& tape, const Var& a) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, a->dims, tr);
  for (size_t i = 0; i < a->size(); ++i) out->val[i] = std::sqrt(a->val[i]);
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * 0.5 / out->val[i];
    });
  return out;
}

Var sum(Tape& tape, const Var& a) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, {1}, tr);
  double s = 0.0;
  for (const double v : a->val) s += v;
  out->val[0] = s;
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      const double g = out->grad[0];
      for (size_t i = 0; i < a->size(); ++i) a->grad[i] += g;
    });
  return out;
}

Var mean(Tape& tape, const Var& a) {
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(a->size()));
}

Var sum_sq(Tape& tape, const Var& a) {
  const bool tr = tape.track({&a});
  Var out = alloc_out(tape, {1}, tr);
  double s = 0.0;
  for (const double v : a->val) s += v * v;
  out->val[0] = s;
  if (tr)
    tape.record([a, out] {
      a->ensure_grad();
      const double g = out->grad[0];
      for (size_t i = 0; i < a->size(); ++i) a->grad[i] += 2.0 * a->val[i] * g;
    });
  return out;
}

// ---- structural ----

Var slice_scalar(Tape& tape, const Var& x, int index) {
  if (index < 0 || static_cast<size_t>(index) >= x->size())
    throw std::invalid_argument("slice_scalar: index out of range");
  const bool tr = tape.track({&x});
  Var out = alloc_out(tape, {1}, tr);
  out->val[0] = x->val[index];
  if (tr)
    tape.record([x, out, index] {
      x->ensure_grad();
      x->grad[index] += out->grad[0];
    });
  return out;
}

Var pack_scalars(Tape& tape, const std::vector<Var>& scalars) {
  bool tr = false;
  for (const auto& s : scalars) {
    if (s->size() != 1) throw std::invalid_argument("pack_scalars: inputs must be scalars");
    tr = tr || (tape.recording && s->requires_grad);
  }
  Var out = alloc_out(tape, {static_cast<int>(scalars.size())}, tr);
  for (size_t i = 0; i < scalars.size(); ++i) out->val[i] = scalars[i]->val[0];
  if (tr)
    tape.record([scalars, out] {
      for (size_t i = 0; i < scalars.size(); ++i)
        if (scalars[i]->requires_grad) {
          scalars[i]->ensure_grad();
          scalars[i]->grad[0] += out->grad[i];
        }
    });
  return out;
}

Var concat_cols(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int n = parts[0]->rows();
  int total = 0;
  bool tr = false;
  for (const auto& p : parts) {
    if (p->rows() != n) throw std::invalid_argument("concat_cols: row mismatch");
    total += p->cols();
    tr = tr || (tape.recording && p->requires_grad);
  }
  Var out = alloc_out(tape, {n, total}, tr);
  int col = 0;
  for (const auto& p : parts) {
    const int k = p->cols();
    for (int i = 0; i < n; ++i)
      std::copy_n(&p->val[(size_t)i * k], k, &out->val[(size_t)i * total + col]);
    col += k;
  }
  if (tr)
    tape.record([parts, out, n, total] {
      int col = 0;
      for (const auto& p : parts) {
        const int k = p->cols();
        if (p->requires_grad) {
          p->ensure_grad();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j)
              p->grad[(size_t)i * k + j] += out->grad[(size_t)i * total + col + j];
        }
        col += k;
      }
    });
  return out;
}

Var broadcast_rows(Tape& tape, const Var& v, int n) {
  const int k = static_cast<int>(v->size());
  const bool tr = tape.track({&v});
  Var out = alloc_out(tape, {n, k}, tr);
  for (int i = 0; i < n; ++i) std::copy_n(v->val.data(), k, &out->val[(size_t)i * k]);
  if (tr)
    tape.record([v, out, n, k] {
      v->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) v->grad[j] += out->grad[(size_t)i * k + j];
    });
  return out;
}

Var gather_rows(Tape& tape, const Var& x, std::vector<int> idx) {
  const int k = x->cols();
  const int n = static_cast<int>(idx.size());
  const bool tr = tape.track({&x});
  Var out = alloc_out(tape, {n, k}, tr);
  for (int i = 0; i < n; ++i)
    std::copy_n(&x->val[(size_t)idx[i] * k], k, &out->val[(size_t)i * k]);
  if (tr)
    tape.record([x, out, idx = std::move(idx), n, k] {
      x->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) x->grad[(size_t)idx[i] * k + j] += out->grad[(size_t)i * k + j];
    });
  return out;
}

Var scale_rows(Tape& tape, const Var& x, std::vector<double> s) {
  const int n = x->rows();
  const int k = x->cols();
  if (static_cast<int>(s.size()) != n) throw std::invalid_argument("scale_rows: size mismatch");
  const bool tr = tape.track({&x});
  Var out = alloc_out(tape, x->dims, tr);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) out->val[(size_t)i * k + j] = x->val[(size_t)i * k + j] * s[i];
  if (tr)
    tape.record([x, out, s = std::move(s), n, k] {
      x->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) x->grad[(size_t)i * k + j] += out->grad[(size_t)i * k + j] * s[i];
    });
  return out;
}

Var scale_by(Tape& tape, const Var& x, const Var& s) {
  if (s->size() != 1) throw std::invalid_argument("scale_by: scale must be scalar");
  const bool tr = tape.track({&x, &s});
  Var out = alloc_out(tape, x->dims, tr);
  const double sv = s->val[0];
  for (size_t i = 0; i < x->size(); ++i) out->val[i] = x->val[i] * sv;
  if (tr)
    tape.record([x, s, out] {
      if (x->requires_grad) {
        x->ensure_grad();
        for (size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i] * s->val[0];
      }
      if (s->requires_grad) {
        s->ensure_grad();
        double g = 0.0;
        for (size_t i = 0; i < x->size(); ++i) g += out->grad[i] * x->val[i];
        s->grad[0] += g;
      }
    });
  return out;
}

Var reshape(Tape& tape, const Var& x, std::vector<int> dims) {
  if (dim_product(dims) != x->size()) throw std::invalid_argument("reshape: size mismatch");
  const bool tr = tape.track({&x});
  Var out = alloc_out(tape, std::move(dims), tr);
  out->val = x->val;
  if (tr)
    tape.record([x, out] {
      x->ensure_grad();
      for (size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
    });
  return out;
}

// ---- dense layers ----

Var linear(Tape& tape, const Var& x, const Var& w, const Var& b) {
  if (x->dims.size() != 2 || w->dims.size() != 2)
    throw std::invalid_argument("linear: expects 2-d inputs");
  const int n = x->dims[0];
  const int in = x->dims[1];
  const int out_n = w->dims[0];
  if (w->dims[1] != in || static_cast<int>(b->size()) != out_n)
    throw std::invalid_argument("linear: shape mismatch");

  const bool tr = tape.track({&x, &w, &b});
  Var out = alloc_out(tape, {n, out_n}, tr);
  parallel_for(n, [&](size_t r0, size_t r1) {
    for (size_t i = r0; i < r1; ++i) {
      const double* xi = &x->val[i * in];
      double* yi = &out->val[i * out_n];
      for (int o = 0; o < out_n; ++o) {
        const double* wo = &w->val[(size_t)o * in];
        double s = b->val[o];
        for (int k = 0; k < in; ++k) s += xi[k] * wo[k];
        yi[o] = s;
      }
    }
  });
  if (tr)
    tape.record([x, w, b, out, n, in, out_n] {
      if (x->requires_grad) {
        x->ensure_grad();
        parallel_for(n, [&](size_t r0, size_t r1) {
          for (size_t i = r0; i < r1; ++i) {
            const double* gy = &out->grad[i * out_n];
            double* gx = &x->grad[i * in];
            for (int o = 0; o < out_n; ++o) {
              const double g = gy[o];
              if (g == 0.0) continue;
              const double* wo = &w->val[(size_t)o * in];
              for (int k = 0; k < in; ++k) gx[k] += g * wo[k];
            }
          }
        });
      }
      if (w->requires_grad) {
        w->ensure_grad();
        for (int i = 0; i < n; ++i) {
          const double* gy = &out->grad[(size_t)i * out_n];
          const double* xi = &x->val[(size_t)i * in];
          for (int o = 0; o < out_n; ++o) {
            const double g = gy[o];
            if (g == 0.0) continue;
            double* gw = &w->grad[(size_t)o * in];
            for (int k = 0; k < in; ++k) gw[k] += g * xi[k];
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int o = 0; o < out_n; ++o) b->grad[o] += out->grad[(size_t)i * out_n + o];
      }
    });
  return out;
}

Var conv3d(Tape& tape, const Var& x, const Var& w, const Var& b) {
  if (x->dims.size() != 4 || w->dims.size() != 5)
    throw std::invalid_argument("conv3d: expects {ci,D,H,W} input and {co,ci,3,3,3} weights");
  const int ci = x->dims[0], D = x->dims[1], H = x->dims[2], W = x->dims[3];
  const int co = w->dims[0];
  if (w->dims[1] != ci || w->dims[2] != 3 || w->dims[3] != 3 || w->dims[4] != 3 ||
      static_cast<int>(b->size()) != co)
    throw std::invalid_argument("conv3d: shape mismatch");

  const size_t plane = (size_t)H * W;
  const size_t vol = (size_t)D * plane;
  auto xat = [&](int c, int z, int y, int xx) -> double {
    if (z < 0 || z >= D || y < 0 || y >= H || xx < 0 || xx >= W) return 0.0;
    return x->val[(size_t)c * vol + (size_t)z * plane + (size_t)y * W + xx];
  };

  const bool tr = tape.track({&x, &w, &b});
  Var out = alloc_out(tape, {co, D, H, W}, tr);
  parallel_for((size_t)co * D, [&](size_t i0, size_t i1) {
    for (size_t i = i0; i < i1; ++i) {
      const int o = static_cast<int>(i / D);
      const int z = static_cast<int>(i % D);
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          double s = b->val[o];
          for (int c = 0; c < ci; ++c) {
            const double* wk = &w->val[(((size_t)o * ci + c) * 27)];
            int t = 0;
            for (int dz = -1; dz <= 1; ++dz)
              for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx, ++t) s += wk[t] * xat(c, z + dz, y + dy, xx + dx);
          }
          out->val[(size_t)o * vol + (size_t)z * plane + (size_t)y * W + xx] = s;
        }
    }
  });
  if (tr)
    tape.record([x, w, b, out, ci, co, D, H, W, plane, vol] {
      const bool gx = x->requires_grad;
      const bool gw = w->requires_grad;
      const bool gb = b->requires_grad;
      if (gx) x->ensure_grad();
      if (gw) w->ensure_grad();
      if (gb) b->ensure_grad();
      for (int o = 0; o < co; ++o)
        for (int z = 0; z < D; ++z)
          for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
              const double g = out->grad[(size_t)o * vol + (size_t)z * plane + (size_t)y * W + xx];
              if (g == 0.0) continue;
              if (gb) b->grad[o] += g;
              for (int c = 0; c < ci; ++c) {
                const size_t wbase = ((size_t)o * ci + c) * 27;
                int t = 0;
                for (int dz = -1; dz <= 1; ++dz) {
                  const int sz = z + dz;
                  if (sz < 0 || sz >= D) {
                    t += 9;
                    continue;
                  }
                  for (int dy = -1; dy <= 1; ++dy) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= H) {
                      t += 3;
                      continue;
                    }
                    for (int dx = -1; dx <= 1; ++dx, ++t) {
                      const int sx = xx + dx;
                      if (sx < 0 || sx >= W) continue;
                      const size_t xi = (size_t)c * vol + (size_t)sz * plane + (size_t)sy * W + sx;
                      if (gw) w->grad[wbase + t] += g * x->val[xi];
                      if (gx) x->grad[xi] += g * w->val[wbase + t];
                    }
                  }
                }
              }
            }
    });
  return out;
}

Var conv1x1(Tape& tape, const Var& x, const Var& w, const Var& b) {
  if (x->dims.size() != 4 || w->dims.size() != 2)
    throw std::invalid_argument("conv1x1: expects {ci,D,H,W} input and {co,ci} weights");
  const int ci = x->dims[0];
  const int co = w->dims[0];
  if (w->dims[1] != ci || static_cast<int>(b->size()) != co)
    throw std::invalid_argument("conv1x1: shape mismatch");
  const size_t vol = x->size() / ci;

  const bool tr = tape.track({&x, &w, &b});
  Var out = alloc_out(tape, {co, x->dims[1], x->dims[2], x->dims[3]}, tr);
  for (int o = 0; o < co; ++o)
    for (size_t i = 0; i < vol; ++i) {
      double s = b->val[o];
      for (int c = 0; c < ci; ++c) s += w->val[(size_t)o * ci + c] * x->val[c * vol + i];
      out->val[o * vol + i] = s;
    }
  if (tr)
    tape.record([x, w, b, out, ci, co, vol] {
      for (int o = 0; o < co; ++o)
        for (size_t i = 0; i < vol; ++i) {
          const double g = out->grad[o * vol + i];
          if (g == 0.0) continue;
          if (b->requires_grad) {
            b->ensure_grad();
            b->grad[o] += g;
          }
          for (int c = 0; c < ci; ++c) {
            if (w->requires_grad) {
              w->ensure_grad();
              w->grad[(size_t)o * ci + c] += g * x->val[c * vol + i];
            }
            if (x->requires_grad) {
              x->ensure_grad();
              x->grad[c * vol + i] += g * w->val[(size_t)o * ci + c];
            }
          }
        }
    });
  return out;
}

Var upsample_nearest2(Tape& tape, const Var& x) {
  if (x->dims.size() != 4) throw std::invalid_argument("upsample_nearest2: expects {c,D,H,W}");
  const int c = x->dims[0], D = x->dims[1], H = x->dims[2], W = x->dims[3];
  const int D2 = 2 * D, H2 = 2 * H, W2 = 2 * W;
  const bool tr = tape.track({&x});
  Var out = alloc_out(tape, {c, D2, H2, W2}, tr);
  auto src = [&](int ch, int z, int y, int xx) {
    return x->val[(((size_t)ch * D + z) * H + y) * W + xx];
  };
  for (int ch = 0; ch < c; ++ch)
    for (int z = 0; z < D2; ++z)
      for (int y = 0; y < H2; ++y)
        for (int xx = 0; xx < W2; ++xx)
          out->val[(((size_t)ch * D2 + z) * H2 + y) * W2 + xx] = src(ch, z / 2, y / 2, xx / 2);
  if (tr)
    tape.record([x, out, c, D, H, W, D2, H2, W2] {
      x->ensure_grad();
      for (int ch = 0; ch < c; ++ch)
        for (int z = 0; z < D2; ++z)
          for (int y = 0; y < H2; ++y)
            for (int xx = 0; xx < W2; ++xx)
              x->grad[(((size_t)ch * D + z / 2) * H + y / 2) * W + xx / 2] +=
                  out->grad[(((size_t)ch * D2 + z) * H2 + y) * W2 + xx];
    });
  return out;
}

// ---- small matrix / geometry ----

Var mat3_mul(Tape& tape, const Var& a, const Var& b) {
  if (a->size() != 9 || b->size() != 9) throw std::invalid_argument("mat3_mul: expects [9]");
  const bool tr = tape.track({&a, &b});
  Var out = alloc_out(tape, {9}, tr);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a->val[i * 3 + k] * b->val[k * 3 + j];
      out->val[i * 3 + j] = s;
    }
  if (tr)
    tape.record([a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < 3; ++i)
          for (int k = 0; k < 3; ++k) {
            double s = 0.0;
            for (int j = 0; j < 3; ++j) s += out->grad[i * 3 + j] * b->val[k * 3 + j];
            a->grad[i * 3 + k] += s;
          }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int k = 0; k < 3; ++k)
          for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int i = 0; i < 3; ++i) s += a->val[i * 3 + k] * out->grad[i * 3 + j];
            b->grad[k * 3 + j] += s;
          }
      }
    });
  return out;
}

Var rows_mat3(Tape& tape, const Var& x, const Var& a, bool transpose_a) {
  if (x->cols() != 3 || a->size() != 9)
    throw std::invalid_argument("rows_mat3: expects [n,3] and [9]");
  const int n = x->rows();
  const bool tr = tape.track({&x, &a});
  Var out = alloc_out(tape, {n, 3}, tr);
  auto m = [&](int r, int c) { return transpose_a ? a->val[c * 3 + r] : a->val[r * 3 + c]; };
  for (int i = 0; i < n; ++i) {
    const double* xi = &x->val[(size_t)i * 3];
    double* yi = &out->val[(size_t)i * 3];
    for (int r = 0; r < 3; ++r) yi[r] = m(r, 0) * xi[0] + m(r, 1) * xi[1] + m(r, 2) * xi[2];
  }
  if (tr)
    tape.record([x, a, out, n, transpose_a] {
      auto m = [&](int r, int c) { return transpose_a ? a->val[c * 3 + r] : a->val[r * 3 + c]; };
      if (x->requires_grad) {
        x->ensure_grad();
        for (int i = 0; i < n; ++i) {
          const double* g = &out->grad[(size_t)i * 3];
          double* gx = &x->grad[(size_t)i * 3];
          for (int c = 0; c < 3; ++c) gx[c] += m(0, c) * g[0] + m(1, c) * g[1] + m(2, c) * g[2];
        }
      }
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < n; ++i) {
          const double* g = &out->grad[(size_t)i * 3];
          const double* xi = &x->val[(size_t)i * 3];
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
              const double contrib = g[r] * xi[c];
              if (transpose_a)
                a->grad[c * 3 + r] += contrib;
              else
                a->grad[r * 3 + c] += contrib;
            }
        }
      }
    });
  return out;
}

Var normalize_rows(Tape& tape, const Var& x) {
  if (x->cols() != 3) throw std::invalid_argument("normalize_rows: expects [n,3]");
  const int n = x->rows();
  const bool tr = tape.track({&x});
  Var out = alloc_out(tape, {n, 3}, tr);
  for (int i = 0; i < n; ++i) {
    const double* xi = &x->val[(size_t)i * 3];
    const double norm = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
    for (int c = 0; c < 3; ++c) out->val[(size_t)i * 3 + c] = xi[c] / norm;
  }
  if (tr)
    tape.record([x, out, n] {
      x->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const double* xi = &x->val[(size_t)i * 3];
        const double* yi = &out->val[(size_t)i * 3];
        const double* g = &out->grad[(size_t)i * 3];
        const double norm = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        const double gy = g[0] * yi[0] + g[1] * yi[1] + g[2] * yi[2];
        for (int c = 0; c < 3; ++c) x->grad[(size_t)i * 3 + c] += (g[c] - gy * yi[c]) / norm;
      }
    });
  return out;
}

Var posenc(Tape& tape, const Var& pts, int frequencies) {
  if (pts->cols() != 3) throw std::invalid_argument("posenc: expects [n,3]");
  if (frequencies < 1) throw std::invalid_argument("posenc: frequencies must be >= 1");
  const int n = pts->rows();
  const int L = frequencies;
  const int width = 3 + 6 * L;
  const bool tr = tape.track({&pts});
  Var out = alloc_out(tape, {n, width}, tr);
  parallel_for(n, [&](size_t r0, size_t r1) {
    for (size_t i = r0; i < r1; ++i) {
      const double* p = &pts->val[i * 3];
      double* o = &out->val[i * width];
      o[0] = p[0];
      o[1] = p[1];
      o[2] = p[2];
      double freq = M_PI;
      int c = 3;
      for (int l = 0; l < L; ++l) {
        for (int a = 0; a < 3; ++a) o[c + a] = std::sin(freq * p[a]);
        for (int a = 0; a < 3; ++a) o[c + 3 + a] = std::cos(freq * p[a]);
        c += 6;
        freq *= 2.0;
      }
    }
  });
  if (tr)
    tape.record([pts, out, n, L, width] {
      pts->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const double* p = &pts->val[(size_t)i * 3];
        const double* g = &out->grad[(size_t)i * width];
        double* gp = &pts->grad[(size_t)i * 3];
        for (int a = 0; a < 3; ++a) gp[a] += g[a];
        double freq = M_PI;
        int c = 3;
        for (int l = 0; l < L; ++l) {
          for (int a = 0; a < 3; ++a) {
            gp[a] += g[c + a] * freq * std::cos(freq * p[a]);
            gp[a] -= g[c + 3 + a] * freq * std::sin(freq * p[a]);
          }
          c += 6;
          freq *= 2.0;
        }
      }
    });
  return out;
}

// ---- scaffold ----

Var trilinear(Tape& tape, const Var& grid, const GridMeta& meta, const Var& pts) {
  if (pts->cols() != 3) throw std::invalid_argument("trilinear: expects [n,3] points");
  if (grid->size() != (size_t)meta.nx * meta.ny * meta.nz)
    throw std::invalid_argument("trilinear: grid size mismatch");
  const int n = pts->rows();
  const bool tr = tape.track({&grid, &pts});
  Var out = alloc_out(tape, {n}, tr);
  for (int i = 0; i < n; ++i) {
    const Vec3 p{pts->val[(size_t)i * 3], pts->val[(size_t)i * 3 + 1], pts->val[(size_t)i * 3 + 2]};
    const TrilinearStencil st = trilinear_stencil(meta.nx, meta.ny, meta.nz, meta.bounds, p);
    double v = 0.0;
    if (st.inside)
      for (int k = 0; k < 8; ++k)
        if (st.corner[k] >= 0) v += st.weight[k] * grid->val[st.corner[k]];
    out->val[i] = v;
  }
  if (tr)
    tape.record([grid, pts, out, meta, n] {
      const bool gg = grid->requires_grad;
      const bool gp = pts->requires_grad;
      if (gg) grid->ensure_grad();
      if (gp) pts->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const double g = out->grad[i];
        if (g == 0.0) continue;
        const Vec3 p{pts->val[(size_t)i * 3], pts->val[(size_t)i * 3 + 1],
                     pts->val[(size_t)i * 3 + 2]};
        const TrilinearStencil st = trilinear_stencil(meta.nx, meta.ny, meta.nz, meta.bounds, p);
        if (!st.inside) continue;
        if (gg)
          for (int k = 0; k < 8; ++k)
            if (st.corner[k] >= 0) grid->grad[st.corner[k]] += g * st.weight[k];
        if (gp) {
          // d v / d p_axis = (1/h) * sum_corners sign(axis bit) * (other-axis weights) * value
          double dv[3] = {0.0, 0.0, 0.0};
          int k = 0;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx, ++k) {
                if (st.corner[k] < 0) continue;
                const double v = grid->val[st.corner[k]];
                dv[0] += (dx ? 1.0 : -1.0) * st.axis_weight[1][dy] * st.axis_weight[2][dz] * v;
                dv[1] += (dy ? 1.0 : -1.0) * st.axis_weight[0][dx] * st.axis_weight[2][dz] * v;
                dv[2] += (dz ? 1.0 : -1.0) * st.axis_weight[0][dx] * st.axis_weight[1][dy] * v;
              }
          pts->grad[(size_t)i * 3 + 0] += g * dv[0] * st.inv_cell.x;
          pts->grad[(size_t)i * 3 + 1] += g * dv[1] * st.inv_cell.y;
          pts->grad[(size_t)i * 3 + 2] += g * dv[2] * st.inv_cell.z;
        }
      }
    });
  return out;
}

Var mirror_x(Tape& tape, const Var& grid, const GridMeta& meta) {
  if (grid->size() != (size_t)meta.nx * meta.ny * meta.nz)
    throw std::invalid_argument("mirror_x: grid size mismatch");
  const bool tr = tape.track({&grid});
  Var out = alloc_out(tape, grid->dims, tr);
  const int nx = meta.nx, ny = meta.ny, nz = meta.nz;
  auto flat = [&](int x, int y, int z) { return (size_t)x + (size_t)nx * (y + (size_t)ny * z); };
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) out->val[flat(x, y, z)] = grid->val[flat(nx - 1 - x, y, z)];
  if (tr)
    tape.record([grid, out, nx, ny, nz] {
      grid->ensure_grad();
      auto flat = [nx, ny](int x, int y, int z) {
        return (size_t)x + (size_t)nx * (y + (size_t)ny * z);
      };
      for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
          for (int x = 0; x < nx; ++x)
            grid->grad[flat(nx - 1 - x, y, z)] += out->grad[flat(x, y, z)];
    });
  return out;
}

Var bce_grid(Tape& tape, const Var& pred, const std::vector<double>& target, double gamma) {
  if (pred->size() != target.size()) throw std::invalid_argument("bce_grid: size mismatch");
  constexpr double kEps = 1e-7;
  const double inv_n = 1.0 / static_cast<double>(pred->size());
  const bool tr = tape.track({&pred});
  Var out = alloc_out(tape, {1}, tr);
  double s = 0.0;
  for (size_t i = 0; i < pred->size(); ++i) {
    const double p = std::clamp(pred->val[i], kEps, 1.0 - kEps);
    const double t = target[i];
    s += gamma * t * std::log(p) + (1.0 - gamma) * (1.0 - t) * std::log(1.0 - p);
  }
  out->val[0] = -s * inv_n;
  if (tr)
    tape.record([pred, out, target, gamma, inv_n] {
      pred->ensure_grad();
      const double g = out->grad[0];
      for (size_t i = 0; i < pred->size(); ++i) {
        const double p = pred->val[i];
        if (p <= kEps || p >= 1.0 - kEps) continue;  // clamp saturated
        const double t = target[i];
        pred->grad[i] -= g * inv_n * (gamma * t / p - (1.0 - gamma) * (1.0 - t) / (1.0 - p));
      }
    });
  return out;
}

// ---- per-ray compositing ----

CompositeVars composite_rays(Tape& tape, const Var& sigma, const Var& rgb, const RaySegments& seg,
                             const Rgb& background) {
  const int R = seg.n_rays;
  if (static_cast<int>(seg.offset.size()) != R + 1)
    throw std::invalid_argument("composite_rays: bad offsets");
  if (sigma->size() != seg.delta.size() || rgb->size() != 3 * sigma->size())
    throw std::invalid_argument("composite_rays: size mismatch");

  const bool tr = tape.track({&sigma, &rgb});
  Var color = alloc_out(tape, {R, 3}, tr);
  Var acc = alloc_out(tape, {R}, tr);
  parallel_for(R, [&](size_t r0, size_t r1) {
    for (size_t r = r0; r < r1; ++r) {
      double T = 1.0;
      double C[3] = {0.0, 0.0, 0.0};
      double A = 0.0;
      for (int k = seg.offset[r]; k < seg.offset[r + 1]; ++k) {
        const double u = sigma->val[k] * seg.delta[k];
        const double a = -std::expm1(-u);
        const double wk = T * a;
        for (int c = 0; c < 3; ++c) C[c] += wk * rgb->val[(size_t)k * 3 + c];
        A += wk;
        T *= std::exp(-u);
      }
      color->val[r * 3 + 0] = C[0] + (1.0 - A) * background.x;
      color->val[r * 3 + 1] = C[1] + (1.0 - A) * background.y;
      color->val[r * 3 + 2] = C[2] + (1.0 - A) * background.z;
      acc->val[r] = A;
    }
  });
  if (tr)
    tape.record([sigma, rgb, color, acc, seg, background, R] {
      const bool gs = sigma->requires_grad;
      const bool gr = rgb->requires_grad;
      if (gs) sigma->ensure_grad();
      if (gr) rgb->ensure_grad();
      parallel_for(R, [&](size_t r0, size_t r1) {
        std::vector<double> T_at;  // transmittance entering each sample
        for (size_t r = r0; r < r1; ++r) {
          const int k0 = seg.offset[r], k1 = seg.offset[r + 1];
          const double gC[3] = {color->grad[r * 3], color->grad[r * 3 + 1],
                                color->grad[r * 3 + 2]};
          const double gA = acc->grad[r];
          T_at.assign(k1 - k0, 1.0);
          double T = 1.0;
          for (int k = k0; k < k1; ++k) {
            T_at[k - k0] = T;
            T *= std::exp(-sigma->val[k] * seg.delta[k]);
          }
          // h_k = gC.(c_k - bg) + gA; dL/dsigma_k = delta_k (h_k T_k e^{-u_k} - S_k)
          double S = 0.0;
          for (int k = k1 - 1; k >= k0; --k) {
            const double u = sigma->val[k] * seg.delta[k];
            const double eu = std::exp(-u);
            const double Tk = T_at[k - k0];
            const double wk = Tk * (-std::expm1(-u));
            const double h = gC[0] * (rgb->val[(size_t)k * 3] - background.x) +
                             gC[1] * (rgb->val[(size_t)k * 3 + 1] - background.y) +
                             gC[2] * (rgb->val[(size_t)k * 3 + 2] - background.z) + gA;
            if (gs) sigma->grad[k] += seg.delta[k] * (h * Tk * eu - S);
            if (gr)
              for (int c = 0; c < 3; ++c) rgb->grad[(size_t)k * 3 + c] += wk * gC[c];
            S += h * wk;
          }
        }
      });
    });
  return {color, acc};
}

Var silhouette_rays(Tape& tape, const Var& alpha, const RaySegments& seg) {
  const int R = seg.n_rays;
  if (static_cast<int>(seg.offset.size()) != R + 1)
    throw std::invalid_argument("silhouette_rays: bad offsets");
  const bool tr = tape.track({&alpha});
  Var acc = alloc_out(tape, {R}, tr);
  parallel_for(R, [&](size_t r0, size_t r1) {
    for (size_t r = r0; r < r1; ++r) {
      double prod = 1.0;
      for (int k = seg.offset[r]; k < seg.offset[r + 1]; ++k) prod *= 1.0 - alpha->val[k];
      acc->val[r] = 1.0 - prod;
    }
  });
  if (tr)
    tape.record([alpha, acc, seg, R] {
      alpha->ensure_grad();
      parallel_for(R, [&](size_t r0, size_t r1) {
        std::vector<double> prefix;
        for (size_t r = r0; r < r1; ++r) {
          const int k0 = seg.offset[r], k1 = seg.offset[r + 1];
          const double g = acc->grad[r];
          if (g == 0.0 || k1 == k0) continue;
          prefix.assign(k1 - k0 + 1, 1.0);
          for (int k = k0; k < k1; ++k)
            prefix[k - k0 + 1] = prefix[k - k0] * (1.0 - alpha->val[k]);
          double suffix = 1.0;
          for (int k = k1 - 1; k >= k0; --k) {
            alpha->grad[k] += g * prefix[k - k0] * suffix;
            suffix *= 1.0 - alpha->val[k];
          }
        }
      });
    });
  return acc;
}

}  // namespace srf
