#include "ptts/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace ptts::ad {

namespace {

// Maps every output element of a broadcast binary op to its operand elements.
struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_index;  // empty: identity
  std::vector<std::size_t> b_index;
};

std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t n = numel(out);
  std::vector<std::size_t> idx(n);
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t d = in.size(); d-- > 0;) {
    in_stride[d + offset] = in[d] == 1 ? 0 : s;
    s *= in[d];
  }
  std::vector<std::size_t> counter(rank, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = 0;
    for (std::size_t d = 0; d < rank; ++d) j += counter[d] * in_stride[d];
    idx[i] = j;
    for (std::size_t d = rank; d-- > 0;) {
      if (++counter[d] < out[d]) break;
      counter[d] = 0;
    }
  }
  return idx;
}

BroadcastPlan plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  BroadcastPlan plan;
  const std::size_t rank = std::max(a.size(), b.size());
  plan.out.assign(rank, 1);
  for (std::size_t d = 0; d < rank; ++d) {
    const std::size_t da = d + a.size() >= rank ? a[d + a.size() - rank] : 1;
    const std::size_t db = d + b.size() >= rank ? b[d + b.size() - rank] : 1;
    if (da != db && da != 1 && db != 1) throw ShapeError(op, a, b);
    plan.out[d] = std::max(da, db);
  }
  if (a != plan.out) plan.a_index = broadcast_index(a, plan.out);
  if (b != plan.out) plan.b_index = broadcast_index(b, plan.out);
  return plan;
}

template <typename Fwd, typename Da, typename Db>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(name, a.shape(), b.shape()));
  const std::size_t n = numel(plan->out);
  std::vector<double> out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ia = plan->a_index.empty() ? i : plan->a_index[i];
    const std::size_t ib = plan->b_index.empty() ? i : plan->b_index[i];
    out[i] = fwd(ad[ia], bd[ib]);
  }
  auto an = a.node();
  auto bn = b.node();
  return Tensor::make_result(
      name, plan->out, std::move(out), {a, b},
      [plan, an, bn, da, db](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        const auto& av = an->data;
        const auto& bv = bn->data;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t ia = plan->a_index.empty() ? i : plan->a_index[i];
          const std::size_t ib = plan->b_index.empty() ? i : plan->b_index[i];
          if (grads[0]) (*grads[0])[ia] += g[i] * da(av[ia], bv[ib]);
          if (grads[1]) (*grads[1])[ib] += g[i] * db(av[ia], bv[ib]);
        }
      });
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  auto xn = x.node();
  return Tensor::make_result(
      name, x.shape(), std::move(out), {x},
      [xn, deriv](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xn->data[i]);
      });
}

// Splits a shape around `axis` into (outer, length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(op, "axis " + std::to_string(axis) + " out of range for " + to_string(shape));
  }
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.len = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ShapeError(op, "expected rank " + std::to_string(rank) + ", got " + to_string(x.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor neg(const Tensor& x) {
  return unary("neg", x, [](double v) { return -v; }, [](double) { return -1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; }, [](double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) throw ShapeError("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return Tensor::make_result(
      "matmul", {m, n}, std::move(out), {a, b},
      [an, bn, m, k, n](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        const auto& av = an->data;
        const auto& bv = bn->data;
        if (grads[0]) {
          auto& ga = *grads[0];
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (grads[1]) {
          auto& gb = *grads[1];
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double aval = av[i * k + p];
              for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aval * g[i * n + j];
            }
          }
        }
      });
}

Tensor transpose(const Tensor& x) {
  require_rank("transpose", x, 2);
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  const auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xd[i * c + j];
  return Tensor::make_result(
      "transpose", {c, r}, std::move(out), {x},
      [r, c](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) throw ShapeError("reshape", x.shape(), shape);
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result(
      "reshape", std::move(shape), std::move(out), {x},
      [](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t dilation) {
  require_rank("conv1d", x, 2);
  require_rank("conv1d", weight, 3);
  const std::size_t t_len = x.dim(0), cin = x.dim(1);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) throw ShapeError("conv1d", x.shape(), weight.shape());
  if (k % 2 == 0) throw ShapeError("conv1d", "kernel size must be odd for same padding, got " + std::to_string(k));
  if (dilation == 0) throw ShapeError("conv1d", "dilation must be >= 1");
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{cout}) throw ShapeError("conv1d", weight.shape(), bias.shape());

  // Repack weight as [K][Cin][Cout] so the inner loop runs over contiguous outputs.
  auto packed = std::make_shared<std::vector<double>>(k * cin * cout);
  const auto wd = weight.data();
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t j = 0; j < k; ++j) (*packed)[(j * cin + i) * cout + o] = wd[(o * cin + i) * k + j];

  const long half = static_cast<long>((k - 1) / 2 * dilation);
  std::vector<double> out(t_len * cout, 0.0);
  if (has_bias) {
    const auto bd = bias.data();
    for (std::size_t t = 0; t < t_len; ++t) std::copy(bd.begin(), bd.end(), out.begin() + t * cout);
  }
  const auto xd = x.data();
  for (std::size_t j = 0; j < k; ++j) {
    const long shift = static_cast<long>(j * dilation) - half;
    for (std::size_t t = 0; t < t_len; ++t) {
      const long src = static_cast<long>(t) + shift;
      if (src < 0 || src >= static_cast<long>(t_len)) continue;
      double* orow = out.data() + t * cout;
      const double* xrow = xd.data() + static_cast<std::size_t>(src) * cin;
      for (std::size_t i = 0; i < cin; ++i) {
        const double xv = xrow[i];
        const double* wrow = packed->data() + (j * cin + i) * cout;
        for (std::size_t o = 0; o < cout; ++o) orow[o] += xv * wrow[o];
      }
    }
  }

  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  auto xn = x.node();
  return Tensor::make_result(
      "conv1d", {t_len, cout}, std::move(out), std::move(inputs),
      [xn, packed, t_len, cin, cout, k, dilation, half, has_bias](
          std::span<const double> g, std::span<std::vector<double>* const> grads) {
        const auto& xv = xn->data;
        for (std::size_t j = 0; j < k; ++j) {
          const long shift = static_cast<long>(j * dilation) - half;
          for (std::size_t t = 0; t < t_len; ++t) {
            const long src = static_cast<long>(t) + shift;
            if (src < 0 || src >= static_cast<long>(t_len)) continue;
            const double* grow = g.data() + t * cout;
            const std::size_t s = static_cast<std::size_t>(src);
            for (std::size_t i = 0; i < cin; ++i) {
              const double* wrow = packed->data() + (j * cin + i) * cout;
              if (grads[0]) {
                double acc = 0.0;
                for (std::size_t o = 0; o < cout; ++o) acc += grow[o] * wrow[o];
                (*grads[0])[s * cin + i] += acc;
              }
              if (grads[1]) {
                const double x_val = xv[s * cin + i];
                auto& gw = *grads[1];
                for (std::size_t o = 0; o < cout; ++o) gw[(o * cin + i) * k + j] += grow[o] * x_val;
              }
            }
          }
        }
        if (has_bias && grads[2]) {
          auto& gb = *grads[2];
          for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t o = 0; o < cout; ++o) gb[o] += g[t * cout + o];
        }
      });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis("softmax", x.shape(), axis);
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = -INFINITY;
      for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, xd[base + l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double e = std::exp(xd[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
    }
  }
  auto y = std::make_shared<std::vector<double>>(out);
  return Tensor::make_result(
      "softmax", x.shape(), std::move(out), {x},
      [y, s](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.len * s.inner + in;
            double dot = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) dot += g[base + l * s.inner] * (*y)[base + l * s.inner];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t i = base + l * s.inner;
              gx[i] += (*y)[i] * (g[i] - dot);
            }
          }
        }
      });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis("log_softmax", x.shape(), axis);
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = -INFINITY;
      for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, xd[base + l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) z += std::exp(xd[base + l * s.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] = xd[base + l * s.inner] - lse;
    }
  }
  auto y = std::make_shared<std::vector<double>>(out);
  return Tensor::make_result(
      "log_softmax", x.shape(), std::move(out), {x},
      [y, s](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.len * s.inner + in;
            double gsum = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) gsum += g[base + l * s.inner];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t i = base + l * s.inner;
              gx[i] += g[i] - std::exp((*y)[i]) * gsum;
            }
          }
        }
      });
}

Tensor layer_norm(const Tensor& x, std::size_t axis, double eps) {
  const AxisSplit s = split_axis("layer_norm", x.shape(), axis);
  std::vector<double> out(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(s.outer * s.inner);
  const auto xd = x.data();
  const double n = static_cast<double>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mu = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) mu += xd[base + l * s.inner];
      mu /= n;
      double var = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double d = xd[base + l * s.inner] - mu;
        var += d * d;
      }
      var /= n;
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[o * s.inner + in] = is;
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] = (xd[base + l * s.inner] - mu) * is;
    }
  }
  auto y = std::make_shared<std::vector<double>>(out);
  return Tensor::make_result(
      "layer_norm", x.shape(), std::move(out), {x},
      [y, inv_std, s, n](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.len * s.inner + in;
            double gmean = 0.0, gy = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t i = base + l * s.inner;
              gmean += g[i];
              gy += g[i] * (*y)[i];
            }
            gmean /= n;
            gy /= n;
            const double is = (*inv_std)[o * s.inner + in];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t i = base + l * s.inner;
              gx[i] += is * (g[i] - gmean - (*y)[i] * gy);
            }
          }
        }
      });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return Tensor::make_result(
      "sum", {}, {acc}, {x}, [](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        for (double& v : *grads[0]) v += g[0];
      });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis("sum", x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<long>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[o * s.inner + in] += xd[(o * s.len + l) * s.inner + in];
  return Tensor::make_result(
      "sum", std::move(shape), std::move(out), {x},
      [s](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t l = 0; l < s.len; ++l)
            for (std::size_t in = 0; in < s.inner; ++in) gx[(o * s.len + l) * s.inner + in] += g[o * s.inner + in];
      });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean", "empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis("mean", x.shape(), axis);
  if (s.len == 0) throw ShapeError("mean", "empty axis");
  return scale(sum(x, axis), 1.0 / static_cast<double>(s.len));
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  require_rank("gather_rows", x, 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<double> out(rows.size() * c);
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ShapeError("gather_rows", "row index " + std::to_string(rows[r]) + " out of range for " +
                                          to_string(x.shape()));
    }
    std::copy_n(xd.begin() + static_cast<long>(rows[r] * c), c, out.begin() + static_cast<long>(r * c));
  }
  return Tensor::make_result(
      "gather_rows", {rows.size(), c}, std::move(out), {x},
      [rows, c](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t r = 0; r < rows.size(); ++r)
          for (std::size_t j = 0; j < c; ++j) gx[rows[r] * c + j] += g[r * c + j];
      });
}

Tensor take(const Tensor& x, const std::vector<std::size_t>& flat_indices) {
  std::vector<double> out(flat_indices.size());
  const auto xd = x.data();
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= xd.size()) {
      throw ShapeError("take", "index " + std::to_string(flat_indices[i]) + " out of range for " +
                                   to_string(x.shape()));
    }
    out[i] = xd[flat_indices[i]];
  }
  return Tensor::make_result(
      "take", {flat_indices.size()}, std::move(out), {x},
      [flat_indices](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        for (std::size_t i = 0; i < flat_indices.size(); ++i) gx[flat_indices[i]] += g[i];
      });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat", "no inputs");
  const Shape& first = parts.front().shape();
  split_axis("concat", first, axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = first;
    if (a.size() != b.size()) throw ShapeError("concat", first, p.shape());
    a[axis] = b[axis] = 0;
    if (a != b) throw ShapeError("concat", first, p.shape());
    out_shape[axis] += p.dim(axis);
  }
  const AxisSplit so = split_axis("concat", out_shape, axis);
  std::vector<double> out(numel(out_shape));
  auto offsets = std::make_shared<std::vector<std::size_t>>();
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets->push_back(off);
    const std::size_t len = p.dim(axis);
    const auto pd = p.data();
    for (std::size_t o = 0; o < so.outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t in = 0; in < so.inner; ++in)
          out[(o * so.len + off + l) * so.inner + in] = pd[(o * len + l) * so.inner + in];
    off += len;
  }
  std::vector<std::size_t> lens;
  for (const auto& p : parts) lens.push_back(p.dim(axis));
  return Tensor::make_result(
      "concat", out_shape, std::move(out), parts,
      [offsets, lens, so](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        for (std::size_t k = 0; k < grads.size(); ++k) {
          if (!grads[k]) continue;
          auto& gk = *grads[k];
          const std::size_t len = lens[k], off = (*offsets)[k];
          for (std::size_t o = 0; o < so.outer; ++o)
            for (std::size_t l = 0; l < len; ++l)
              for (std::size_t in = 0; in < so.inner; ++in)
                gk[(o * len + l) * so.inner + in] += g[(o * so.len + off + l) * so.inner + in];
        }
      });
}

Tensor stop_gradient(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result("stop_gradient", x.shape(), std::move(out), {x}, nullptr);
}

}  // namespace ptts::ad
