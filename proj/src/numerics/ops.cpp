#include "coep/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "coep/numerics/errors.hpp"

namespace coep::ops {

namespace {

// C[m x n] += A[k x m]^T * B[k x n]. Blocks of 4 x 8 outputs stay in
// registers across the k loop; edge rows and columns fall back to row updates
// that skip zero coefficients.
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const float* __restrict a,
             const float* __restrict b, float* __restrict c) {
  const std::size_t m4 = m - m % 4, n8 = n - n % 8;
  for (std::size_t i = 0; i < m4; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8) {
      float acc0[8] = {}, acc1[8] = {}, acc2[8] = {}, acc3[8] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const float* bp = b + p * n + j;
        const float* ap = a + p * m + i;
        const float a0 = ap[0], a1 = ap[1], a2 = ap[2], a3 = ap[3];
        for (std::size_t q = 0; q < 8; ++q) {
          const float bv = bp[q];
          acc0[q] += a0 * bv;
          acc1[q] += a1 * bv;
          acc2[q] += a2 * bv;
          acc3[q] += a3 * bv;
        }
      }
      for (std::size_t q = 0; q < 8; ++q) {
        c[i * n + j + q] += acc0[q];
        c[(i + 1) * n + j + q] += acc1[q];
        c[(i + 2) * n + j + q] += acc2[q];
        c[(i + 3) * n + j + q] += acc3[q];
      }
    }
  }
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t q0 = r < m4 ? n8 : 0;
    if (q0 == n) continue;
    float* cr = c + r * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a[p * m + r];
      if (av == 0.0f) continue;
      const float* bp = b + p * n;
      for (std::size_t q = q0; q < n; ++q) cr[q] += av * bp[q];
    }
  }
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b,
             float* c) {
  if (m < 4 || n < 8) {
    for (std::size_t r = 0; r < m; ++r) {
      float* cr = c + r * n;
      for (std::size_t p = 0; p < k; ++p) {
        const float av = a[r * k + p];
        if (av == 0.0f) continue;
        const float* bp = b + p * n;
        for (std::size_t q = 0; q < n; ++q) cr[q] += av * bp[q];
      }
    }
    return;
  }
  std::vector<float> at(m * k);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t p = 0; p < k; ++p) at[p * m + r] = a[r * k + p];
  }
  gemm_tn(m, k, n, at.data(), b, c);
}

// Dot product with eight interleaved partial sums.
float dot(std::size_t k, const float* __restrict a, const float* __restrict b) {
  float acc[8] = {};
  std::size_t p = 0;
  for (; p + 8 <= k; p += 8) {
    for (std::size_t q = 0; q < 8; ++q) acc[q] += a[p + q] * b[p + q];
  }
  float s = 0.0f;
  for (; p < k; ++p) s += a[p] * b[p];
  for (float v : acc) s += v;
  return s;
}

// C[m x n] += A[m x k] * B[n x k]^T. A few rows go through dot products,
// otherwise both operands are transposed into the blocked kernel.
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b,
             float* c) {
  if (m <= 4 || n < 8) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(k, a + i * k, b + j * k);
    }
    return;
  }
  std::vector<float> at(k * m), bt(k * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_tn(m, k, n, at.data(), bt.data(), c);
}

std::span<float> input_grad(Node& node, std::size_t i) {
  Node& in = *node.inputs[i];
  if (!in.requires_grad) return {};
  return in.value.ensure_grad();
}

void require_rank2(const Var& v, const char* op) {
  if (v.value().rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_str(v.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const auto in = x.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = fwd(in[i]);
  return make_result(std::move(out), {x}, [deriv](Node& node) {
    auto gx = input_grad(node, 0);
    if (gx.empty()) return;
    const auto xin = node.inputs[0]->value.data();
    const auto y = node.value.data();
    const auto g = node.value.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xin[i], y[i]);
  });
}

}  // namespace

Var constant(Tensor t) { return Var(std::move(t), false); }

Var detach(const Var& x) { return Var(x.value(), false); }

Var matmul(const Var& a, const Var& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  gemm_nn(m, k, n, a.value().data().data(), b.value().data().data(), out.data().data());
  return make_result(std::move(out), {a, b}, [m, k, n](Node& node) {
    const float* g = node.value.grad().data();
    if (auto ga = input_grad(node, 0); !ga.empty()) {
      gemm_nt(m, n, k, g, node.inputs[1]->value.data().data(), ga.data());
    }
    if (auto gb = input_grad(node, 1); !gb.empty()) {
      gemm_tn(k, m, n, node.inputs[0]->value.data().data(), g, gb.data());
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    throw DimensionError("matmul_nt: inner dimensions differ " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) + "^T");
  }
  Tensor out(Shape{m, n});
  gemm_nt(m, k, n, a.value().data().data(), b.value().data().data(), out.data().data());
  return make_result(std::move(out), {a, b}, [m, k, n](Node& node) {
    const float* g = node.value.grad().data();
    if (auto ga = input_grad(node, 0); !ga.empty()) {
      gemm_nn(m, n, k, g, node.inputs[1]->value.data().data(), ga.data());
    }
    if (auto gb = input_grad(node, 1); !gb.empty()) {
      gemm_tn(n, m, k, g, node.inputs[0]->value.data().data(), gb.data());
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  const auto x = a.value().data(), y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return make_result(std::move(out), {a, b}, [](Node& node) {
    const auto g = node.value.grad();
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto gi = input_grad(node, k); !gi.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
    }
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw DimensionError("add_n: no terms");
  for (const Var& t : terms) require_same_shape(terms[0], t, "add_n");
  Tensor out(terms[0].shape());
  auto o = out.data();
  std::vector<double> acc(o.size(), 0.0);
  for (const Var& t : terms) {
    const auto v = t.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) acc[i] += v[i];
  }
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<float>(acc[i]);
  std::vector<Var> inputs(terms.begin(), terms.end());
  const std::size_t count = terms.size();
  return make_result(std::move(out), std::move(inputs), [count](Node& node) {
    const auto g = node.value.grad();
    for (std::size_t k = 0; k < count; ++k) {
      if (auto gi = input_grad(node, k); !gi.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
    }
  });
}

Var add_bias(const Var& x, const Var& bias) {
  const std::size_t n = x.value().last_dim();
  if (bias.value().numel() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  Tensor out(x.shape());
  const auto xv = x.value().data(), bv = bias.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] + bv[i % n];
  return make_result(std::move(out), {x, bias}, [n](Node& node) {
    const auto g = node.value.grad();
    if (auto gx = input_grad(node, 0); !gx.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (auto gb = input_grad(node, 1); !gb.empty()) {
      std::vector<double> acc(n, 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) acc[i % n] += g[i];
      for (std::size_t j = 0; j < n; ++j) gb[j] += static_cast<float>(acc[j]);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  const auto x = a.value().data(), y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return make_result(std::move(out), {a, b}, [](Node& node) {
    const auto g = node.value.grad();
    const auto x = node.inputs[0]->value.data();
    const auto y = node.inputs[1]->value.data();
    if (auto ga = input_grad(node, 0); !ga.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (auto gb = input_grad(node, 1); !gb.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Var scale(const Var& x, float factor) {
  return unary(
      x, [factor](float v) { return v * factor; }, [factor](float, float) { return factor; });
}

Var relu(const Var& x) {
  return unary(
      x, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Var gelu(const Var& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      x,
      [=](float v) {
        const double d = v;
        return static_cast<float>(0.5 * d * (1.0 + std::erf(d * kInvSqrt2)));
      },
      [=](float v, float) {
        const double d = v;
        const double cdf = 0.5 * (1.0 + std::erf(d * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * d * d);
        return static_cast<float>(cdf + d * pdf);
      });
}

Var tanh(const Var& x) {
  return unary(
      x, [](float v) { return std::tanh(v); }, [](float, float y) { return 1.0f - y * y; });
}

Var softmax(const Var& x, int axis) {
  const Shape& shape = x.shape();
  const int rank = static_cast<int>(shape.size());
  if (rank == 0) throw DimensionError("softmax of a scalar");
  const int ax = axis < 0 ? rank + axis : axis;
  if (ax < 0 || ax >= rank) throw DimensionError("softmax axis out of range");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= shape[i];
  for (int i = ax + 1; i < rank; ++i) inner *= shape[i];
  const std::size_t len = shape[ax];

  Tensor out(shape);
  const auto in = x.value().data();
  auto o = out.data();
  for (float v : in) {
    if (std::isnan(v) || v == std::numeric_limits<float>::infinity()) {
      throw NumericError("softmax input is not finite");
    }
  }
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      const std::size_t base = a * len * inner + b;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, in[base + i * inner]);
      if (mx == -std::numeric_limits<float>::infinity()) {
        throw NumericError("softmax row is entirely masked");
      }
      double z = 0.0;
      for (std::size_t i = 0; i < len; ++i) z += std::exp(static_cast<double>(in[base + i * inner]) - mx);
      for (std::size_t i = 0; i < len; ++i) {
        o[base + i * inner] =
            static_cast<float>(std::exp(static_cast<double>(in[base + i * inner]) - mx) / z);
      }
    }
  }
  return make_result(std::move(out), {x}, [outer, inner, len](Node& node) {
    auto gx = input_grad(node, 0);
    if (gx.empty()) return;
    const auto y = node.value.data();
    const auto g = node.value.grad();
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t b = 0; b < inner; ++b) {
        const std::size_t base = a * len * inner + b;
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          dot += static_cast<double>(g[base + i * inner]) * y[base + i * inner];
        }
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t k = base + i * inner;
          gx[k] += static_cast<float>(y[k] * (g[k] - dot));
        }
      }
    }
  });
}

Var log_softmax(const Var& x) {
  const std::size_t n = x.value().last_dim();
  const std::size_t rows = x.value().outer_size();
  Tensor out(x.shape());
  const auto in = x.value().data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = in.data() + r * n;
    float mx = *std::max_element(row, row + n);
    if (!std::isfinite(mx)) throw NumericError("log_softmax input is not finite");
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(static_cast<double>(row[i]) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t i = 0; i < n; ++i) o[r * n + i] = static_cast<float>(row[i] - lse);
  }
  return make_result(std::move(out), {x}, [rows, n](Node& node) {
    auto gx = input_grad(node, 0);
    if (gx.empty()) return;
    const auto y = node.value.data();
    const auto g = node.value.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (std::size_t i = 0; i < n; ++i) gs += g[r * n + i];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = r * n + i;
        gx[k] += static_cast<float>(g[k] - std::exp(static_cast<double>(y[k])) * gs);
      }
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, float eps) {
  const std::size_t n = x.value().last_dim();
  const std::size_t rows = x.value().outer_size();
  if (gain.value().numel() != n || bias.value().numel() != n) {
    throw DimensionError("layer_norm: gain/bias size does not match " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  std::vector<float> xhat(x.value().numel());
  std::vector<float> inv_std(rows);
  const auto in = x.value().data();
  const auto gv = gain.value().data(), bv = bias.value().data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = in.data() + r * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += row[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = static_cast<float>(is);
    for (std::size_t i = 0; i < n; ++i) {
      const float h = static_cast<float>((row[i] - mu) * is);
      xhat[r * n + i] = h;
      o[r * n + i] = h * gv[i] + bv[i];
    }
  }
  return make_result(std::move(out), {x, gain, bias},
                     [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& node) {
    const auto g = node.value.grad();
    const auto gv = node.inputs[1]->value.data();
    if (auto gx = input_grad(node, 0); !gx.empty()) {
      for (std::size_t r = 0; r < rows; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dh = static_cast<double>(g[r * n + i]) * gv[i];
          m1 += dh;
          m2 += dh * xhat[r * n + i];
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double dh = static_cast<double>(g[r * n + i]) * gv[i];
          gx[r * n + i] += static_cast<float>(inv_std[r] * (dh - m1 - xhat[r * n + i] * m2));
        }
      }
    }
    if (auto gg = input_grad(node, 1); !gg.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += static_cast<double>(g[r * n + i]) * xhat[r * n + i];
        gg[i] += static_cast<float>(s);
      }
    }
    if (auto gb = input_grad(node, 2); !gb.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += g[r * n + i];
        gb[i] += static_cast<float>(s);
      }
    }
  });
}

Var embedding(const Var& table, std::span<const TokenId> ids) {
  require_rank2(table, "embedding");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  Tensor out(Shape{ids.size(), d});
  const auto tv = table.value().data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw IndexError("token id " + std::to_string(ids[r]) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy_n(tv.data() + ids[r] * d, d, out.data().data() + r * d);
  }
  std::vector<TokenId> idx(ids.begin(), ids.end());
  return make_result(std::move(out), {table}, [d, idx = std::move(idx)](Node& node) {
    auto gt = input_grad(node, 0);
    if (gt.empty()) return;
    const auto g = node.value.grad();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      float* dst = gt.data() + idx[r] * d;
      const float* src = g.data() + r * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t d = parts[0].value().last_dim();
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.shape()[1] != d) throw DimensionError("concat_rows: column count mismatch");
    offsets.push_back(rows);
    rows += p.shape()[0];
  }
  Tensor out(Shape{rows, d});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + offsets[k] * d);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_result(std::move(out), std::move(inputs), [d, offsets](Node& node) {
    const auto g = node.value.grad();
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      if (auto gi = input_grad(node, k); !gi.empty()) {
        const float* src = g.data() + offsets[k] * d;
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += src[i];
      }
    }
  });
}

Var slice_rows(const Var& x, std::size_t start, std::size_t count) {
  require_rank2(x, "slice_rows");
  const std::size_t d = x.shape()[1];
  if (start + count > x.shape()[0]) throw DimensionError("slice_rows out of range");
  Tensor out(Shape{count, d});
  const auto src = x.value().data();
  std::copy_n(src.data() + start * d, count * d, out.data().data());
  return make_result(std::move(out), {x}, [start, d](Node& node) {
    auto gx = input_grad(node, 0);
    if (gx.empty()) return;
    const auto g = node.value.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[start * d + i] += g[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t rows = parts[0].shape().at(0);
  std::size_t cols = 0;
  std::vector<std::size_t> offsets, widths;
  for (const Var& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.shape()[0] != rows) throw DimensionError("concat_cols: row count mismatch");
    offsets.push_back(cols);
    widths.push_back(p.shape()[1]);
    cols += p.shape()[1];
  }
  Tensor out(Shape{rows, cols});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].value().data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src.data() + r * widths[k], widths[k], out.data().data() + r * cols + offsets[k]);
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_result(std::move(out), std::move(inputs), [rows, cols, offsets, widths](Node& node) {
    const auto g = node.value.grad();
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      if (auto gi = input_grad(node, k); !gi.empty()) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < widths[k]; ++c) {
            gi[r * widths[k] + c] += g[r * cols + offsets[k] + c];
          }
        }
      }
    }
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t count) {
  require_rank2(x, "slice_cols");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (start + count > cols) throw DimensionError("slice_cols out of range");
  Tensor out(Shape{rows, count});
  const auto src = x.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(src.data() + r * cols + start, count, out.data().data() + r * count);
  }
  return make_result(std::move(out), {x}, [rows, cols, start, count](Node& node) {
    auto gx = input_grad(node, 0);
    if (gx.empty()) return;
    const auto g = node.value.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) gx[r * cols + start + c] += g[r * count + c];
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (float v : x.value().data()) s += v;
  return make_result(Tensor::scalar(static_cast<float>(s)), {x}, [](Node& node) {
    auto gx = input_grad(node, 0);
    if (gx.empty()) return;
    const float g = node.value.grad()[0];
    for (float& v : gx) v += g;
  });
}

Var mean(const Var& x) {
  const std::size_t n = x.value().numel();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0f / static_cast<float>(n));
}

Var cross_entropy(const Var& logits, std::span<const TokenId> targets,
                  std::span<const bool> padding) {
  require_rank2(logits, "cross_entropy");
  const std::size_t rows = logits.shape()[0], vocab = logits.shape()[1];
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(rows) + " rows");
  }
  if (!padding.empty() && padding.size() != rows) {
    throw DimensionError("cross_entropy: padding mask length mismatch");
  }
  std::vector<TokenId> tgt(targets.begin(), targets.end());
  std::vector<bool> keep(rows, true);
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!padding.empty() && padding[r]) keep[r] = false;
    if (!keep[r]) continue;
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= vocab) {
      throw IndexError("target id " + std::to_string(tgt[r]) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
    ++count;
  }
  if (count == 0) throw DimensionError("cross_entropy: every position is padding");

  const auto in = logits.value().data();
  std::vector<float> probs(in.size(), 0.0f);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!keep[r]) continue;
    const float* row = in.data() + r * vocab;
    const float mx = *std::max_element(row, row + vocab);
    if (!std::isfinite(mx)) throw NumericError("cross_entropy logits are not finite");
    double z = 0.0;
    for (std::size_t i = 0; i < vocab; ++i) z += std::exp(static_cast<double>(row[i]) - mx);
    const double lse = mx + std::log(z);
    total += lse - row[tgt[r]];
    for (std::size_t i = 0; i < vocab; ++i) {
      probs[r * vocab + i] = static_cast<float>(std::exp(static_cast<double>(row[i]) - lse));
    }
  }
  const float value = static_cast<float>(total / static_cast<double>(count));
  return make_result(Tensor::scalar(value), {logits},
                     [rows, vocab, count, tgt = std::move(tgt), keep = std::move(keep),
                      probs = std::move(probs)](Node& node) {
    auto gx = input_grad(node, 0);
    if (gx.empty()) return;
    const float g = node.value.grad()[0] / static_cast<float>(count);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!keep[r]) continue;
      for (std::size_t i = 0; i < vocab; ++i) gx[r * vocab + i] += g * probs[r * vocab + i];
      gx[r * vocab + tgt[r]] -= g;
    }
  });
}

Var dropout(const Var& x, float p, Rng& rng) {
  if (p <= 0.0f) return x;
  if (p >= 1.0f) throw ParameterError("dropout probability must be < 1");
  const float keep_scale = 1.0f / (1.0f - p);
  std::vector<float> mask(x.value().numel());
  for (float& m : mask) m = rng.uniform() < p ? 0.0f : keep_scale;
  return mul(x, constant(Tensor(x.shape(), std::move(mask))));
}

Tensor gumbel_noise(const Shape& shape, Rng& rng) {
  Tensor noise(shape);
  for (float& g : noise.data()) {
    const double u = std::clamp(rng.uniform(), 1e-10, 1.0 - 1e-7);
    g = static_cast<float>(-std::log(-std::log(u)));
  }
  return noise;
}

Var gumbel_softmax_with_noise(const Var& logits, const Tensor& noise, const GumbelOptions& opts) {
  if (!(opts.temperature > 0.0f)) throw ParameterError("gumbel_softmax temperature must be > 0");
  if (noise.shape() != logits.shape()) throw DimensionError("gumbel noise shape mismatch");
  const std::size_t n = logits.value().last_dim();
  const std::size_t rows = logits.value().outer_size();
  if (opts.hard_index && opts.hard_index->size() != rows) {
    throw DimensionError("gumbel_softmax: hard_index needs one entry per row");
  }
  const auto in = logits.value().data();
  const auto gv = noise.data();
  std::vector<float> soft(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
      const float l = in[r * n + i];
      if (std::isnan(l)) throw NumericError("gumbel_softmax logits contain NaN");
      z[i] = (static_cast<double>(l) + gv[r * n + i]) / opts.temperature;
      mx = std::max(mx, z[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(z[i] - mx);
    for (std::size_t i = 0; i < n; ++i) soft[r * n + i] = static_cast<float>(std::exp(z[i] - mx) / s);
  }
  Tensor out(logits.shape());
  auto o = out.data();
  if (opts.straight_through) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t hard = opts.hard_index ? (*opts.hard_index)[r]
                                               : argmax(std::span<const float>(soft).subspan(r * n, n));
      if (hard >= n) throw IndexError("gumbel_softmax hard index out of range");
      o[r * n + hard] = 1.0f;
    }
  } else {
    std::copy(soft.begin(), soft.end(), o.begin());
  }
  const float inv_t = 1.0f / opts.temperature;
  return make_result(std::move(out), {logits}, [rows, n, inv_t, soft = std::move(soft)](Node& node) {
    auto gx = input_grad(node, 0);
    if (gx.empty()) return;
    const auto g = node.value.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(g[r * n + i]) * soft[r * n + i];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = r * n + i;
        gx[k] += static_cast<float>(inv_t * soft[k] * (g[k] - dot));
      }
    }
  });
}

Var gumbel_softmax(const Var& logits, float temperature, Rng& rng, bool straight_through) {
  if (!(temperature > 0.0f)) throw ParameterError("gumbel_softmax temperature must be > 0");
  GumbelOptions opts;
  opts.temperature = temperature;
  opts.straight_through = straight_through;
  return gumbel_softmax_with_noise(logits, gumbel_noise(logits.shape(), rng), opts);
}

std::size_t argmax(std::span<const float> values) {
  if (values.empty()) throw DimensionError("argmax of empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace coep::ops
