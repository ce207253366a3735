// Copyright 2026 The Eaglet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "eaglet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eaglet/attention_mask.hpp"
#include "eaglet/errors.hpp"
#include "eaglet/kernels.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

namespace {

using detail::Node;

std::vector<real>& pgrad(Node& self, std::size_t i) { return self.parents[i]->ensure_grad(); }
bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

std::size_t last_dim(const Tensor& x, const char* op) {
  if (x.rank() == 0 || x.shape().back() == 0) {
    throw DimensionError(std::string(op) + ": needs a non-empty last axis, got " + shape_str(x.shape()));
  }
  return x.shape().back();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool batched = a.rank() == 3 && b.rank() == 3;
  if (!((a.rank() == 2 && b.rank() == 2) || batched) ||
      a.shape()[a.rank() - 1] != b.shape()[b.rank() - 2] ||
      (batched && a.dim(0) != b.dim(0))) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const std::size_t batch = batched ? a.dim(0) : 1;
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t k = a.shape()[a.rank() - 1];
  const std::size_t n = b.shape()[b.rank() - 1];
  std::vector<real> out(batch * m * n);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    kernels::gemm_nn(m, k, n, a.data().data() + bi * m * k, b.data().data() + bi * k * n,
                     out.data() + bi * m * n, false);
  }
  Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
  return make_result(std::move(shape), std::move(out), {a, b}, [batch, m, k, n](Node& self) {
    const real* a_data = self.parents[0]->data.data();
    const real* b_data = self.parents[1]->data.data();
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const real* dc = self.grad.data() + bi * m * n;
      if (wants(self, 0)) {
        kernels::gemm_nt_acc(m, n, k, dc, b_data + bi * k * n, pgrad(self, 0).data() + bi * m * k);
      }
      if (wants(self, 1)) {
        kernels::gemm_tn_acc(m, k, n, a_data + bi * m * k, dc, pgrad(self, 1).data() + bi * k * n);
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      auto& g = pgrad(self, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = last_dim(x, "add_bias");
  if (bias.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  std::vector<real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + bias.data()[i % n];
  return make_result(x.shape(), std::move(out), {x, bias}, [n](Node& self) {
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& ad = self.parents[0]->data;
    const auto& bd = self.parents[1]->data;
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bd[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * ad[i];
    }
  });
}

Tensor scale(const Tensor& x, real factor) {
  std::vector<real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return make_result(x.shape(), std::move(out), {x}, [factor](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor silu(const Tensor& x) {
  std::vector<real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const real v = x.data()[i];
    out[i] = v / (1.0f + std::exp(-v));
  }
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    const auto& xd = self.parents[0]->data;
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const real s = 1.0f / (1.0f + std::exp(-xd[i]));
      g[i] += self.grad[i] * s * (1.0f + xd[i] * (1.0f - s));
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (real v : x.data()) total += v;
  return make_result({}, {static_cast<real>(total)}, {x}, [](Node& self) {
    auto& g = pgrad(self, 0);
    for (real& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const real inv = 1.0f / static_cast<real>(x.numel());
  double total = 0.0;
  for (real v : x.data()) total += v;
  return make_result({}, {static_cast<real>(total / static_cast<double>(x.numel()))}, {x},
                     [inv](Node& self) {
                       auto& g = pgrad(self, 0);
                       for (real& v : g) v += self.grad[0] * inv;
                     });
}

Tensor softmax(const Tensor& logits, real temperature) {
  if (temperature < 0.0f || std::isnan(temperature)) {
    throw UsageError("softmax: temperature must be >= 0");
  }
  const std::size_t n = last_dim(logits, "softmax");
  const std::size_t rows = logits.numel() / n;
  const auto x = logits.data();
  std::vector<real> out(logits.numel(), 0.0f);
  if (temperature == 0.0f) {
    for (std::size_t r = 0; r < rows; ++r) {
      const auto first = x.begin() + static_cast<std::ptrdiff_t>(r * n);
      const auto best = std::max_element(first, first + static_cast<std::ptrdiff_t>(n));
      out[r * n + static_cast<std::size_t>(best - first)] = 1.0f;
    }
    return Tensor(logits.shape(), std::move(out));
  }
  const real inv_t = 1.0f / temperature;
  for (std::size_t r = 0; r < rows; ++r) {
    const real* xr = x.data() + r * n;
    real* yr = out.data() + r * n;
    const real mx = *std::max_element(xr, xr + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yr[j] = std::exp((xr[j] - mx) * inv_t);
      total += yr[j];
    }
    const real inv = static_cast<real>(1.0 / total);
    for (std::size_t j = 0; j < n; ++j) yr[j] *= inv;
  }
  return make_result(logits.shape(), std::move(out), {logits}, [n, rows, inv_t](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const real* y = self.data.data() + r * n;
      const real* dy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(y[j]) * dy[j];
      for (std::size_t j = 0; j < n; ++j) {
        g[r * n + j] += y[j] * (dy[j] - static_cast<real>(dot)) * inv_t;
      }
    }
  });
}

Tensor rmsnorm(const Tensor& x, const Tensor& weight, real eps) {
  const std::size_t n = last_dim(x, "rmsnorm");
  if (weight.numel() != n) {
    throw DimensionError("rmsnorm: weight " + shape_str(weight.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  std::vector<real> inv_rms(rows);
  std::vector<real> out(x.numel());
  const real* xd = x.data().data();
  const real* wd = weight.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    real ss = 0.0f;
    for (std::size_t j = 0; j < n; ++j) ss += xd[r * n + j] * xd[r * n + j];
    const real ms = ss / static_cast<real>(n) + eps;
    inv_rms[r] = ms > 0.0f ? 1.0f / std::sqrt(ms) : 0.0f;
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xd[r * n + j] * inv_rms[r] * wd[j];
  }
  return make_result(x.shape(), std::move(out), {x, weight},
                     [n, rows, inv_rms = std::move(inv_rms)](Node& self) {
                       const real* xs = self.parents[0]->data.data();
                       const real* ws = self.parents[1]->data.data();
                       const real* dy = self.grad.data();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const real ir = inv_rms[r];
                         if (wants(self, 1)) {
                           auto& gw = pgrad(self, 1);
                           for (std::size_t j = 0; j < n; ++j) gw[j] += dy[r * n + j] * xs[r * n + j] * ir;
                         }
                         if (wants(self, 0)) {
                           auto& gx = pgrad(self, 0);
                           double dot = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                             dot += static_cast<double>(dy[r * n + j]) * ws[j] * xs[r * n + j];
                           }
                           const real coef = static_cast<real>(dot) * ir * ir * ir / static_cast<real>(n);
                           for (std::size_t j = 0; j < n; ++j) {
                             gx[r * n + j] += dy[r * n + j] * ws[j] * ir - xs[r * n + j] * coef;
                           }
                         }
                       }
                     });
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "smooth_l1");
  const std::size_t count = pred.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = static_cast<double>(pred.data()[i]) - target.data()[i];
    const double ad = std::abs(d);
    total += ad < 1.0 ? 0.5 * d * d : ad - 0.5;
  }
  const real inv = 1.0f / static_cast<real>(count);
  return make_result({}, {static_cast<real>(total / static_cast<double>(count))}, {pred, target},
                     [inv](Node& self) {
                       const auto& p = self.parents[0]->data;
                       const auto& t = self.parents[1]->data;
                       const real g0 = self.grad[0] * inv;
                       for (std::size_t side = 0; side < 2; ++side) {
                         if (!wants(self, side)) continue;
                         auto& g = pgrad(self, side);
                         const real sign = side == 0 ? 1.0f : -1.0f;
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           const real d = p[i] - t[i];
                           const real dd = std::abs(d) < 1.0f ? d : (d > 0.0f ? 1.0f : -1.0f);
                           g[i] += sign * g0 * dd;
                         }
                       }
                     });
}

namespace {

// Row-wise log-softmax, accumulated in double.
void log_softmax_row(const real* x, std::size_t n, std::vector<double>& logp) {
  const real mx = *std::max_element(x, x + n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) total += std::exp(static_cast<double>(x[j]) - mx);
  const double lse = std::log(total) + mx;
  for (std::size_t j = 0; j < n; ++j) logp[j] = static_cast<double>(x[j]) - lse;
}

}  // namespace

Tensor soft_cross_entropy(const Tensor& target_dist, const Tensor& logits) {
  require_same_shape(target_dist, logits, "soft_cross_entropy");
  const std::size_t n = last_dim(logits, "soft_cross_entropy");
  const std::size_t rows = logits.numel() / n;
  const real* t = target_dist.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (t[r * n + j] < 0.0f) {
        throw ValidationError("soft_cross_entropy: negative target entry in row " + std::to_string(r));
      }
      row_sum += t[r * n + j];
    }
    if (std::abs(row_sum - 1.0) > 1e-4) {
      throw ValidationError("soft_cross_entropy: target row " + std::to_string(r) + " sums to " +
                            std::to_string(row_sum));
    }
  }
  std::vector<double> logp(n);
  std::vector<real> probs(logits.numel());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    log_softmax_row(logits.data().data() + r * n, n, logp);
    for (std::size_t j = 0; j < n; ++j) {
      if (t[r * n + j] != 0.0f) total -= t[r * n + j] * logp[j];
      probs[r * n + j] = static_cast<real>(std::exp(logp[j]));
    }
  }
  // Target is a constant teacher signal; only logits participate.
  Tensor teacher = target_dist.detach();
  const real inv_rows = 1.0f / static_cast<real>(rows);
  return make_result({}, {static_cast<real>(total / static_cast<double>(rows))}, {logits, teacher},
                     [n, rows, inv_rows, probs = std::move(probs)](Node& self) {
                       if (!wants(self, 0)) return;
                       auto& g = pgrad(self, 0);
                       const auto& td = self.parents[1]->data;
                       const real g0 = self.grad[0] * inv_rows;
                       for (std::size_t r = 0; r < rows; ++r) {
                         real tsum = 0.0f;
                         for (std::size_t j = 0; j < n; ++j) tsum += td[r * n + j];
                         for (std::size_t j = 0; j < n; ++j) {
                           g[r * n + j] += g0 * (probs[r * n + j] * tsum - td[r * n + j]);
                         }
                       }
                     });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
  const std::size_t n = last_dim(logits, "cross_entropy");
  const std::size_t rows = logits.numel() / n;
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " rows");
  }
  std::vector<double> logp(n);
  std::vector<real> probs(logits.numel());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= n) {
      throw ValidationError("cross_entropy: target " + std::to_string(targets[r]) + " out of range");
    }
    log_softmax_row(logits.data().data() + r * n, n, logp);
    total -= logp[static_cast<std::size_t>(targets[r])];
    for (std::size_t j = 0; j < n; ++j) probs[r * n + j] = static_cast<real>(std::exp(logp[j]));
  }
  std::vector<std::int32_t> ids(targets.begin(), targets.end());
  const real inv_rows = 1.0f / static_cast<real>(rows);
  return make_result({}, {static_cast<real>(total / static_cast<double>(rows))}, {logits},
                     [n, rows, inv_rows, probs = std::move(probs), ids = std::move(ids)](Node& self) {
                       auto& g = pgrad(self, 0);
                       const real g0 = self.grad[0] * inv_rows;
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t j = 0; j < n; ++j) g[r * n + j] += g0 * probs[r * n + j];
                         g[r * n + static_cast<std::size_t>(ids[r])] -= g0;
                       }
                     });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
  if (table.rank() != 2) throw DimensionError("embedding: table must be 2-D, got " + shape_str(table.shape()));
  const std::size_t vocab = table.dim(0);
  const std::size_t h = table.dim(1);
  if (ids.empty()) throw DimensionError("embedding: empty id list");
  std::vector<real> out(ids.size() * h);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw ValidationError("embedding: token id " + std::to_string(ids[i]) + " outside vocab of " +
                            std::to_string(vocab));
    }
    std::copy_n(table.data().data() + static_cast<std::size_t>(ids[i]) * h, h, out.data() + i * h);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return make_result({ids.size(), h}, std::move(out), {table}, [h, saved = std::move(saved)](Node& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < saved.size(); ++i) {
      real* row = g.data() + static_cast<std::size_t>(saved[i]) * h;
      for (std::size_t j = 0; j < h; ++j) row[j] += self.grad[i * h + j];
    }
  });
}

Tensor concat_columns(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_columns: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t rows = a.dim(0);
  const std::size_t na = a.dim(1);
  const std::size_t nb = b.dim(1);
  std::vector<real> out(rows * (na + nb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * na, na, out.data() + r * (na + nb));
    std::copy_n(b.data().data() + r * nb, nb, out.data() + r * (na + nb) + na);
  }
  return make_result({rows, na + nb}, std::move(out), {a, b}, [rows, na, nb](Node& self) {
    for (std::size_t r = 0; r < rows; ++r) {
      const real* src = self.grad.data() + r * (na + nb);
      if (wants(self, 0)) {
        real* dst = pgrad(self, 0).data() + r * na;
        for (std::size_t j = 0; j < na; ++j) dst[j] += src[j];
      }
      if (wants(self, 1)) {
        real* dst = pgrad(self, 1).data() + r * nb;
        for (std::size_t j = 0; j < nb; ++j) dst[j] += src[na + j];
      }
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 2 || begin > end || end > x.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                         shape_str(x.shape()));
  }
  const std::size_t w = x.dim(1);
  auto src = x.data().subspan(begin * w, (end - begin) * w);
  return make_result({end - begin, w}, std::vector<real>(src.begin(), src.end()), {x}, [begin, w](Node& self) {
    std::vector<real>& g = pgrad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * w + i] += self.grad[i];
  });
}

Tensor rope(const Tensor& x, std::span<const std::int64_t> positions, std::size_t heads,
            std::span<const real> cos_table, std::span<const real> sin_table) {
  if (x.rank() != 2 || x.dim(0) != positions.size() || heads == 0 || x.dim(1) % heads != 0 ||
      (x.dim(1) / heads) % 2 != 0) {
    throw DimensionError("rope: bad input " + shape_str(x.shape()) + " for " +
                         std::to_string(positions.size()) + " positions");
  }
  const std::size_t rows = x.dim(0);
  const std::size_t hidden = x.dim(1);
  const std::size_t half = hidden / heads / 2;
  for (std::int64_t p : positions) {
    if (p < 0 || static_cast<std::size_t>(p + 1) * half > cos_table.size()) {
      throw CapacityError("rope: position " + std::to_string(p) + " outside the rotary table");
    }
  }
  std::vector<real> out(x.data().begin(), x.data().end());
  kernels::rope(rows, hidden, heads, positions.data(), cos_table.data(), sin_table.data(), out.data(),
                false);
  std::vector<std::int64_t> pos(positions.begin(), positions.end());
  return make_result(x.shape(), std::move(out), {x},
                     [rows, hidden, heads, pos = std::move(pos), cos_table, sin_table](Node& self) {
                       std::vector<real> g(self.grad);
                       kernels::rope(rows, hidden, heads, pos.data(), cos_table.data(), sin_table.data(),
                                     g.data(), true);
                       auto& dst = pgrad(self, 0);
                       for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
                     });
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
                        std::size_t heads) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || k.shape() != v.shape() ||
      q.dim(1) != k.dim(1) || heads == 0 || q.dim(1) % heads != 0) {
    throw DimensionError("masked_attention: incompatible q " + shape_str(q.shape()) + ", k " +
                         shape_str(k.shape()) + ", v " + shape_str(v.shape()));
  }
  const std::size_t rows = q.dim(0);
  const std::size_t slots = k.dim(0);
  const std::size_t hidden = q.dim(1);
  if (mask.rows() != rows || mask.cols() != slots) {
    throw DimensionError("masked_attention: mask is " + std::to_string(mask.rows()) + "x" +
                         std::to_string(mask.cols()) + " for " + std::to_string(rows) + " queries and " +
                         std::to_string(slots) + " keys");
  }
  std::vector<real> out(rows * hidden);
  const bool track = grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());
  std::vector<real> probs(track ? rows * heads * slots : 0);
  kernels::attention(rows, slots, hidden, heads, q.data().data(), k.data().data(), v.data().data(),
                     hidden, mask.data(), out.data(), track ? probs.data() : nullptr);
  return make_result(
      {rows, hidden}, std::move(out), {q, k, v},
      [rows, slots, hidden, heads, probs = std::move(probs)](Node& self) {
        const std::size_t hd = hidden / heads;
        const real sc = 1.0f / std::sqrt(static_cast<real>(hd));
        const real* qd = self.parents[0]->data.data();
        const real* kd = self.parents[1]->data.data();
        const real* vd = self.parents[2]->data.data();
        real* gq = wants(self, 0) ? pgrad(self, 0).data() : nullptr;
        real* gk = wants(self, 1) ? pgrad(self, 1).data() : nullptr;
        real* gv = wants(self, 2) ? pgrad(self, 2).data() : nullptr;
        std::vector<real> dp(slots);
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t h = 0; h < heads; ++h) {
            const real* p = probs.data() + (i * heads + h) * slots;
            const real* dout = self.grad.data() + i * hidden + h * hd;
            double weighted = 0.0;
            for (std::size_t s = 0; s < slots; ++s) {
              if (p[s] == 0.0f) {
                dp[s] = 0.0f;
                continue;
              }
              const real* vs = vd + s * hidden + h * hd;
              real dot = 0.0f;
              for (std::size_t d = 0; d < hd; ++d) dot += dout[d] * vs[d];
              dp[s] = dot;
              weighted += static_cast<double>(p[s]) * dot;
              if (gv) {
                real* gvs = gv + s * hidden + h * hd;
                for (std::size_t d = 0; d < hd; ++d) gvs[d] += p[s] * dout[d];
              }
            }
            for (std::size_t s = 0; s < slots; ++s) {
              if (p[s] == 0.0f) continue;
              const real ds = p[s] * (dp[s] - static_cast<real>(weighted)) * sc;
              if (gq) {
                const real* ks = kd + s * hidden + h * hd;
                real* gqi = gq + i * hidden + h * hd;
                for (std::size_t d = 0; d < hd; ++d) gqi[d] += ds * ks[d];
              }
              if (gk) {
                const real* qi = qd + i * hidden + h * hd;
                real* gks = gk + s * hidden + h * hd;
                for (std::size_t d = 0; d < hd; ++d) gks[d] += ds * qi[d];
              }
            }
          }
        }
      });
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
