#include "cris/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kernels.hpp"

namespace cris {

namespace {

std::atomic<testing::Fault> g_fault{testing::Fault::kNone};
thread_local testing::ActivationPattern* t_pattern = nullptr;

// Gradient buffer of the i-th recorded parent, or null when it needs none.
double* parent_grad(detail::Node& self, std::size_t i) {
  auto& p = self.parents[i];
  return p->requires_grad ? p->grad_buffer().data() : nullptr;
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.shape().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     t.shape().str());
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_axis(const Shape& s, int axis) {
  if (axis < 0) axis += s.rank();
  if (axis < 0 || axis >= s.rank()) throw ShapeError("axis out of range for shape " + s.str());
  AxisSplit r{1, static_cast<std::size_t>(s[axis]), 1};
  for (int i = 0; i < axis; ++i) r.outer *= static_cast<std::size_t>(s[i]);
  for (int i = axis + 1; i < s.rank(); ++i) r.inner *= static_cast<std::size_t>(s[i]);
  return r;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

// Linear algebra --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner extents differ " + a.shape().str() + " x " + b.shape().str());
  }
  Array out(Shape{m, n});
  kernels::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data().data(), false);
  return make_result(std::move(out), {&a, &b}, [m, n, k](detail::Node& self) {
    const double* dc = self.grad.data();
    const double* av = self.parents[0]->value.data().data();
    const double* bv = self.parents[1]->value.data().data();
    if (double* da = parent_grad(self, 0)) kernels::gemm_nt(m, k, n, dc, bv, da, true);
    if (double* db = parent_grad(self, 1)) kernels::gemm_tn(k, n, m, av, dc, db, true);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const int n = x.shape()[0], in = x.shape()[1], out_dim = w.shape()[1];
  if (w.shape()[0] != in) {
    throw ShapeError("linear: input width " + std::to_string(in) + " vs weight " + w.shape().str());
  }
  const bool has_bias = bias.defined();
  if (has_bias && !(bias.shape() == Shape{out_dim})) {
    throw ShapeError("linear: bias shape " + bias.shape().str());
  }
  Array out(Shape{n, out_dim});
  double* o = out.data().data();
  if (has_bias) {
    for (int i = 0; i < n; ++i) std::copy(bias.data().begin(), bias.data().end(), o + static_cast<std::ptrdiff_t>(i) * out_dim);
  }
  kernels::gemm_nn(n, out_dim, in, x.data().data(), w.data().data(), o, has_bias);
  auto backward = [n, in, out_dim, has_bias](detail::Node& self) {
    const double* dy = self.grad.data();
    const double* xv = self.parents[0]->value.data().data();
    const double* wv = self.parents[1]->value.data().data();
    if (double* dx = parent_grad(self, 0)) kernels::gemm_nt(n, in, out_dim, dy, wv, dx, true);
    if (double* dw = parent_grad(self, 1)) kernels::gemm_tn(in, out_dim, n, xv, dy, dw, true);
    if (has_bias) {
      if (double* db = parent_grad(self, 2)) {
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < out_dim; ++j) db[j] += dy[static_cast<std::ptrdiff_t>(i) * out_dim + j];
      }
    }
  };
  if (has_bias) return make_result(std::move(out), {&x, &w, &bias}, backward);
  return make_result(std::move(out), {&x, &w}, backward);
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const int r = x.shape()[0], c = x.shape()[1];
  Array out(Shape{c, r});
  const double* xv = x.data().data();
  double* o = out.data().data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) o[static_cast<std::ptrdiff_t>(j) * r + i] = xv[static_cast<std::ptrdiff_t>(i) * c + j];
  return make_result(std::move(out), {&x}, [r, c](detail::Node& self) {
    const double* dy = self.grad.data();
    double* dx = parent_grad(self, 0);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) dx[static_cast<std::ptrdiff_t>(i) * c + j] += dy[static_cast<std::ptrdiff_t>(j) * r + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  return make_result(x.value().reshaped(shape), {&x}, [](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
  require_rank(x, 3, "conv2d");
  require_rank(w, 4, "conv2d");
  const int cout = w.shape()[0];
  kernels::ConvGeometry g{x.shape()[0], x.shape()[1], x.shape()[2], w.shape()[2], w.shape()[3], stride, padding};
  if (w.shape()[1] != g.channels) {
    throw ShapeError("conv2d: input has " + std::to_string(g.channels) + " channels, kernel expects " +
                     std::to_string(w.shape()[1]));
  }
  if ((g.kh != 1 && g.kh != 3) || (g.kw != 1 && g.kw != 3)) throw ShapeError("conv2d: kernel must be 1x1 or 3x3");
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  if (g.height + 2 * padding < g.kh || g.width + 2 * padding < g.kw) throw ShapeError("conv2d: input smaller than kernel");
  const bool has_bias = bias.defined();
  if (has_bias && !(bias.shape() == Shape{cout})) throw ShapeError("conv2d: bias shape " + bias.shape().str());

  const int oh = g.out_h(), ow = g.out_w();
  const int plane = oh * ow;
  const int kdim = g.channels * g.kh * g.kw;
  // A 1x1 stride-1 unpadded convolution reads the input directly as its column matrix.
  const bool direct = g.kh == 1 && g.kw == 1 && stride == 1 && padding == 0;
  auto cols = std::make_shared<std::vector<double>>();
  if (!direct) {
    cols->resize(static_cast<std::size_t>(kdim) * plane);
    kernels::im2col(g, x.data().data(), cols->data());
  }
  const double* colp = direct ? x.data().data() : cols->data();

  Array out(Shape{cout, oh, ow});
  double* o = out.data().data();
  if (has_bias) {
    for (int c = 0; c < cout; ++c) std::fill(o + static_cast<std::ptrdiff_t>(c) * plane, o + static_cast<std::ptrdiff_t>(c + 1) * plane, bias.at(static_cast<std::size_t>(c)));
  }
  kernels::gemm_nn(cout, plane, kdim, w.data().data(), colp, o, has_bias);

  auto backward = [g, cout, plane, kdim, direct, has_bias, cols](detail::Node& self) {
    const double* dy = self.grad.data();
    const double* colv = direct ? self.parents[0]->value.data().data() : cols->data();
    if (double* dw = parent_grad(self, 1)) kernels::gemm_nt(cout, kdim, plane, dy, colv, dw, true);
    if (double* dx = parent_grad(self, 0)) {
      const double* wv = self.parents[1]->value.data().data();
      if (direct) {
        kernels::gemm_tn(kdim, plane, cout, wv, dy, dx, true);
      } else {
        std::vector<double> dcols(static_cast<std::size_t>(kdim) * plane);
        kernels::gemm_tn(kdim, plane, cout, wv, dy, dcols.data(), false);
        kernels::col2im(g, dcols.data(), dx);
      }
    }
    if (has_bias) {
      if (double* db = parent_grad(self, 2)) {
        for (int c = 0; c < cout; ++c) {
          const double* row = dy + static_cast<std::ptrdiff_t>(c) * plane;
          db[c] += std::accumulate(row, row + plane, 0.0);
        }
      }
    }
  };
  if (has_bias) return make_result(std::move(out), {&x, &w, &bias}, backward);
  return make_result(std::move(out), {&x, &w}, backward);
}

// Elementwise -----------------------------------------------------------------

Tensor relu(const Tensor& x) {
  if (t_pattern) t_pattern->record(x.data());
  Array out(x.shape());
  auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return make_result(std::move(out), {&x}, [](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    const auto& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xv[i] > 0.0) dx[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  Array out(x.shape());
  auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double z = xv[i];
    // Branch on sign so exp never overflows.
    out[i] = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return make_result(std::move(out), {&x}, [](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    const double skew = g_fault.load() == testing::Fault::kSigmoidDerivative ? 1.05 : 1.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      dx[i] += self.grad[i] * y * (1.0 - y) * skew;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  Array out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_result(std::move(out), {&a, &b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double* d = parent_grad(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  Array out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result(std::move(out), {&a, &b}, [](detail::Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (double* da = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i] * bv[i];
    if (double* db = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) db[i] += self.grad[i] * av[i];
  });
}

Tensor mul_channels(const Tensor& map, const Tensor& vec) {
  require_rank(map, 3, "mul_channels");
  const int c = map.shape()[0];
  if (!(vec.shape() == Shape{c})) {
    throw ShapeError("mul_channels: vector " + vec.shape().str() + " vs map " + map.shape().str());
  }
  const std::size_t plane = static_cast<std::size_t>(map.shape()[1]) * map.shape()[2];
  Array out(map.shape());
  for (int ch = 0; ch < c; ++ch) {
    const double s = vec.at(static_cast<std::size_t>(ch));
    for (std::size_t p = 0; p < plane; ++p) out[ch * plane + p] = map.at(ch * plane + p) * s;
  }
  return make_result(std::move(out), {&map, &vec}, [c, plane](detail::Node& self) {
    const auto& mv = self.parents[0]->value;
    const auto& vv = self.parents[1]->value;
    double* dm = parent_grad(self, 0);
    double* dv = parent_grad(self, 1);
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = ch * plane + p;
        if (dm) dm[i] += self.grad[i] * vv[static_cast<std::size_t>(ch)];
        acc += self.grad[i] * mv[i];
      }
      if (dv) dv[ch] += acc;
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  Array out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * factor;
  return make_result(std::move(out), {&x}, [factor](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i] * factor;
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis < 0) axis += first.rank();
  if (axis < 0 || axis >= first.rank()) throw ShapeError("concat: axis out of range");
  std::vector<int> dims(first.dims().begin(), first.dims().end());
  int total = 0;
  std::vector<std::size_t> lens;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.rank() != first.rank()) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < s.rank(); ++i) {
      if (i != axis && s[i] != first[i]) throw ShapeError("concat: incompatible shapes " + first.str() + " and " + s.str());
    }
    total += s[axis];
    lens.push_back(static_cast<std::size_t>(s[axis]));
  }
  dims[static_cast<std::size_t>(axis)] = total;
  const Shape out_shape(dims);
  const AxisSplit sp = split_axis(out_shape, axis);
  Array out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t chunk = lens[k] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = parts[k].data().data() + o * chunk;
      std::copy(src, src + chunk, out.data().data() + o * sp.len * sp.inner + offset);
    }
    offset += chunk;
  }
  return make_result(std::move(out), parts, [sp, lens](detail::Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < lens.size(); ++k) {
      const std::size_t chunk = lens[k] * sp.inner;
      if (double* d = parent_grad(self, k)) {
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const double* src = self.grad.data() + o * sp.len * sp.inner + offset;
          for (std::size_t i = 0; i < chunk; ++i) d[o * chunk + i] += src[i];
        }
      }
      offset += chunk;
    }
  });
}

// Reductions and normalization ------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  const AxisSplit sp = split_axis(x.shape(), axis);
  Array out(x.shape());
  const double* xv = x.data().data();
  double* o = out.data().data();
  for (std::size_t a = 0; a < sp.outer; ++a) {
    for (std::size_t b = 0; b < sp.inner; ++b) {
      const std::size_t base = a * sp.len * sp.inner + b;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < sp.len; ++i) mx = std::max(mx, xv[base + i * sp.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < sp.len; ++i) {
        const double e = std::exp(xv[base + i * sp.inner] - mx);
        o[base + i * sp.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < sp.len; ++i) o[base + i * sp.inner] /= z;
    }
  }
  return make_result(std::move(out), {&x}, [sp](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    const double* y = self.value.data().data();
    const double* dy = self.grad.data();
    for (std::size_t a = 0; a < sp.outer; ++a) {
      for (std::size_t b = 0; b < sp.inner; ++b) {
        const std::size_t base = a * sp.len * sp.inner + b;
        double dot = 0.0;
        for (std::size_t i = 0; i < sp.len; ++i) dot += dy[base + i * sp.inner] * y[base + i * sp.inner];
        for (std::size_t i = 0; i < sp.len; ++i) {
          const std::size_t j = base + i * sp.inner;
          dx[j] += y[j] * (dy[j] - dot);
        }
      }
    }
  });
}

Tensor masked_softmax(const Tensor& scores, std::span<const std::uint8_t> key_mask, bool causal) {
  require_rank(scores, 2, "masked_softmax");
  const int nq = scores.shape()[0], nk = scores.shape()[1];
  if (!key_mask.empty() && key_mask.size() != static_cast<std::size_t>(nk)) {
    throw ShapeError("masked_softmax: mask length " + std::to_string(key_mask.size()) + " vs " + std::to_string(nk) + " keys");
  }
  Array out(scores.shape());
  const double* xv = scores.data().data();
  double* o = out.data().data();
  for (int q = 0; q < nq; ++q) {
    const double* row = xv + static_cast<std::ptrdiff_t>(q) * nk;
    double* orow = o + static_cast<std::ptrdiff_t>(q) * nk;
    auto kept = [&](int k) { return !(causal && k > q) && (key_mask.empty() || !key_mask[static_cast<std::size_t>(k)]); };
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < nk; ++k)
      if (kept(k)) mx = std::max(mx, row[k]);
    if (!std::isfinite(mx)) throw ShapeError("masked_softmax: every key masked for query " + std::to_string(q));
    double z = 0.0;
    for (int k = 0; k < nk; ++k) {
      orow[k] = kept(k) ? std::exp(row[k] - mx) : 0.0;
      z += orow[k];
    }
    for (int k = 0; k < nk; ++k) orow[k] /= z;
  }
  return make_result(std::move(out), {&scores}, [nq, nk](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    const double* y = self.value.data().data();
    const double* dy = self.grad.data();
    for (int q = 0; q < nq; ++q) {
      const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(q) * nk;
      double dot = 0.0;
      for (int k = 0; k < nk; ++k) dot += dy[base + k] * y[base + k];
      for (int k = 0; k < nk; ++k) dx[base + k] += y[base + k] * (dy[base + k] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  constexpr double kEps = 1e-5;
  const int rank = x.shape().rank();
  if (rank < 1) throw ShapeError("layer_norm: scalar input");
  const int d = x.shape()[rank - 1];
  if (!(gain.shape() == Shape{d}) || !(bias.shape() == Shape{d})) {
    throw ShapeError("layer_norm: gain/bias must have length " + std::to_string(d));
  }
  const std::size_t rows = x.size() / static_cast<std::size_t>(d);
  Array out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    double mu = 0.0;
    for (int i = 0; i < d; ++i) mu += xr[i];
    mu /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + kEps);
    (*inv_std)[r] = is;
    for (int i = 0; i < d; ++i) {
      const double h = (xr[i] - mu) * is;
      (*xhat)[r * d + i] = h;
      out[r * d + i] = h * gain.at(static_cast<std::size_t>(i)) + bias.at(static_cast<std::size_t>(i));
    }
  }
  return make_result(std::move(out), {&x, &gain, &bias}, [rows, d, xhat, inv_std](detail::Node& self) {
    const double* dy = self.grad.data();
    const auto& g = self.parents[1]->value;
    double* dx = parent_grad(self, 0);
    double* dg = parent_grad(self, 1);
    double* db = parent_grad(self, 2);
    std::vector<double> dh(static_cast<std::size_t>(d));
    for (std::size_t r = 0; r < rows; ++r) {
      const double* h = xhat->data() + r * d;
      const double* dyr = dy + r * d;
      double mean_dh = 0.0, mean_dh_h = 0.0;
      for (int i = 0; i < d; ++i) {
        if (dg) dg[i] += dyr[i] * h[i];
        if (db) db[i] += dyr[i];
        dh[static_cast<std::size_t>(i)] = dyr[i] * g[static_cast<std::size_t>(i)];
        mean_dh += dh[static_cast<std::size_t>(i)];
        mean_dh_h += dh[static_cast<std::size_t>(i)] * h[i];
      }
      if (!dx) continue;
      mean_dh /= d;
      mean_dh_h /= d;
      const double is = (*inv_std)[r];
      for (int i = 0; i < d; ++i) dx[r * d + i] += is * (dh[static_cast<std::size_t>(i)] - mean_dh - h[i] * mean_dh_h);
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result(Array(Shape{}, s), {&x}, [](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    const double g = self.grad[0];
    const std::size_t n = self.parents[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) dx[i] += g;
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor logistic_loss(const Tensor& logits, std::span<const std::uint8_t> positive) {
  if (positive.size() != logits.size()) {
    throw ShapeError("logistic_loss: " + std::to_string(positive.size()) + " labels for " +
                     std::to_string(logits.size()) + " logits");
  }
  const std::size_t n = logits.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = logits.at(i);
    total += positive[i] ? softplus(-x) : softplus(x);
  }
  std::vector<std::uint8_t> labels(positive.begin(), positive.end());
  return make_result(Array(Shape{}, total / static_cast<double>(n)), {&logits},
                     [labels = std::move(labels), n](detail::Node& self) {
                       double* dx = parent_grad(self, 0);
                       const double g = self.grad[0] / static_cast<double>(n);
                       const auto& xv = self.parents[0]->value;
                       for (std::size_t i = 0; i < n; ++i) {
                         const double z = xv[i];
                         const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                         dx[i] += g * (s - (labels[i] ? 1.0 : 0.0));
                       }
                     });
}

// Resampling ------------------------------------------------------------------

Tensor avgpool2(const Tensor& x) {
  require_rank(x, 3, "avgpool2");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (h % 2 || w % 2) throw ShapeError("avgpool2: odd spatial extents " + x.shape().str());
  const int oh = h / 2, ow = w / 2;
  Array out(Shape{c, oh, ow});
  const double* xv = x.data().data();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int z = 0; z < ow; ++z) {
        const double* p = xv + (static_cast<std::ptrdiff_t>(ch) * h + 2 * y) * w + 2 * z;
        out[(static_cast<std::size_t>(ch) * oh + y) * ow + z] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  return make_result(std::move(out), {&x}, [c, h, w, oh, ow](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int z = 0; z < ow; ++z) {
          const double g = 0.25 * self.grad[(static_cast<std::size_t>(ch) * oh + y) * ow + z];
          double* p = dx + (static_cast<std::ptrdiff_t>(ch) * h + 2 * y) * w + 2 * z;
          p[0] += g;
          p[1] += g;
          p[w] += g;
          p[w + 1] += g;
        }
  });
}

namespace {

struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

Taps corner_aligned_taps(int in, int out) {
  Taps t;
  t.lo.resize(static_cast<std::size_t>(out));
  t.hi.resize(static_cast<std::size_t>(out));
  t.frac.resize(static_cast<std::size_t>(out));
  for (int o = 0; o < out; ++o) {
    const double src = out > 1 ? static_cast<double>(o) * (in - 1) / (out - 1) : 0.0;
    int lo = std::min(static_cast<int>(std::floor(src)), in - 1);
    const auto i = static_cast<std::size_t>(o);
    t.lo[i] = lo;
    t.hi[i] = std::min(lo + 1, in - 1);
    t.frac[i] = src - lo;
  }
  return t;
}

}  // namespace

Tensor upsample_to(const Tensor& x, int out_h, int out_w) {
  require_rank(x, 3, "upsample");
  if (out_h < 1 || out_w < 1) throw ShapeError("upsample: non-positive output size");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  auto ty = std::make_shared<Taps>(corner_aligned_taps(h, out_h));
  auto tx = std::make_shared<Taps>(corner_aligned_taps(w, out_w));
  Array out(Shape{c, out_h, out_w});
  const double* xv = x.data().data();
  for (int ch = 0; ch < c; ++ch) {
    const double* plane = xv + static_cast<std::ptrdiff_t>(ch) * h * w;
    for (int y = 0; y < out_h; ++y) {
      const auto iy = static_cast<std::size_t>(y);
      const double fy = ty->frac[iy];
      const double* r0 = plane + static_cast<std::ptrdiff_t>(ty->lo[iy]) * w;
      const double* r1 = plane + static_cast<std::ptrdiff_t>(ty->hi[iy]) * w;
      double* orow = out.data().data() + (static_cast<std::ptrdiff_t>(ch) * out_h + y) * out_w;
      for (int z = 0; z < out_w; ++z) {
        const auto iz = static_cast<std::size_t>(z);
        const double fx = tx->frac[iz];
        const int a = tx->lo[iz], b = tx->hi[iz];
        const double top = r0[a] * (1.0 - fx) + r0[b] * fx;
        const double bot = r1[a] * (1.0 - fx) + r1[b] * fx;
        orow[z] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return make_result(std::move(out), {&x}, [c, h, w, out_h, out_w, ty, tx](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    for (int ch = 0; ch < c; ++ch) {
      double* plane = dx + static_cast<std::ptrdiff_t>(ch) * h * w;
      for (int y = 0; y < out_h; ++y) {
        const auto iy = static_cast<std::size_t>(y);
        const double fy = ty->frac[iy];
        double* r0 = plane + static_cast<std::ptrdiff_t>(ty->lo[iy]) * w;
        double* r1 = plane + static_cast<std::ptrdiff_t>(ty->hi[iy]) * w;
        const double* grow = self.grad.data() + (static_cast<std::ptrdiff_t>(ch) * out_h + y) * out_w;
        for (int z = 0; z < out_w; ++z) {
          const auto iz = static_cast<std::size_t>(z);
          const double fx = tx->frac[iz];
          const int a = tx->lo[iz], b = tx->hi[iz];
          const double g = grow[z];
          r0[a] += g * (1.0 - fy) * (1.0 - fx);
          r0[b] += g * (1.0 - fy) * fx;
          r1[a] += g * fy * (1.0 - fx);
          r1[b] += g * fy * fx;
        }
      }
    }
  });
}

Tensor upsample(const Tensor& x, int factor) {
  require_rank(x, 3, "upsample");
  return upsample_to(x, x.shape()[1] * factor, x.shape()[2] * factor);
}

Tensor resample(const Tensor& x, Resample mode) {
  switch (mode) {
    case Resample::kAvgPool2:
      return avgpool2(x);
    case Resample::kUp2:
      return upsample(x, 2);
    case Resample::kUp4:
      return upsample(x, 4);
  }
  throw ShapeError("resample: unknown mode");
}

// Indexing ----------------------------------------------------------------------

Tensor slice_cols(const Tensor& x, int begin, int count) {
  require_rank(x, 2, "slice_cols");
  const int r = x.shape()[0], c = x.shape()[1];
  if (begin < 0 || count < 1 || begin + count > c) throw ShapeError("slice_cols: range outside " + x.shape().str());
  Array out(Shape{r, count});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < count; ++j)
      out[static_cast<std::size_t>(i) * count + j] = x.at(static_cast<std::size_t>(i) * c + begin + j);
  return make_result(std::move(out), {&x}, [r, c, begin, count](detail::Node& self) {
    double* dx = parent_grad(self, 0);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < count; ++j) dx[static_cast<std::size_t>(i) * c + begin + j] += self.grad[static_cast<std::size_t>(i) * count + j];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  require_rank(table, 2, "gather_rows");
  const int v = table.shape()[0], c = table.shape()[1];
  std::vector<int> rows(ids.begin(), ids.end());
  if (rows.empty()) throw ShapeError("gather_rows: no ids");
  Array out(Shape{static_cast<int>(rows.size()), c});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= v) throw ShapeError("gather_rows: id " + std::to_string(rows[r]) + " outside table");
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(rows[r]) * c, c, out.data().begin() + static_cast<std::ptrdiff_t>(r) * c);
  }
  return make_result(std::move(out), {&table}, [rows = std::move(rows), c](detail::Node& self) {
    double* dt = parent_grad(self, 0);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (int j = 0; j < c; ++j) dt[static_cast<std::ptrdiff_t>(rows[r]) * c + j] += self.grad[r * static_cast<std::size_t>(c) + static_cast<std::size_t>(j)];
  });
}

Tensor select_row(const Tensor& x, int index) {
  require_rank(x, 2, "select_row");
  const int r = x.shape()[0], c = x.shape()[1];
  if (index < 0 || index >= r) throw ShapeError("select_row: index outside " + x.shape().str());
  const auto first = x.data().begin() + static_cast<std::ptrdiff_t>(index) * c;
  Array out(Shape{c}, std::vector<double>(first, first + c));
  return make_result(std::move(out), {&x}, [index, c](detail::Node& self) {
    double* dx = parent_grad(self, 0) + static_cast<std::ptrdiff_t>(index) * c;
    for (int j = 0; j < c; ++j) dx[j] += self.grad[static_cast<std::size_t>(j)];
  });
}

Tensor flatten_map(const Tensor& map) {
  require_rank(map, 3, "flatten_map");
  const int c = map.shape()[0];
  return transpose(reshape(map, Shape{c, map.shape()[1] * map.shape()[2]}));
}

Tensor unflatten_map(const Tensor& seq, int height, int width) {
  require_rank(seq, 2, "unflatten_map");
  if (seq.shape()[0] != height * width) {
    throw ShapeError("unflatten_map: " + std::to_string(seq.shape()[0]) + " tokens do not fill a " +
                     std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  return reshape(transpose(seq), Shape{seq.shape()[1], height, width});
}

namespace testing {

void set_fault(Fault fault) { g_fault.store(fault); }
Fault fault() { return g_fault.load(); }

ActivationPattern::ActivationPattern() : previous_(t_pattern) { t_pattern = this; }
ActivationPattern::~ActivationPattern() { t_pattern = previous_; }

void ActivationPattern::record(std::span<const double> pre_activation) {
  for (double v : pre_activation) bits_.push_back(v > 0.0);
}

std::vector<bool> ActivationPattern::take() { return std::exchange(bits_, {}); }

}  // namespace testing

}  // namespace cris
