#include "kernels.hpp"

#include <algorithm>

namespace cris::kernels {

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::ptrdiff_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    const double* arow = a + static_cast<std::ptrdiff_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::ptrdiff_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::ptrdiff_t>(i) * k;
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::ptrdiff_t>(j) * k;
      // Four partial sums let the compiler vectorize the reduction.
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      int p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += arow[p] * brow[p];
        s1 += arow[p + 1] * brow[p + 1];
        s2 += arow[p + 2] * brow[p + 2];
        s3 += arow[p + 3] * brow[p + 3];
      }
      for (; p < k; ++p) s0 += arow[p] * brow[p];
      const double s = (s0 + s1) + (s2 + s3);
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::ptrdiff_t>(m) * n, 0.0);
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::ptrdiff_t>(p) * m;
    const double* brow = b + static_cast<std::ptrdiff_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const int oh = g.out_h(), ow = g.out_w();
  const int plane = oh * ow;
  double* out = cols;
  for (int c = 0; c < g.channels; ++c) {
    const double* xc = x + static_cast<std::ptrdiff_t>(c) * g.height * g.width;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j, out += plane) {
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * g.stride - g.pad + i;
          double* row = out + static_cast<std::ptrdiff_t>(oy) * ow;
          if (y < 0 || y >= g.height) {
            std::fill(row, row + ow, 0.0);
            continue;
          }
          const double* xrow = xc + static_cast<std::ptrdiff_t>(y) * g.width;
          for (int ox = 0; ox < ow; ++ox) {
            const int xx = ox * g.stride - g.pad + j;
            row[ox] = (xx >= 0 && xx < g.width) ? xrow[xx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* cols, double* dx) {
  const int oh = g.out_h(), ow = g.out_w();
  const int plane = oh * ow;
  const double* in = cols;
  for (int c = 0; c < g.channels; ++c) {
    double* dxc = dx + static_cast<std::ptrdiff_t>(c) * g.height * g.width;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j, in += plane) {
        for (int oy = 0; oy < oh; ++oy) {
          const int y = oy * g.stride - g.pad + i;
          if (y < 0 || y >= g.height) continue;
          const double* row = in + static_cast<std::ptrdiff_t>(oy) * ow;
          double* dxrow = dxc + static_cast<std::ptrdiff_t>(y) * g.width;
          for (int ox = 0; ox < ow; ++ox) {
            const int xx = ox * g.stride - g.pad + j;
            if (xx >= 0 && xx < g.width) dxrow[xx] += row[ox];
          }
        }
      }
    }
  }
}

}  // namespace cris::kernels
