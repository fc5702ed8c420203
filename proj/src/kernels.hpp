#pragma once

#include <cstddef>

// Small dense kernels used by the differentiable ops. All matrices row-major.
namespace cris::kernels {

// C[m,n] (+)= A[m,k] * B[k,n]
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
// C[m,n] (+)= A[m,k] * B[n,k]^T
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
// C[m,n] (+)= A[k,m]^T * B[k,n]
void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

struct ConvGeometry {
  int channels, height, width;
  int kh, kw, stride, pad;
  int out_h() const { return (height + 2 * pad - kh) / stride + 1; }
  int out_w() const { return (width + 2 * pad - kw) / stride + 1; }
};

// cols[(c*kh+i)*kw+j, oy*out_w+ox]
void im2col(const ConvGeometry& g, const double* x, double* cols);
// Scatter-add inverse of im2col.
void col2im(const ConvGeometry& g, const double* cols, double* dx);

}  // namespace cris::kernels
