#pragma once

// Single-threaded row-major float GEMM kernels used by the convolution layers.
// Results depend only on the operands, never on timing or thread count.

namespace deepnotch::nn::detail {

// C[MxN] (+)= A[MxK] * B[KxN]
void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate);

// C[MxN] (+)= A[MxK] * B[NxK]^T
void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate);

// C[MxN] (+)= A[KxM]^T * B[KxN]
void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate);

}  // namespace deepnotch::nn::detail
