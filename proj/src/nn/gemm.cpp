#include "gemm.hpp"

#include <algorithm>
#include <cstring>

namespace deepnotch::nn::detail {

namespace {

constexpr int kRows = 4;
constexpr int kCols = 32;

// A(i, k) = A[i * row_stride + k * col_stride]. Register-blocked over a
// kRows x kCols tile of C with the full K reduction kept in the accumulator.
void gemm_strided(int M, int N, int K, const float* A, int row_stride, int col_stride,
                  const float* B, float* C, bool accumulate) {
  for (int j0 = 0; j0 < N; j0 += kCols) {
    const int nb = std::min(kCols, N - j0);
    int i = 0;
    if (nb == kCols) {
      for (; i + kRows <= M; i += kRows) {
        float acc[kRows][kCols] = {};
        for (int k = 0; k < K; ++k) {
          const float* b = B + static_cast<long>(k) * N + j0;
          for (int r = 0; r < kRows; ++r) {
            const float a = A[static_cast<long>(i + r) * row_stride + static_cast<long>(k) * col_stride];
            for (int j = 0; j < kCols; ++j) acc[r][j] += a * b[j];
          }
        }
        for (int r = 0; r < kRows; ++r) {
          float* c = C + static_cast<long>(i + r) * N + j0;
          if (accumulate) {
            for (int j = 0; j < kCols; ++j) c[j] += acc[r][j];
          } else {
            for (int j = 0; j < kCols; ++j) c[j] = acc[r][j];
          }
        }
      }
    }
    for (; i < M; ++i) {
      float acc[kCols] = {};
      for (int k = 0; k < K; ++k) {
        const float a = A[static_cast<long>(i) * row_stride + static_cast<long>(k) * col_stride];
        const float* b = B + static_cast<long>(k) * N + j0;
        for (int j = 0; j < nb; ++j) acc[j] += a * b[j];
      }
      float* c = C + static_cast<long>(i) * N + j0;
      if (accumulate) {
        for (int j = 0; j < nb; ++j) c[j] += acc[j];
      } else {
        for (int j = 0; j < nb; ++j) c[j] = acc[j];
      }
    }
  }
}

}  // namespace

void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate) {
  gemm_strided(M, N, K, A, K, 1, B, C, accumulate);
}

void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate) {
  gemm_strided(M, N, K, A, 1, M, B, C, accumulate);
}

void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate) {
  for (int i = 0; i < M; ++i) {
    const float* a = A + static_cast<long>(i) * K;
    int j = 0;
    for (; j + 4 <= N; j += 4) {
      const float* b0 = B + static_cast<long>(j) * K;
      const float* b1 = b0 + K;
      const float* b2 = b1 + K;
      const float* b3 = b2 + K;
      float s0 = 0, s1 = 0, s2 = 0, s3 = 0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
      for (int k = 0; k < K; ++k) {
        s0 += a[k] * b0[k];
        s1 += a[k] * b1[k];
        s2 += a[k] * b2[k];
        s3 += a[k] * b3[k];
      }
      float* c = C + static_cast<long>(i) * N + j;
      if (accumulate) {
        c[0] += s0;
        c[1] += s1;
        c[2] += s2;
        c[3] += s3;
      } else {
        c[0] = s0;
        c[1] = s1;
        c[2] = s2;
        c[3] = s3;
      }
    }
    for (; j < N; ++j) {
      const float* b = B + static_cast<long>(j) * K;
      float s = 0;
#pragma omp simd reduction(+ : s)
      for (int k = 0; k < K; ++k) s += a[k] * b[k];
      float& c = C[static_cast<long>(i) * N + j];
      c = accumulate ? c + s : s;
    }
  }
}

}  // namespace deepnotch::nn::detail
