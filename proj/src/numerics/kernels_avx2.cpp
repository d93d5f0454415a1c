// Copyright 2026 The HybridMT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hmt/kernels.hpp"

#if HMT_HAVE_AVX2_KERNELS

#include <immintrin.h>

// Built without -mavx2; each function opts in through the target attribute so
// the rest of the library stays runnable on any x86-64 CPU.
#define HMT_AVX2 __attribute__((target("avx2")))

namespace hmt::kernels::avx2 {

namespace {

// Separate multiply and add (no FMA) keeps rounding identical to scalar::axpy.
HMT_AVX2 inline void axpy_impl(double alpha, const double* x, double* y,
                               std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d y0 = _mm256_loadu_pd(y + j);
    __m256d y1 = _mm256_loadu_pd(y + j + 4);
    __m256d y2 = _mm256_loadu_pd(y + j + 8);
    __m256d y3 = _mm256_loadu_pd(y + j + 12);
    y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + j)));
    y1 = _mm256_add_pd(y1, _mm256_mul_pd(va, _mm256_loadu_pd(x + j + 4)));
    y2 = _mm256_add_pd(y2, _mm256_mul_pd(va, _mm256_loadu_pd(x + j + 8)));
    y3 = _mm256_add_pd(y3, _mm256_mul_pd(va, _mm256_loadu_pd(x + j + 12)));
    _mm256_storeu_pd(y + j, y0);
    _mm256_storeu_pd(y + j + 4, y1);
    _mm256_storeu_pd(y + j + 8, y2);
    _mm256_storeu_pd(y + j + 12, y3);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d yv = _mm256_loadu_pd(y + j);
    yv = _mm256_add_pd(yv, _mm256_mul_pd(va, _mm256_loadu_pd(x + j)));
    _mm256_storeu_pd(y + j, yv);
  }
  for (; j < n; ++j) y[j] += alpha * x[j];
}

HMT_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

HMT_AVX2 inline double dot_impl(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + j),
                                             _mm256_loadu_pd(y + j)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(x + j + 4),
                                             _mm256_loadu_pd(y + j + 4)));
  }
  for (; j + 4 <= n; j += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + j),
                                             _mm256_loadu_pd(y + j)));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; j < n; ++j) acc += x[j] * y[j];
  return acc;
}

}  // namespace

HMT_AVX2 void axpy(double alpha, const double* x, double* y, std::size_t n) {
  axpy_impl(alpha, x, y, n);
}

HMT_AVX2 double dot(const double* x, const double* y, std::size_t n) {
  return dot_impl(x, y, n);
}

HMT_AVX2 void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c_row = c + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy_impl(a[i * k + p], b + p * n, c_row, n);
  }
}

HMT_AVX2 void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot_impl(a + i * k, b + j * k, k);
  }
}

HMT_AVX2 void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* b_row = b + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy_impl(a[i * k + p], b_row, c + p * n, n);
  }
}

}  // namespace hmt::kernels::avx2

#endif  // HMT_HAVE_AVX2_KERNELS
