#include "ragshield/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <cstring>

namespace ragshield::kernels::detail {

// Compiled with target("avx2") only: FMA stays disabled, so each lane does a
// rounded multiply followed by a rounded add, as the scalar loop does.
__attribute__((target("avx2"))) void score_panels_avx2(const float* panels, std::size_t rows,
                                                        std::size_t dim, const float* query,
                                                        float* out) {
  const std::size_t full = rows / kPanelWidth;
  for (std::size_t p = 0; p < full; ++p) {
    const float* panel = panels + p * kPanelWidth * dim;
    __m256 acc = _mm256_setzero_ps();
    for (std::size_t j = 0; j < dim; ++j) {
      __m256 x = _mm256_loadu_ps(panel + j * kPanelWidth);
      __m256 q = _mm256_set1_ps(query[j]);
      acc = _mm256_add_ps(acc, _mm256_mul_ps(x, q));
    }
    _mm256_storeu_ps(out + p * kPanelWidth, acc);
  }
  const std::size_t tail = rows - full * kPanelWidth;
  if (tail != 0) {
    const float* panel = panels + full * kPanelWidth * dim;
    __m256 acc = _mm256_setzero_ps();
    for (std::size_t j = 0; j < dim; ++j) {
      __m256 x = _mm256_loadu_ps(panel + j * kPanelWidth);
      acc = _mm256_add_ps(acc, _mm256_mul_ps(x, _mm256_set1_ps(query[j])));
    }
    alignas(32) float lanes[kPanelWidth];
    _mm256_store_ps(lanes, acc);
    std::memcpy(out + full * kPanelWidth, lanes, tail * sizeof(float));
  }
}

__attribute__((target("avx2"))) void add_into_avx2(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(acc + i, _mm256_add_ps(_mm256_loadu_ps(acc + i), _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) acc[i] += x[i];
}

__attribute__((target("avx2"))) void divide_avx2(float* x, float d, std::size_t n) {
  const __m256 dv = _mm256_set1_ps(d);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_div_ps(_mm256_loadu_ps(x + i), dv));
  for (; i < n; ++i) x[i] /= d;
}

}  // namespace ragshield::kernels::detail
#endif
