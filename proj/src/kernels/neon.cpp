#include "ragshield/kernels.hpp"

#if defined(__ARM_NEON)
#include <arm_neon.h>

namespace ragshield::kernels::detail {

// vmulq/vaddq, never vfmaq: the panel scorer must match the scalar loop
// bit for bit. A panel of 8 rows is two 4-lane halves.
void score_panels_neon(const float* panels, std::size_t rows, std::size_t dim,
                       const float* query, float* out) {
  const std::size_t n_panels = (rows + kPanelWidth - 1) / kPanelWidth;
  for (std::size_t p = 0; p < n_panels; ++p) {
    const float* panel = panels + p * kPanelWidth * dim;
    float32x4_t lo = vdupq_n_f32(0.0f);
    float32x4_t hi = vdupq_n_f32(0.0f);
    for (std::size_t j = 0; j < dim; ++j) {
      const float32x4_t q = vdupq_n_f32(query[j]);
      lo = vaddq_f32(lo, vmulq_f32(vld1q_f32(panel + j * kPanelWidth), q));
      hi = vaddq_f32(hi, vmulq_f32(vld1q_f32(panel + j * kPanelWidth + 4), q));
    }
    float lanes[kPanelWidth];
    vst1q_f32(lanes, lo);
    vst1q_f32(lanes + 4, hi);
    const std::size_t base = p * kPanelWidth;
    for (std::size_t l = 0; l < kPanelWidth && base + l < rows; ++l) out[base + l] = lanes[l];
  }
}

void add_into_neon(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(acc + i, vaddq_f32(vld1q_f32(acc + i), vld1q_f32(x + i)));
  for (; i < n; ++i) acc[i] += x[i];
}

void divide_neon(float* x, float d, std::size_t n) {
#if defined(__aarch64__)
  const float32x4_t dv = vdupq_n_f32(d);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vdivq_f32(vld1q_f32(x + i), dv));
  for (; i < n; ++i) x[i] /= d;
#else
  // ARMv7 NEON has no correctly rounded divide.
  for (std::size_t i = 0; i < n; ++i) x[i] /= d;
#endif
}

}  // namespace ragshield::kernels::detail
#endif
