#include "ragshield/kernels.hpp"

namespace ragshield::kernels {

float dot(const float* a, const float* b, std::size_t n) noexcept {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

namespace detail {

void score_panels_scalar(const float* panels, std::size_t rows, std::size_t dim,
                         const float* query, float* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* panel = panels + (r / kPanelWidth) * kPanelWidth * dim;
    const std::size_t lane = r % kPanelWidth;
    float acc = 0.0f;
    for (std::size_t j = 0; j < dim; ++j) acc += panel[j * kPanelWidth + lane] * query[j];
    out[r] = acc;
  }
}

void add_into_scalar(float* acc, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
}

void divide_scalar(float* x, float d, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] /= d;
}

}  // namespace detail
}  // namespace ragshield::kernels
