#pragma once

// Data-parallel inner loops behind similarity search and mean pooling.
//
// Every variant must produce results bit-identical to the scalar reference.
// Reductions are therefore never split across SIMD lanes: the panel scorer
// assigns one database row per lane and walks the dimension left to right,
// so each lane performs exactly the multiply/add sequence of the scalar dot
// product. Elementwise kernels are trivially order-preserving. The build
// disables floating-point contraction so no FMA is substituted for mul+add.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ragshield::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;

/// Rows per panel. Row r, dimension j lives at panel(r / 8)[j * 8 + r % 8].
inline constexpr std::size_t kPanelWidth = 8;

struct KernelSet {
  Isa isa;
  /// out[r] = dot(row r, query) for r < rows, accumulated left to right in f32.
  void (*score_panels)(const float* panels, std::size_t rows, std::size_t dim,
                       const float* query, float* out);
  /// acc[i] += x[i]
  void (*add_into)(float* acc, const float* x, std::size_t n);
  /// x[i] /= d
  void (*divide)(float* x, float d, std::size_t n);
};

/// Scalar left-to-right f32 dot product. The reference every kernel matches.
float dot(const float* a, const float* b, std::size_t n) noexcept;

/// Kernel set for an ISA, or nullptr when it is not compiled in or the CPU
/// lacks it.
const KernelSet* kernels_for(Isa isa) noexcept;

/// Kernels used by the library. Chosen on first use: the RAGSHIELD_ISA
/// environment variable if set and supported, else the best available.
const KernelSet& active() noexcept;

/// Override the active kernel set. Returns false if unsupported.
bool set_active(Isa isa) noexcept;

std::vector<Isa> available_isas();

/// Row-major -> panel layout. Padding lanes are zero.
std::vector<float> pack_panels(std::span<const float> row_major, std::size_t rows,
                               std::size_t dim);

inline std::size_t panel_storage(std::size_t rows, std::size_t dim) noexcept {
  return (rows + kPanelWidth - 1) / kPanelWidth * kPanelWidth * dim;
}

namespace detail {
void score_panels_scalar(const float*, std::size_t, std::size_t, const float*, float*);
void add_into_scalar(float*, const float*, std::size_t);
void divide_scalar(float*, float, std::size_t);
#if defined(__x86_64__) || defined(_M_X64)
void score_panels_avx2(const float*, std::size_t, std::size_t, const float*, float*);
void add_into_avx2(float*, const float*, std::size_t);
void divide_avx2(float*, float, std::size_t);
#endif
#if defined(__ARM_NEON)
void score_panels_neon(const float*, std::size_t, std::size_t, const float*, float*);
void add_into_neon(float*, const float*, std::size_t);
void divide_neon(float*, float, std::size_t);
#endif
}  // namespace detail

}  // namespace ragshield::kernels
