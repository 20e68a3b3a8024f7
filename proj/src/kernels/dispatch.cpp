#include <atomic>
#include <cstdlib>

#include "ragshield/kernels.hpp"

namespace ragshield::kernels {

namespace {

constexpr KernelSet kScalar{Isa::scalar, detail::score_panels_scalar, detail::add_into_scalar,
                            detail::divide_scalar};
#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelSet kAvx2{Isa::avx2, detail::score_panels_avx2, detail::add_into_avx2,
                          detail::divide_avx2};
#endif
#if defined(__ARM_NEON)
constexpr KernelSet kNeon{Isa::neon, detail::score_panels_neon, detail::add_into_neon,
                          detail::divide_neon};
#endif

const KernelSet* best_available() noexcept {
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (const KernelSet* k = kernels_for(isa)) return k;
  }
  return &kScalar;
}

const KernelSet* initial() noexcept {
  if (const char* env = std::getenv("RAGSHIELD_ISA")) {
    if (auto isa = parse_isa(env)) {
      if (const KernelSet* k = kernels_for(*isa)) return k;
    }
  }
  return best_available();
}

std::atomic<const KernelSet*>& slot() noexcept {
  static std::atomic<const KernelSet*> current{initial()};
  return current;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  return std::nullopt;
}

const KernelSet* kernels_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return &kScalar;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (__builtin_cpu_supports("avx2")) return &kAvx2;
#endif
      return nullptr;
    case Isa::neon:
#if defined(__ARM_NEON)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelSet& active() noexcept { return *slot().load(std::memory_order_acquire); }

bool set_active(Isa isa) noexcept {
  const KernelSet* k = kernels_for(isa);
  if (k == nullptr) return false;
  slot().store(k, std::memory_order_release);
  return true;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (kernels_for(isa) != nullptr) out.push_back(isa);
  }
  return out;
}

std::vector<float> pack_panels(std::span<const float> row_major, std::size_t rows,
                               std::size_t dim) {
  std::vector<float> out(panel_storage(rows, dim), 0.0f);
  for (std::size_t r = 0; r < rows; ++r) {
    float* panel = out.data() + (r / kPanelWidth) * kPanelWidth * dim;
    const std::size_t lane = r % kPanelWidth;
    for (std::size_t j = 0; j < dim; ++j) panel[j * kPanelWidth + lane] = row_major[r * dim + j];
  }
  return out;
}

}  // namespace ragshield::kernels
