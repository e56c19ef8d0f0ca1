#include <cstdlib>
#include <string_view>

#include "choicecheck/simd/kernels.hpp"

namespace choicecheck::simd {

#if !CHOICECHECK_HAVE_AVX2
const KernelTable* avx2_kernels() noexcept { return nullptr; }
#endif
#if !CHOICECHECK_HAVE_NEON
const KernelTable* neon_kernels() noexcept { return nullptr; }
#endif

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (const auto* t = avx2_kernels()) out.push_back(t);
  if (const auto* t = neon_kernels()) out.push_back(t);
  return out;
}

namespace {

const KernelTable& select() noexcept {
  const char* env = std::getenv("CHOICE_CHECK_SIMD");
  const std::string_view want = env ? env : "auto";
  if (want == "scalar") return scalar_kernels();
  const KernelTable* avx2 = avx2_kernels();
  const KernelTable* neon = neon_kernels();
  if (want == "avx2" && avx2) return *avx2;
  if (want == "neon" && neon) return *neon;
  if (avx2) return *avx2;
  if (neon) return *neon;
  return scalar_kernels();
}

}  // namespace

const KernelTable& kernels() noexcept {
  static const KernelTable& active = select();
  return active;
}

}  // namespace choicecheck::simd
