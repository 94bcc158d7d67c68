#include <cstdlib>
#include <string>

#include "gravflow/simd/kernels.hpp"

namespace gravflow::simd {

std::string_view name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "?";
}

const Kernels& scalar_kernels() { return detail::kScalar; }

const Kernels* avx2_kernels() {
#if defined(GRAVFLOW_HAVE_AVX2)
    static const bool ok = __builtin_cpu_supports("avx2");
    return ok ? &detail::kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const Kernels* neon_kernels() {
#if defined(GRAVFLOW_HAVE_NEON)
    return &detail::kNeon;
#else
    return nullptr;
#endif
}

namespace {

const Kernels& select() {
    const char* env = std::getenv("GRAVFLOW_SIMD");
    const std::string want = env ? env : "";
    if (want == "scalar") return scalar_kernels();
    if (want == "avx2") return avx2_kernels() ? *avx2_kernels() : scalar_kernels();
    if (want == "neon") return neon_kernels() ? *neon_kernels() : scalar_kernels();
    if (const Kernels* k = avx2_kernels()) return *k;
    if (const Kernels* k = neon_kernels()) return *k;
    return scalar_kernels();
}

}  // namespace

const Kernels& active() {
    static const Kernels& k = select();
    return k;
}

}  // namespace gravflow::simd
