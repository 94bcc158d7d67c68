#pragma once

// Reduction and update kernels for the GLM inner loops. A scalar reference
// implementation is always present; AVX2 (x86-64) and NEON (aarch64) variants
// are compiled when the toolchain allows and selected at runtime. Set
// GRAVFLOW_SIMD=scalar|avx2|neon to force a variant (falls back to scalar if
// the requested one is unavailable).
//
// Vector variants sum in lane-strided order, so their results differ from the
// scalar reference by rounding only. The selection is fixed for the life of
// the process, which keeps every run on one machine bit-reproducible.

#include <cstddef>
#include <span>
#include <string_view>

namespace gravflow::simd {

enum class Isa { scalar, avx2, neon };

struct Kernels {
    Isa isa;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*weighted_dot)(const double* w, const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*sum_abs_diff)(const double* a, const double* b, std::size_t n);
    double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
};

std::string_view name(Isa isa);

const Kernels& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks it.
const Kernels* avx2_kernels();
const Kernels* neon_kernels();

const Kernels& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}
inline double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b) {
    return active().weighted_dot(w.data(), a.data(), b.data(), w.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

namespace detail {
extern const Kernels kScalar;
extern const Kernels kAvx2;
extern const Kernels kNeon;
}  // namespace detail

}  // namespace gravflow::simd
