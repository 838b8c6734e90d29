// Compiled with -mavx2 -mfma when the toolchain supports it; the dispatcher
// only hands out this table after checking CPU support at runtime.
#include "iforge/kernels.hpp"

#if defined(IFORGE_BUILD_AVX2)

#include <immintrin.h>

namespace iforge::kernels {
namespace {

// Horizontal sum with a fixed reduction order so results are reproducible.
inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s2 = _mm_add_pd(lo, hi);           // (v0+v2, v1+v3)
    const __m128d s1 = _mm_unpackhi_pd(s2, s2);
    return _mm_cvtsd_f64(_mm_add_sd(s2, s1));        // (v0+v2) + (v1+v3)
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sqdist_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void relu_avx2(double* y, const double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

} // namespace

const KernelTable* avx2_table() {
#if defined(__GNUC__) || defined(__clang__)
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
#endif
    static const KernelTable t{"avx2", dot_avx2, sqdist_avx2, axpy_avx2, relu_avx2};
    return &t;
}

} // namespace iforge::kernels

#else

namespace iforge::kernels {
const KernelTable* avx2_table() { return nullptr; }
} // namespace iforge::kernels

#endif
