#pragma once

#include <cstddef>
#include <string>

namespace iforge::kernels {

// Flat table of the arithmetic inner loops used by every layer evaluation.
// One table is chosen per process so that values computed while a network is
// being constructed round exactly like values computed when it is evaluated.
struct KernelTable {
    const char* name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sqdist)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double* y, double a, const double* x, std::size_t n); // y += a*x
    void (*relu)(double* y, const double* x, std::size_t n);           // y = max(x, 0)
};

const KernelTable& scalar_table();

// Null when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

// Selected once per process: honors INTERP_FORGE_SIMD=auto|scalar|avx2,
// otherwise picks AVX2 when available.
const KernelTable& active();

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline double sqdist(const double* a, const double* b, std::size_t n) { return active().sqdist(a, b, n); }
inline void axpy(double* y, double a, const double* x, std::size_t n) { active().axpy(y, a, x, n); }
inline void relu(double* y, const double* x, std::size_t n) { active().relu(y, x, n); }

} // namespace iforge::kernels
