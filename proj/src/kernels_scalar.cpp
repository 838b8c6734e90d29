#include "iforge/kernels.hpp"

namespace iforge::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sqdist_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void relu_scalar(double* y, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{"scalar", dot_scalar, sqdist_scalar, axpy_scalar, relu_scalar};
    return t;
}

} // namespace iforge::kernels
