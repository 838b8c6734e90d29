#include "iforge/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace iforge::kernels {
namespace {

const KernelTable& select() {
    const char* pref = std::getenv("INTERP_FORGE_SIMD");
    const std::string mode = pref ? pref : "auto";
    if (mode == "scalar") return scalar_table();
    if (mode == "avx2") {
        const KernelTable* t = avx2_table();
        if (!t) throw std::runtime_error("INTERP_FORGE_SIMD=avx2 but AVX2 is unavailable");
        return *t;
    }
    if (mode != "auto" && !mode.empty())
        throw std::runtime_error("INTERP_FORGE_SIMD must be auto, scalar, or avx2");
    const KernelTable* t = avx2_table();
    return t ? *t : scalar_table();
}

} // namespace

const KernelTable& active() {
    static const KernelTable& t = select();
    return t;
}

} // namespace iforge::kernels
