#include <cstdlib>
#include <string_view>

#include "reasonforge/kernels.hpp"

namespace reasonforge::kernels {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

namespace {

const KernelTable& select() {
    if (const char* forced = std::getenv("REASONFORGE_SIMD")) {
        if (std::string_view(forced) == "scalar") return scalar_table();
    }
    if (cpu_has_avx2()) {
        if (const KernelTable* t = avx2_table()) return *t;
    }
    return scalar_table();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& table = select();
    return table;
}

}  // namespace reasonforge::kernels
