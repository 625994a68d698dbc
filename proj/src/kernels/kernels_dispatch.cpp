#include <cstdlib>
#include <cstring>

#include "mpe/kernels.hpp"

namespace mpe::kernels {

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {
const Ops& select() {
    const char* env = std::getenv("MPE_KERNELS");
    if (env) {
        if (std::strcmp(env, "scalar") == 0) return scalar();
        if (std::strcmp(env, "avx2") == 0 && avx2_available()) return avx2();
    }
    return avx2_available() ? avx2() : scalar();
}
}  // namespace

const Ops& ops() {
    static const Ops& chosen = select();
    return chosen;
}

}  // namespace mpe::kernels
