// Fallback for targets without AVX2 support; avx2_available() is false there,
// so this is never reached through ops().
#include "mpe/kernels.hpp"

namespace mpe::kernels {

const Ops& avx2() { return scalar(); }

}  // namespace mpe::kernels
