#pragma once

#include <cstddef>

// Low-level numeric kernels used by the ODE integrator, field algebra and the
// control networks. Every kernel has a scalar reference implementation and an
// AVX2+FMA variant; the active set is chosen once at startup (see ops()).
// The AVX2 variants are equivalence-tested against the scalar ones.
namespace mpe::kernels {

struct Ops {
    // y[i] += a * x[i]
    void (*axpy)(double* y, double a, const double* x, std::size_t n);
    // out[i] = y[i] + h * sum_j c[j] * ks[j][i]   (nk <= 8)
    void (*stage_combine)(double* out, const double* y, double h,
                          const double* const* ks, const double* c, int nk,
                          std::size_t n);
    // sqrt( (1/n) * sum_i ( err[i] / (atol + rtol*max(|y0[i]|,|y1[i]|)) )^2 )
    double (*wrms)(const double* err, const double* y0, const double* y1,
                   double atol, double rtol, std::size_t n);
    double (*sumsq)(const double* x, std::size_t n);
    double (*sumsq_diff)(const double* x, const double* y, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    // out[i] = max(lo, (1-w)*a[i] + w*b[i])
    void (*lerp_clamp)(double* out, const double* a, const double* b, double w,
                       double lo, std::size_t n);
    // out[i] = max(0, -l[i]*p[i])   (quadratic-cost Hamiltonian minimizer)
    void (*relu_neg_prod)(double* out, const double* l, const double* p,
                          std::size_t n);
    // y[r] = sum_c W[r*n+c]*x[c] + (bias ? bias[r] : 0),  r < m
    void (*gemv)(double* y, const double* W, const double* x,
                 const double* bias, std::size_t m, std::size_t n);
    // xg[c] += sum_r W[r*n+c]*gy[r]
    void (*gemv_t_acc)(double* xg, const double* W, const double* gy,
                       std::size_t m, std::size_t n);
    // G[r*n+c] += gy[r]*x[c]
    void (*ger_acc)(double* G, const double* gy, const double* x,
                    std::size_t m, std::size_t n);
    const char* name;
};

const Ops& scalar();
bool avx2_available();
const Ops& avx2();  // only valid when avx2_available()

// Active kernel set. Picks AVX2 when the CPU supports it; the environment
// variable MPE_KERNELS=scalar|avx2 forces a backend.
const Ops& ops();

}  // namespace mpe::kernels
