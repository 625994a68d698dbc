// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; it must not be entered unless avx2_available() is true.
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mpe/kernels.hpp"

namespace mpe::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

void axpy_v(double* y, double a, const double* x, std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void stage_combine_v(double* out, const double* y, double h,
                     const double* const* ks, const double* c, int nk,
                     std::size_t n) {
    double hc[8];
    for (int j = 0; j < nk; ++j) hc[j] = h * c[j];
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_loadu_pd(y + i);
        for (int j = 0; j < nk; ++j)
            acc = _mm256_fmadd_pd(_mm256_set1_pd(hc[j]),
                                  _mm256_loadu_pd(ks[j] + i), acc);
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) {
        double acc = y[i];
        for (int j = 0; j < nk; ++j) acc += hc[j] * ks[j][i];
        out[i] = acc;
    }
}

double wrms_v(const double* err, const double* y0, const double* y1,
              double atol, double rtol, std::size_t n) {
    __m256d vatol = _mm256_set1_pd(atol);
    __m256d vrtol = _mm256_set1_pd(rtol);
    __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d a0 = _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(y0 + i));
        __m256d a1 = _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(y1 + i));
        __m256d sk = _mm256_fmadd_pd(vrtol, _mm256_max_pd(a0, a1), vatol);
        __m256d r = _mm256_div_pd(_mm256_loadu_pd(err + i), sk);
        acc = _mm256_fmadd_pd(r, r, acc);
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        double sk = atol + rtol * std::max(std::fabs(y0[i]), std::fabs(y1[i]));
        double r = err[i] / sk;
        total += r * r;
    }
    return std::sqrt(total / static_cast<double>(n));
}

double sumsq_v(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double total = hsum(acc);
    for (; i < n; ++i) total += x[i] * x[i];
    return total;
}

double sumsq_diff_v(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        double d = x[i] - y[i];
        total += d * d;
    }
    return total;
}

double dot_v(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                              acc);
    double total = hsum(acc);
    for (; i < n; ++i) total += x[i] * y[i];
    return total;
}

void lerp_clamp_v(double* out, const double* a, const double* b, double w,
                  double lo, std::size_t n) {
    __m256d vw = _mm256_set1_pd(w);
    __m256d vu = _mm256_set1_pd(1.0 - w);
    __m256d vlo = _mm256_set1_pd(lo);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_mul_pd(vu, _mm256_loadu_pd(a + i));
        __m256d v = _mm256_fmadd_pd(vw, _mm256_loadu_pd(b + i), va);
        _mm256_storeu_pd(out + i, _mm256_max_pd(vlo, v));
    }
    double u = 1.0 - w;
    for (; i < n; ++i) out[i] = std::max(lo, u * a[i] + w * b[i]);
}

void relu_neg_prod_v(double* out, const double* l, const double* p,
                     std::size_t n) {
    __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(l + i), _mm256_loadu_pd(p + i));
        _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_sub_pd(zero, prod)));
    }
    for (; i < n; ++i) out[i] = std::max(0.0, -l[i] * p[i]);
}

void gemv_v(double* y, const double* W, const double* x, const double* bias,
            std::size_t m, std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = W + r * n;
        __m256d acc = _mm256_setzero_pd();
        std::size_t c = 0;
        for (; c + 4 <= n; c += 4)
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + c),
                                  _mm256_loadu_pd(x + c), acc);
        double total = hsum(acc);
        for (; c < n; ++c) total += row[c] * x[c];
        y[r] = total + (bias ? bias[r] : 0.0);
    }
}

void gemv_t_acc_v(double* xg, const double* W, const double* gy, std::size_t m,
                  std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = W + r * n;
        __m256d g = _mm256_set1_pd(gy[r]);
        std::size_t c = 0;
        for (; c + 4 <= n; c += 4) {
            __m256d v = _mm256_loadu_pd(xg + c);
            v = _mm256_fmadd_pd(g, _mm256_loadu_pd(row + c), v);
            _mm256_storeu_pd(xg + c, v);
        }
        for (; c < n; ++c) xg[c] += row[c] * gy[r];
    }
}

void ger_acc_v(double* G, const double* gy, const double* x, std::size_t m,
               std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        double* row = G + r * n;
        __m256d g = _mm256_set1_pd(gy[r]);
        std::size_t c = 0;
        for (; c + 4 <= n; c += 4) {
            __m256d v = _mm256_loadu_pd(row + c);
            v = _mm256_fmadd_pd(g, _mm256_loadu_pd(x + c), v);
            _mm256_storeu_pd(row + c, v);
        }
        for (; c < n; ++c) row[c] += gy[r] * x[c];
    }
}

}  // namespace

const Ops& avx2() {
    static const Ops ops = {axpy_v,       stage_combine_v, wrms_v,
                            sumsq_v,      sumsq_diff_v,    dot_v,
                            lerp_clamp_v, relu_neg_prod_v, gemv_v,
                            gemv_t_acc_v, ger_acc_v,       "avx2"};
    return ops;
}

}  // namespace mpe::kernels
