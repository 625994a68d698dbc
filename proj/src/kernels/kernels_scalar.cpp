#include "mpe/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace mpe::kernels {
namespace {

void axpy_s(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void stage_combine_s(double* out, const double* y, double h,
                     const double* const* ks, const double* c, int nk,
                     std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0;
        for (int j = 0; j < nk; ++j) acc += c[j] * ks[j][i];
        out[i] = y[i] + h * acc;
    }
}

double wrms_s(const double* err, const double* y0, const double* y1,
              double atol, double rtol, std::size_t n) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double sk = atol + rtol * std::max(std::fabs(y0[i]), std::fabs(y1[i]));
        double r = err[i] / sk;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(n));
}

double sumsq_s(const double* x, std::size_t n) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double sumsq_diff_s(const double* x, const double* y, std::size_t n) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double dot_s(const double* x, const double* y, std::size_t n) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void lerp_clamp_s(double* out, const double* a, const double* b, double w,
                  double lo, std::size_t n) {
    double u = 1.0 - w;
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::max(lo, u * a[i] + w * b[i]);
}

void relu_neg_prod_s(double* out, const double* l, const double* p,
                     std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(0.0, -l[i] * p[i]);
}

void gemv_s(double* y, const double* W, const double* x, const double* bias,
            std::size_t m, std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = W + r * n;
        double acc = bias ? bias[r] : 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void gemv_t_acc_s(double* xg, const double* W, const double* gy, std::size_t m,
                  std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = W + r * n;
        double g = gy[r];
        for (std::size_t c = 0; c < n; ++c) xg[c] += row[c] * g;
    }
}

void ger_acc_s(double* G, const double* gy, const double* x, std::size_t m,
               std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        double g = gy[r];
        double* row = G + r * n;
        for (std::size_t c = 0; c < n; ++c) row[c] += g * x[c];
    }
}

}  // namespace

const Ops& scalar() {
    static const Ops ops = {axpy_s,       stage_combine_s, wrms_s,
                            sumsq_s,      sumsq_diff_s,    dot_s,
                            lerp_clamp_s, relu_neg_prod_s, gemv_s,
                            gemv_t_acc_s, ger_acc_s,       "scalar"};
    return ops;
}

}  // namespace mpe::kernels
