#include "mpe/dopri.hpp"

#include <algorithm>
#include <cmath>

#include "mpe/kernels.hpp"

namespace mpe {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// e = b(5th) - b(4th)
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output coefficients (Hairer, Norsett & Wanner)
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

OdeStats dopri5(const OdeRhs& f, std::vector<double>& y, double t0, double t1,
                const OdeConfig& cfg, std::span<const double> sample_t,
                const OdeSampler& on_sample) {
    cfg.validate();
    if (!(t1 > t0)) throw std::invalid_argument("dopri5: need t1 > t0");
    const auto& K = kernels::ops();
    const std::size_t n = y.size();
    const double span = t1 - t0;
    const double hmax = cfg.max_step > 0 ? std::min(cfg.max_step, span) : span;
    const double hmin = span * 1e-14;

    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    std::vector<double> ytmp(n), ynew(n), err(n), dense(n);
    std::vector<double> rc1(n), rc2(n), rc3(n), rc4(n), rc5(n);

    OdeStats stats;
    double t = t0;
    double h = hmax;
    std::size_t next_sample = 0;
    bool rejected_last = false;

    f(t, y, k1);
    ++stats.rhs_evals;
    if (!all_finite(k1)) throw SolverError("dopri5: non-finite RHS at start", t);

    while (t < t1) {
        if (t1 - t < hmin) {  // tail below time resolution
            t = t1;
            break;
        }
        if (h > t1 - t) h = t1 - t;
        // sample times double as breakpoints: the right-hand side may have
        // kinks there (piecewise-linear controls), so steps never cross them
        if (next_sample < sample_t.size()) {
            double to_next = sample_t[next_sample] - t;
            if (to_next > hmin && h > to_next) h = to_next;
        }
        if (h < hmin)
            throw SolverError("dopri5: step size underflow at t=" + std::to_string(t), t);

        {
            const double* ks[6];
            double cs[6];
            ks[0] = k1.data(); cs[0] = a21;
            K.stage_combine(ytmp.data(), y.data(), h, ks, cs, 1, n);
            f(t + c2 * h, ytmp, k2);
            ks[1] = k2.data(); cs[0] = a31; cs[1] = a32;
            K.stage_combine(ytmp.data(), y.data(), h, ks, cs, 2, n);
            f(t + c3 * h, ytmp, k3);
            ks[2] = k3.data(); cs[0] = a41; cs[1] = a42; cs[2] = a43;
            K.stage_combine(ytmp.data(), y.data(), h, ks, cs, 3, n);
            f(t + c4 * h, ytmp, k4);
            ks[3] = k4.data(); cs[0] = a51; cs[1] = a52; cs[2] = a53; cs[3] = a54;
            K.stage_combine(ytmp.data(), y.data(), h, ks, cs, 4, n);
            f(t + c5 * h, ytmp, k5);
            ks[4] = k5.data(); cs[0] = a61; cs[1] = a62; cs[2] = a63; cs[3] = a64; cs[4] = a65;
            K.stage_combine(ytmp.data(), y.data(), h, ks, cs, 5, n);
            f(t + h, ytmp, k6);
            ks[5] = k6.data();
            // 5th-order solution (FSAL row)
            const double* ks7[6] = {k1.data(), k3.data(), k4.data(), k5.data(), k6.data(), nullptr};
            double cs7[5] = {a71, a73, a74, a75, a76};
            K.stage_combine(ynew.data(), y.data(), h, ks7, cs7, 5, n);
            f(t + h, ynew, k7);
            stats.rhs_evals += 6;
        }

        if (!all_finite(ynew) || !all_finite(k7)) {
            // treat as a failed step: shrink
            ++stats.rejected;
            h *= 0.25;
            rejected_last = true;
            if (h < hmin)
                throw SolverError("dopri5: non-finite RHS at t=" + std::to_string(t), t);
            continue;
        }

        {
            const double* kse[6] = {k1.data(), k3.data(), k4.data(),
                                    k5.data(), k6.data(), k7.data()};
            double cse[6] = {e1, e3, e4, e5, e6, e7};
            std::fill(err.begin(), err.end(), 0.0);
            K.stage_combine(err.data(), err.data(), h, kse, cse, 6, n);
        }
        double errnorm = K.wrms(err.data(), y.data(), ynew.data(), cfg.atol,
                                cfg.rtol, n);

        if (errnorm <= 1.0 || !std::isfinite(errnorm)) {
            if (!std::isfinite(errnorm))
                throw SolverError("dopri5: non-finite error estimate at t=" + std::to_string(t), t);
            // accept; emit dense output for samples inside (t, t+h]
            double tnew = t + h;
            const double eps = 1e-12 * span;
            if (next_sample < sample_t.size() && sample_t[next_sample] <= tnew + eps) {
                for (std::size_t i = 0; i < n; ++i) {
                    double ydiff = ynew[i] - y[i];
                    double bspl = h * k1[i] - ydiff;
                    rc1[i] = y[i];
                    rc2[i] = ydiff;
                    rc3[i] = bspl;
                    rc4[i] = ydiff - h * k7[i] - bspl;
                    rc5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] +
                                  d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
                }
                while (next_sample < sample_t.size() &&
                       sample_t[next_sample] <= tnew + eps) {
                    double theta = (sample_t[next_sample] - t) / h;
                    theta = std::clamp(theta, 0.0, 1.0);
                    double om = 1.0 - theta;
                    for (std::size_t i = 0; i < n; ++i)
                        dense[i] = rc1[i] + theta * (rc2[i] + om * (rc3[i] + theta * (rc4[i] + om * rc5[i])));
                    on_sample(next_sample, dense);
                    ++next_sample;
                }
            }
            t = tnew;
            std::swap(y, ynew);
            std::swap(k1, k7);  // FSAL
            ++stats.accepted;
            double fac = 0.9 * std::pow(std::max(errnorm, 1e-10), -0.2);
            fac = std::clamp(fac, 0.2, rejected_last ? 1.0 : 10.0);
            h = std::min(h * fac, hmax);
            rejected_last = false;
        } else {
            ++stats.rejected;
            double fac = std::clamp(0.9 * std::pow(errnorm, -0.2), 0.2, 1.0);
            h *= fac;
            rejected_last = true;
        }
    }

    // any samples exactly at t1 that floating point left behind
    while (next_sample < sample_t.size()) {
        on_sample(next_sample, y);
        ++next_sample;
    }
    return stats;
}

}  // namespace mpe
