#pragma once

// Independent test oracles. These deliberately avoid the library's fused
// solver loops: right-hand sides are assembled from the model callbacks and
// raw count-vector arithmetic, and integration is fixed-step.
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mpe/field.hpp"
#include "mpe/game.hpp"
#include "mpe/simplex.hpp"

namespace oracle {

// Backward fixed-step RK4 for the dynamic programming equation with a given
// grid control (or zero when beta == nullptr). Returns values at the grid
// nodes of `out_grid`.
inline mpe::ValueField rk4_hjb(const mpe::GameModel& model,
                               const mpe::ControlField* beta,
                               const mpe::TimeGrid& out_grid, double dt_fine) {
    const mpe::SimplexTable& sx = model.simplex();
    const int d = model.d();
    const std::size_t S = sx.size();
    const std::size_t n = static_cast<std::size_t>(d) * S;
    const double T = model.T();

    std::vector<double> y(n), p(static_cast<std::size_t>(d - 1));
    std::vector<double> brate(static_cast<std::size_t>(d - 1));
    std::vector<double> l0(static_cast<std::size_t>(d - 1)), l1(static_cast<std::size_t>(d - 1));
    for (int x = 0; x < d; ++x)
        for (std::size_t m = 0; m < S; ++m)
            y[static_cast<std::size_t>(x) * S + m] = model.terminal(x, sx.counts(m));

    auto rhs = [&](double t, const std::vector<double>& u, std::vector<double>& out) {
        for (int x = 0; x < d; ++x) {
            for (std::size_t m = 0; m < S; ++m) {
                std::size_t i = static_cast<std::size_t>(x) * S + m;
                auto counts_span = sx.counts(m);
                mpe::CountVector counts(counts_span.begin(), counts_span.end());
                for (int yst = 0; yst < d; ++yst) {
                    if (yst == x) continue;
                    p[static_cast<std::size_t>(mpe::rate_slot(yst, x))] =
                        u[static_cast<std::size_t>(yst) * S + m] - u[i];
                }
                double acc = model.hamiltonian(x, counts, p);
                // population generator, raw counts arithmetic
                for (int z = 0; z < d; ++z) {
                    int nz = counts[static_cast<std::size_t>(z)];
                    if (nz == 0) continue;
                    mpe::CountVector seen = mpe::shift(counts, x, z);
                    model.lambda0(z, seen, l0);
                    model.lambda1(z, seen, l1);
                    if (beta) {
                        beta->eval_rates(t, z, sx.rank(seen), brate);
                    } else {
                        std::fill(brate.begin(), brate.end(), 0.0);
                    }
                    for (int yst = 0; yst < d; ++yst) {
                        if (yst == z) continue;
                        int k = mpe::rate_slot(yst, z);
                        double rate = l0[static_cast<std::size_t>(k)] +
                                      l1[static_cast<std::size_t>(k)] * brate[static_cast<std::size_t>(k)];
                        if (rate == 0) continue;
                        mpe::CountVector moved = mpe::shift(counts, yst, z);
                        acc += nz * rate *
                               (u[static_cast<std::size_t>(x) * S + sx.rank(moved)] - u[i]);
                    }
                }
                out[i] = acc;
            }
        }
    };

    mpe::ValueField v(out_grid, d, S);
    std::copy(y.begin(), y.end(), v.slice(out_grid.M).begin());

    // integrate u(tau) = v(T - tau) forward with classic RK4
    long nsteps = static_cast<long>(std::ceil(T / dt_fine));
    double h = T / nsteps;
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    int next_node = out_grid.M - 1;
    for (long s = 0; s < nsteps; ++s) {
        double tau = s * h;
        double t = T - tau;
        rhs(t, y, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        rhs(t - 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        rhs(t - 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
        rhs(t - h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        double tau_new = (s + 1) * h;
        while (next_node >= 0 && T - out_grid.node(next_node) <= tau_new + 1e-12) {
            std::copy(y.begin(), y.end(), v.slice(next_node).begin());
            --next_node;
        }
    }
    return v;
}

// Discrete-time dynamic programming on the embedded Bernoulli chain with a
// fine fixed step; returns the minimizing control at the nodes of out_grid.
// Untagged players use the zero control.
inline mpe::ControlField dp_best_response_zero(const mpe::GameModel& model,
                                               const mpe::TimeGrid& out_grid,
                                               double dt_fine) {
    const mpe::SimplexTable& sx = model.simplex();
    const int d = model.d();
    const std::size_t S = sx.size();
    const std::size_t n = static_cast<std::size_t>(d) * S;
    const double T = model.T();
    long K = static_cast<long>(std::ceil(T / dt_fine));
    double h = T / K;

    std::vector<double> v(n), vn(n), p(static_cast<std::size_t>(d - 1)),
        a(static_cast<std::size_t>(d - 1)), l0(static_cast<std::size_t>(d - 1)),
        l1(static_cast<std::size_t>(d - 1));
    for (int x = 0; x < d; ++x)
        for (std::size_t m = 0; m < S; ++m)
            v[static_cast<std::size_t>(x) * S + m] = model.terminal(x, sx.counts(m));

    mpe::ControlField alpha(out_grid, d, S);
    // terminal node control from the terminal value slice
    auto record_node = [&](int node) {
        for (int x = 0; x < d; ++x) {
            for (std::size_t m = 0; m < S; ++m) {
                auto counts_span = sx.counts(m);
                mpe::CountVector counts(counts_span.begin(), counts_span.end());
                for (int yst = 0; yst < d; ++yst) {
                    if (yst == x) continue;
                    p[static_cast<std::size_t>(mpe::rate_slot(yst, x))] =
                        v[static_cast<std::size_t>(yst) * S + m] - v[static_cast<std::size_t>(x) * S + m];
                }
                model.minimizer(x, counts, p, a);
                auto dst = alpha.rates(node, x, static_cast<std::size_t>(m));
                std::copy(a.begin(), a.end(), dst.begin());
            }
        }
    };
    record_node(out_grid.M);

    int next_node = out_grid.M - 1;
    for (long s = K - 1; s >= 0; --s) {
        for (int x = 0; x < d; ++x) {
            for (std::size_t m = 0; m < S; ++m) {
                std::size_t i = static_cast<std::size_t>(x) * S + m;
                auto counts_span = sx.counts(m);
                mpe::CountVector counts(counts_span.begin(), counts_span.end());
                for (int yst = 0; yst < d; ++yst) {
                    if (yst == x) continue;
                    p[static_cast<std::size_t>(mpe::rate_slot(yst, x))] =
                        v[static_cast<std::size_t>(yst) * S + m] - v[i];
                }
                model.minimizer(x, counts, p, a);
                model.lambda0(x, counts, l0);
                model.lambda1(x, counts, l1);
                double acc = v[i] + h * model.running_cost(x, counts, a);
                for (int yst = 0; yst < d; ++yst) {
                    if (yst == x) continue;
                    int k = mpe::rate_slot(yst, x);
                    acc += h * (l0[static_cast<std::size_t>(k)] + l1[static_cast<std::size_t>(k)] * a[static_cast<std::size_t>(k)]) *
                           p[static_cast<std::size_t>(k)];
                }
                // population terms with zero untagged control
                for (int z = 0; z < d; ++z) {
                    int nz = counts[static_cast<std::size_t>(z)];
                    if (nz == 0) continue;
                    mpe::CountVector seen = mpe::shift(counts, x, z);
                    model.lambda0(z, seen, l0);
                    for (int yst = 0; yst < d; ++yst) {
                        if (yst == z) continue;
                        int k = mpe::rate_slot(yst, z);
                        if (l0[static_cast<std::size_t>(k)] == 0) continue;
                        mpe::CountVector moved = mpe::shift(counts, yst, z);
                        acc += h * nz * l0[static_cast<std::size_t>(k)] *
                               (v[static_cast<std::size_t>(x) * S + sx.rank(moved)] - v[i]);
                    }
                }
                vn[i] = acc;
            }
        }
        std::swap(v, vn);
        double t_now = s * h;
        while (next_node >= 0 && out_grid.node(next_node) >= t_now - 1e-12) {
            record_node(next_node);
            --next_node;
        }
    }
    return alpha;
}

// two-sided Kolmogorov-Smirnov statistic against a continuous CDF
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double F = cdf(samples[i]);
        d = std::max(d, std::fabs(F - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - F));
    }
    return d;
}

inline double binom_pmf(int n, int k, double p) {
    double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    return std::exp(logc + k * std::log(p) + (n - k) * std::log1p(-p));
}

}  // namespace oracle
