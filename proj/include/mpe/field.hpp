#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mpe {

// Uniform time grid t_k = k*T/M, k = 0..M.
struct TimeGrid {
    double T = 1.0;
    int M = 100;

    TimeGrid() = default;
    TimeGrid(double T_, int M_) : T(T_), M(M_) {
        if (!(T > 0) || M < 1) throw std::invalid_argument("TimeGrid: need T > 0, M >= 1");
    }
    double dt() const { return T / M; }
    double node(int k) const { return T * k / M; }

    // bracketing node pair and interpolation weight for t in [0, T]
    void locate(double t, int& k, double& w) const {
        double s = t / dt();
        k = static_cast<int>(std::floor(s));
        if (k < 0) k = 0;
        if (k >= M) k = M - 1;
        w = s - k;
        if (w < 0) w = 0;
        if (w > 1) w = 1;
    }
    bool operator==(const TimeGrid& o) const { return T == o.T && M == o.M; }
};

// Real values on grid x {0..d-1} x simplex, stored time-major:
// data[(k*d + x)*S + m].
struct ValueField {
    TimeGrid grid;
    int d = 0;
    std::size_t S = 0;
    std::vector<double> data;

    ValueField() = default;
    ValueField(TimeGrid g, int d_, std::size_t S_)
        : grid(g), d(d_), S(S_),
          data(static_cast<std::size_t>(g.M + 1) * d_ * S_, 0.0) {}

    std::size_t states() const { return static_cast<std::size_t>(d) * S; }
    std::span<double> slice(int k) {
        return {data.data() + static_cast<std::size_t>(k) * states(), states()};
    }
    std::span<const double> slice(int k) const {
        return {data.data() + static_cast<std::size_t>(k) * states(), states()};
    }
    double& at(int k, int x, std::size_t m) {
        return data[static_cast<std::size_t>(k) * states() +
                    static_cast<std::size_t>(x) * S + m];
    }
    double at(int k, int x, std::size_t m) const {
        return data[static_cast<std::size_t>(k) * states() +
                    static_cast<std::size_t>(x) * S + m];
    }
};

// Nonnegative rate vectors on the grid, piecewise linear in time (clamped at
// zero on evaluation). Layout: data[((k*d + x)*S + m)*(d-1) + slot].
struct ControlField {
    TimeGrid grid;
    int d = 0;
    std::size_t S = 0;
    std::vector<double> data;

    ControlField() = default;
    ControlField(TimeGrid g, int d_, std::size_t S_)
        : grid(g), d(d_), S(S_),
          data(static_cast<std::size_t>(g.M + 1) * d_ * S_ * (d_ - 1), 0.0) {}

    std::size_t per_node() const {
        return static_cast<std::size_t>(d) * S * (d - 1);
    }
    std::span<double> slice(int k) {
        return {data.data() + static_cast<std::size_t>(k) * per_node(), per_node()};
    }
    std::span<const double> slice(int k) const {
        return {data.data() + static_cast<std::size_t>(k) * per_node(), per_node()};
    }
    std::span<double> rates(int k, int x, std::size_t m) {
        std::size_t base = (static_cast<std::size_t>(k) * static_cast<std::size_t>(d) * S +
                            static_cast<std::size_t>(x) * S + m) *
                           (d - 1);
        return {data.data() + base, static_cast<std::size_t>(d - 1)};
    }
    std::span<const double> rates(int k, int x, std::size_t m) const {
        std::size_t base = (static_cast<std::size_t>(k) * static_cast<std::size_t>(d) * S +
                            static_cast<std::size_t>(x) * S + m) *
                           (d - 1);
        return {data.data() + base, static_cast<std::size_t>(d - 1)};
    }

    // interpolated full slice at time t, clamped at 0
    void eval_slice(double t, std::span<double> out) const;
    // interpolated rates at a single (t, x, m)
    void eval_rates(double t, int x, std::size_t m, std::span<double> out) const;
};

}  // namespace mpe
