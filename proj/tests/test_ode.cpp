#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mpe/hjb.hpp"
#include "mpe/presets.hpp"
#include "mpe/rng.hpp"
#include "mpe/verify.hpp"
#include "oracles.hpp"

using namespace mpe;

namespace {

GameModel constant_model(double c, double lam0v = 0.0, double f0 = 0.0) {
    auto l0 = [lam0v](int, std::span<const int>, std::span<double> out) { out[0] = lam0v; };
    auto l1 = [](int, std::span<const int>, std::span<double> out) { out[0] = 1.0; };
    auto f = [f0](int, std::span<const int>) { return f0; };
    auto g = [c](int, std::span<const int>) { return c; };
    return GameModel(2, 3, 1.0, l0, l1, CostModel::quadratic_plus_state(f), g);
}

ControlField random_bounded_control(const GameModel& m, const TimeGrid& grid,
                                    double bound, std::uint64_t seed) {
    ControlField c(grid, m.d(), m.simplex().size());
    RngStream rng(seed, 0);
    for (double& v : c.data) v = bound * rng.uniform();
    return c;
}

}  // namespace

TEST_CASE("constant terminal data stays constant") {
    GameModel m = constant_model(2.5);
    TimeGrid grid(1.0, 20);
    ControlField beta(grid, 2, m.simplex().size());
    ValueField v = solve_hjb(m, beta, grid, OdeConfig{});
    for (int k = 0; k <= grid.M; ++k)
        for (double x : v.slice(k)) CHECK(x == doctest::Approx(2.5).epsilon(1e-12));
    // terminal slice equals g bit-exactly
    for (double x : v.slice(grid.M)) CHECK(x == 2.5);
}

TEST_CASE("solve_hjb matches a fixed-step RK4 oracle") {
    GameModel m = make_kuramoto1(3, 1.0, 2.0);
    TimeGrid grid(1.0, 50);
    ControlField beta(grid, 2, m.simplex().size());

    ValueField v = solve_hjb(m, beta, grid, OdeConfig{});
    ValueField ref = oracle::rk4_hjb(m, nullptr, grid, 1e-4);
    double gap = sup_norm_diff(v, ref);
    CHECK(gap <= 1e-6);

    // also against a nonzero control
    ControlField beta2 = random_bounded_control(m, grid, 0.8, 7);
    ValueField v2 = solve_hjb(m, beta2, grid, OdeConfig{});
    ValueField ref2 = oracle::rk4_hjb(m, &beta2, grid, 1e-4);
    CHECK(sup_norm_diff(v2, ref2) <= 1e-6);
}

TEST_CASE("terminal slice is exactly g") {
    GameModel m = make_kuramoto1(4, 1.0, 2.0);
    TimeGrid grid(1.0, 10);
    ControlField beta(grid, 2, m.simplex().size());
    ValueField v = solve_hjb(m, beta, grid, OdeConfig{});
    const SimplexTable& sx = m.simplex();
    for (int x = 0; x < 2; ++x)
        for (std::size_t mu = 0; mu < sx.size(); ++mu)
            CHECK(v.at(grid.M, x, mu) == m.terminal(x, sx.counts(mu)));
}

TEST_CASE("direct equilibrium solve on trivial and small models") {
    {
        GameModel m = constant_model(1.5);
        TimeGrid grid(1.0, 10);
        DirectSolveResult res = solve_nll_direct(m, grid, OdeConfig{});
        for (double x : res.value.data) CHECK(x == doctest::Approx(1.5).epsilon(1e-12));
        for (double a : res.control.data) CHECK(a == doctest::Approx(0.0));
        CHECK_FALSE(res.instability);
    }
    {
        // direct solve agrees with converged Picard on a small game
        GameModel m = make_kuramoto1(10, 1.0, 2.0);
        TimeGrid grid(1.0, 100);
        OdeConfig ode;
        DirectSolveResult res = solve_nll_direct(m, grid, ode);
        PicardConfig pc;
        pc.grid = grid;
        pc.ode = ode;
        pc.tol = 1e-10;
        pc.max_iter = 60;
        PicardReport rep = picard_run(m, pc);
        REQUIRE(rep.converged);
        CHECK(sup_norm_diff(res.value, rep.final_value) <= 5e-5);
    }
}

TEST_CASE("policy evaluation identities") {
    GameModel m = make_kuramoto1(5, 1.0, 2.0);
    TimeGrid grid(1.0, 50);
    OdeConfig ode;
    const std::size_t S = m.simplex().size();

    // alpha = best response to beta reproduces the dynamic programming value
    ControlField beta = random_bounded_control(m, grid, 0.5, 3);
    auto [alpha, v] = best_response(m, beta, grid, ode);
    ValueField j = evaluate_policy(m, alpha, beta, grid, ode);
    double tol = 5 * (ode.rtol * sup_abs(v) + ode.atol);
    CHECK(sup_norm_diff(j, v) <= tol * std::sqrt(static_cast<double>(v.states())));

    // deterministic cost: no dynamics, constant running cost
    auto l0z = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.0; };
    auto l1o = [](int, std::span<const int>, std::span<double> out) { out[0] = 1.0; };
    auto fc = [](int, std::span<const int>) { return 0.8; };
    auto gz = [](int, std::span<const int>) { return 0.0; };
    GameModel md(2, 3, 1.0, l0z, l1o, CostModel::quadratic_plus_state(fc), gz);
    TimeGrid g2(1.0, 20);
    ControlField zero(g2, 2, md.simplex().size());
    ValueField jd = evaluate_policy(md, zero, zero, g2, ode);
    for (int k = 0; k <= g2.M; ++k)
        for (double x : jd.slice(k))
            CHECK(x == doctest::Approx(0.8 * (1.0 - g2.node(k))).epsilon(1e-8));

    // playing the zero control against zero is suboptimal with a strict gap
    ControlField zero5(grid, 2, S);
    ValueField j0 = evaluate_policy(m, zero5, zero5, grid, ode);
    ValueField v0 = solve_hjb(m, zero5, grid, ode);
    double worst = -1e300, best_gap = 0;
    for (std::size_t i = 0; i < j0.data.size(); ++i) {
        worst = std::max(worst, v0.data[i] - j0.data[i]);
        best_gap = std::max(best_gap, j0.data[i] - v0.data[i]);
    }
    CHECK(worst <= 1e-7);   // J >= v pointwise up to solver noise
    CHECK(best_gap > 1e-3);  // strict gap somewhere
}

TEST_CASE("value bounds from the uniform estimate") {
    GameModel m = make_kuramoto1(5, 1.0, 2.0);
    Bounds b = compute_bounds(m);
    TimeGrid grid(1.0, 40);
    for (std::uint64_t seed : {0ull, 1ull}) {
        ControlField beta = seed == 0 ? ControlField(grid, 2, m.simplex().size())
                                      : random_bounded_control(m, grid, 1.0, seed);
        ValueField v = solve_hjb(m, beta, grid, OdeConfig{});
        for (double x : v.data) {
            CHECK(x >= -1e-8);
            CHECK(x <= b.c_v + 1e-8);
        }
    }
}

TEST_CASE("tolerance refinement and dense output self-consistency") {
    GameModel m = make_kuramoto1(6, 1.0, 2.0);
    TimeGrid grid(1.0, 25);
    ControlField beta = random_bounded_control(m, grid, 0.7, 11);

    OdeConfig coarse;
    coarse.rtol = 1e-6;
    coarse.atol = 1e-8;
    OdeConfig fine;
    fine.rtol = 5e-7;
    fine.atol = 5e-9;
    ValueField vc = solve_hjb(m, beta, grid, coarse);
    ValueField vf = solve_hjb(m, beta, grid, fine);
    double est = coarse.rtol * sup_abs(vc) + coarse.atol;
    CHECK(sup_norm_diff(vc, vf) <= est * std::sqrt(static_cast<double>(vc.states())));

    // re-solving on a doubled grid and restricting agrees
    TimeGrid grid2(1.0, 50);
    ControlField beta2(grid2, 2, m.simplex().size());
    for (int k = 0; k <= grid2.M; ++k) {
        // the same piecewise-linear control sampled on the finer grid
        std::vector<double> slice(beta.per_node());
        beta.eval_slice(grid2.node(k), slice);
        std::copy(slice.begin(), slice.end(), beta2.slice(k).begin());
    }
    ValueField v2 = solve_hjb(m, beta2, grid2, coarse);
    double worst = 0;
    for (int k = 0; k <= grid.M; ++k) {
        auto a = vc.slice(k);
        auto b2 = v2.slice(2 * k);
        for (std::size_t i = 0; i < a.size(); ++i)
            worst = std::max(worst, std::fabs(a[i] - b2[i]));
    }
    CHECK(worst <= 10 * coarse.rtol * sup_abs(vc) + 10 * coarse.atol);
}

TEST_CASE("solver failure reports the offending state") {
    auto l0 = [](int x, std::span<const int>, std::span<double> out) {
        out[0] = x == 0 ? 1e308 : 0.0;  // overflows the RHS immediately
    };
    auto l1 = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.0; };
    auto f = [](int, std::span<const int>) { return 0.0; };
    auto g = [](int x, std::span<const int>) { return x == 0 ? 1e308 : 0.0; };
    GameModel m(2, 2, 1.0, l0, l1, CostModel::quadratic_plus_state(f), g);
    TimeGrid grid(1.0, 10);
    ControlField beta(grid, 2, m.simplex().size());
    CHECK_THROWS_AS(solve_hjb(m, beta, grid, OdeConfig{}), SolverError);
}

TEST_CASE("minimizer field matches the pointwise minimizer") {
    GameModel m = make_kuramoto1(4, 1.0, 2.0);
    TimeGrid grid(1.0, 8);
    ControlField beta(grid, 2, m.simplex().size());
    ValueField v = solve_hjb(m, beta, grid, OdeConfig{});
    ControlField alpha;
    minimizer_field(m, v, alpha);
    const SimplexTable& sx = m.simplex();
    std::vector<double> slice(2), p(1), a(1);
    for (int k = 0; k <= grid.M; ++k) {
        for (std::size_t mu = 0; mu < sx.size(); ++mu) {
            slice[0] = v.at(k, 0, mu);
            slice[1] = v.at(k, 1, mu);
            for (int x = 0; x < 2; ++x) {
                delta_x(slice, x, p);
                m.minimizer(x, sx.counts(mu), p, a);
                CHECK(alpha.rates(k, x, mu)[0] == doctest::Approx(a[0]).epsilon(1e-14));
            }
        }
    }
}
