#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mpe/picard.hpp"
#include "mpe/presets.hpp"
#include "mpe/rng.hpp"
#include "mpe/verify.hpp"
#include "oracles.hpp"

using namespace mpe;

namespace {

ControlField random_bounded_control(const GameModel& m, const TimeGrid& grid,
                                    double bound, std::uint64_t seed) {
    ControlField c(grid, m.d(), m.simplex().size());
    RngStream rng(seed, 0);
    for (double& v : c.data) v = bound * rng.uniform();
    return c;
}

PicardConfig small_cfg(const TimeGrid& grid, double tol = 1e-9, double rho = 0) {
    PicardConfig cfg;
    cfg.grid = grid;
    cfg.tol = tol;
    cfg.rho = rho;
    cfg.max_iter = 200;
    return cfg;
}

}  // namespace

TEST_CASE("fit_rate on exact data") {
    {
        auto fit = fit_rate(std::vector<double>{1, 0.1, 0.01, 0.001});
        CHECK(fit.slope == doctest::Approx(-std::log(10.0)).epsilon(1e-12));
        CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    }
    {
        auto fit = fit_rate(std::vector<double>{0.5, 0.5, 0.5, 0.5});
        CHECK(fit.slope == doctest::Approx(0.0));
        CHECK(fit.r_squared == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(fit_rate(std::vector<double>{1.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(fit_rate(std::vector<double>{1.0, 0.0, 0.5}), std::invalid_argument);
}

TEST_CASE("best response ignores beta when lambda1 is zero") {
    auto l0 = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.4; };
    auto l1 = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.0; };
    auto f = [](int x, std::span<const int>) { return 0.2 * x; };
    auto g = [](int x, std::span<const int> c) { return 0.3 * x + 0.1 * c[0]; };
    GameModel m(2, 3, 1.0, l0, l1, CostModel::quadratic_plus_state(f), g);
    TimeGrid grid(1.0, 30);
    ControlField zero(grid, 2, m.simplex().size());
    ControlField rnd = random_bounded_control(m, grid, 1.0, 42);
    auto [a1, v1] = best_response(m, zero, grid, OdeConfig{});
    auto [a2, v2] = best_response(m, rnd, grid, OdeConfig{});
    CHECK(sup_norm_diff(a1, a2) <= 1e-12);
    CHECK(sup_norm_diff(v1, v2) <= 1e-12);
    // with lambda1 = 0 the quadratic minimizer is identically zero
    CHECK(sup_abs(a1) == 0.0);
}

TEST_CASE("constant terminal cost makes the zero control optimal") {
    auto l0 = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.3; };
    auto l1 = [](int, std::span<const int>, std::span<double> out) { out[0] = 1.0; };
    auto g = [](int, std::span<const int>) { return 1.7; };
    GameModel m(2, 4, 1.0, l0, l1, CostModel::quadratic_plus_state(nullptr), g);
    TimeGrid grid(1.0, 20);
    ControlField beta = random_bounded_control(m, grid, 0.5, 9);
    auto [alpha, v] = best_response(m, beta, grid, OdeConfig{});
    CHECK(sup_abs(alpha) <= 1e-9);
    (void)v;
}

TEST_CASE("best response matches the discrete-time DP oracle") {
    GameModel m = make_kuramoto1(3, 1.0, 2.0);
    TimeGrid grid(1.0, 20);
    ControlField zero(grid, 2, m.simplex().size());
    auto [alpha, v] = best_response(m, zero, grid, OdeConfig{});
    ControlField ref = oracle::dp_best_response_zero(m, grid, 2e-5);
    double worst = 0;
    for (std::size_t i = 0; i < alpha.data.size(); ++i)
        worst = std::max(worst, std::fabs(alpha.data[i] - ref.data[i]));
    CHECK(worst <= 5e-4);
    (void)v;
}

TEST_CASE("a converged control is a fixed point") {
    GameModel m = make_kuramoto1(4, 1.0, 2.0);
    TimeGrid grid(1.0, 40);
    PicardConfig cfg = small_cfg(grid, 1e-10);
    PicardReport rep = picard_run(m, cfg);
    REQUIRE(rep.converged);

    PicardConfig cfg2 = cfg;
    cfg2.tol = 1e-8;
    cfg2.initial_control = rep.final_control;
    PicardReport rep2 = picard_run(m, cfg2);
    CHECK(rep2.converged);
    CHECK(rep2.iterations_run == 2);
    REQUIRE(rep2.residuals.size() == 1);
    CHECK(rep2.residuals[0] < cfg2.tol);
}

TEST_CASE("residuals decay geometrically on the synchronization game") {
    GameModel m = make_kuramoto1(20, 1.0, 2.0);
    TimeGrid grid(1.0, 100);
    PicardConfig cfg = small_cfg(grid, 1e-9);
    PicardReport rep = picard_run(m, cfg);
    REQUIRE(rep.converged);
    REQUIRE(rep.residuals.size() >= 4);
    CHECK(rep.rate_fit.slope < 0);
    CHECK(rep.rate_fit.r_squared >= 0.95);
    // eventually monotone decreasing
    for (std::size_t i = 1; i < rep.residuals.size(); ++i)
        CHECK(rep.residuals[i] < rep.residuals[i - 1]);
}

TEST_CASE("limit is independent of rho and the initial control") {
    GameModel m = make_kuramoto1(5, 1.0, 2.0);
    TimeGrid grid(1.0, 50);
    double tol = 1e-9;
    std::vector<ValueField> finals;
    for (double rho : {0.0, 0.25, 0.5}) {
        for (int init = 0; init < 2; ++init) {
            PicardConfig cfg = small_cfg(grid, tol, rho);
            if (init == 1)
                cfg.initial_control = random_bounded_control(m, grid, 1.0, 100 + init);
            PicardReport rep = picard_run(m, cfg);
            REQUIRE(rep.converged);
            finals.push_back(rep.final_value);
        }
    }
    for (std::size_t i = 1; i < finals.size(); ++i)
        CHECK(sup_norm_diff(finals[0], finals[i]) <= 10 * tol);
}

TEST_CASE("weighted iteration is slower but reaches the same limit") {
    GameModel m = make_kuramoto1(10, 1.0, 2.0);
    TimeGrid grid(1.0, 50);
    PicardConfig c0 = small_cfg(grid, 1e-9, 0.0);
    PicardConfig c5 = small_cfg(grid, 1e-9, 0.5);
    PicardReport r0 = picard_run(m, c0);
    PicardReport r5 = picard_run(m, c5);
    REQUIRE(r0.converged);
    REQUIRE(r5.converged);
    CHECK(sup_norm_diff(r0.final_value, r5.final_value) <= 10 * c0.tol);
    // empirical contraction factor is non-decreasing in rho
    CHECK(std::exp(r5.rate_fit.slope) >= std::exp(r0.rate_fit.slope));
    CHECK(r5.iterations_run > r0.iterations_run);
}

TEST_CASE("control norms stay within the admissible bound on the presets") {
    GameModel m = make_kuramoto1(8, 1.0, 2.0);
    TimeGrid grid(1.0, 40);
    PicardConfig cfg = small_cfg(grid, 1e-8);
    PicardReport rep = picard_run(m, cfg);
    CHECK_FALSE(rep.control_bound_exceeded);
    for (double b : rep.control_norms) CHECK(b <= rep.c_a);
}

TEST_CASE("noisy iteration with delta = 0 tracks the clean one exactly") {
    GameModel m = make_kuramoto1(4, 1.0, 2.0);
    TimeGrid grid(1.0, 30);
    PicardConfig cfg = small_cfg(grid, 1e-8);
    cfg.max_iter = 8;
    NoisyPicardResult res = picard_run_noisy(m, cfg, NoiseConfig{0.0, 7});
    REQUIRE(res.deviations.size() == 8);
    for (double d : res.deviations) CHECK(d == 0.0);
}

TEST_CASE("noise deviations stay bounded and scale quadratically in delta") {
    GameModel m = make_kuramoto1(5, 1.0, 2.0);
    TimeGrid grid(1.0, 30);
    PicardConfig cfg = small_cfg(grid, 1e-8, 0.5);
    cfg.max_iter = 20;

    NoisyPicardResult full = picard_run_noisy(m, cfg, NoiseConfig{0.05, 11});
    NoisyPicardResult half = picard_run_noisy(m, cfg, NoiseConfig{0.025, 11});
    REQUIRE(full.deviations.size() == 20);

    // no growth trend: late deviations comparable to early ones
    double early = 0, late = 0;
    for (int i = 4; i < 12; ++i) early += full.deviations[static_cast<std::size_t>(i)];
    for (int i = 12; i < 20; ++i) late += full.deviations[static_cast<std::size_t>(i)];
    CHECK(late <= 2.0 * early);

    double mx_full = *std::max_element(full.deviations.begin(), full.deviations.end());
    double mx_half = *std::max_element(half.deviations.begin(), half.deviations.end());
    CHECK(mx_full / mx_half == doctest::Approx(4.0).epsilon(0.35));
}

TEST_CASE("config validation") {
    GameModel m = make_kuramoto1(3, 1.0, 2.0);
    TimeGrid grid(1.0, 10);
    PicardConfig cfg = small_cfg(grid);
    cfg.rho = 1.0;
    CHECK_THROWS_AS(picard_run(m, cfg), std::invalid_argument);
    cfg.rho = 0.0;
    cfg.tol = 0.0;
    CHECK_THROWS_AS(picard_run(m, cfg), std::invalid_argument);
    cfg.tol = 1e-8;
    cfg.initial_control = ControlField(TimeGrid(1.0, 5), 2, m.simplex().size() + 1);
    CHECK_THROWS_AS(picard_run(m, cfg), std::invalid_argument);
}

TEST_CASE("non-convergence is reported, not thrown") {
    GameModel m = make_kuramoto1(6, 1.0, 2.0);
    TimeGrid grid(1.0, 30);
    PicardConfig cfg = small_cfg(grid, 1e-13);
    cfg.max_iter = 3;
    PicardReport rep = picard_run(m, cfg);
    CHECK_FALSE(rep.converged);
    CHECK(rep.iterations_run == 3);
}
