#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mpe/picard.hpp"
#include "mpe/presets.hpp"
#include "mpe/rng.hpp"
#include "mpe/verify.hpp"

using namespace mpe;

namespace {

ControlField random_bounded_control(const GameModel& m, const TimeGrid& grid,
                                    double bound, std::uint64_t seed) {
    ControlField c(grid, m.d(), m.simplex().size());
    RngStream rng(seed, 0);
    for (double& v : c.data) v = bound * rng.uniform();
    return c;
}

}  // namespace

TEST_CASE("field norms") {
    TimeGrid grid(1.0, 4);
    ValueField zero(grid, 2, 3);
    CHECK(sup_norm(zero) == 0.0);
    CHECK(field_norm(zero, 2) == 0.0);

    ValueField one(grid, 2, 3);
    one.at(1, 1, 2) = 3.0;
    CHECK(field_norm(one, 1) == doctest::Approx(3.0));
    CHECK(field_norm(one, 0) == 0.0);
    CHECK(sup_norm(one) == doctest::Approx(3.0));

    // triangle inequality on random fields
    RngStream rng(8, 0);
    ValueField a(grid, 2, 3), b(grid, 2, 3), s(grid, 2, 3);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] = 2 * rng.uniform() - 1;
        b.data[i] = 2 * rng.uniform() - 1;
        s.data[i] = a.data[i] + b.data[i];
    }
    for (int k = 0; k <= grid.M; ++k)
        CHECK(field_norm(s, k) <= field_norm(a, k) + field_norm(b, k) + 1e-12);
}

TEST_CASE("exploitability of a converged control is tiny, of zero control is not") {
    GameModel m = make_kuramoto1(8, 1.0, 2.0);
    TimeGrid grid(1.0, 50);
    OdeConfig ode;
    PicardConfig cfg;
    cfg.grid = grid;
    cfg.ode = ode;
    cfg.tol = 1e-8;
    cfg.max_iter = 100;
    PicardReport rep = picard_run(m, cfg);
    REQUIRE(rep.converged);

    EquilibriumCertificate good = exploitability(m, rep.final_control, grid, ode);
    CHECK(good.epsilon <= 1e-5);
    CHECK(good.epsilon >= 0.0);

    ControlField zero(grid, 2, m.simplex().size());
    EquilibriumCertificate bad = exploitability(m, zero, grid, ode);
    CHECK(bad.epsilon > 1e-2);
}

TEST_CASE("no strategic interaction: the pointwise minimizer is an exact equilibrium") {
    // lambda1 = 0 for the population, and the tagged player's control only
    // enters through the running cost, so the zero control is optimal
    auto l0 = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.5; };
    auto l1 = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.0; };
    auto f = [](int x, std::span<const int>) { return x == 0 ? 0.1 : 0.6; };
    auto g = [](int x, std::span<const int> c) { return 0.2 * x + 0.05 * c[1]; };
    GameModel m(2, 4, 1.0, l0, l1, CostModel::quadratic_plus_state(f), g);
    TimeGrid grid(1.0, 30);
    ControlField zero(grid, 2, m.simplex().size());
    EquilibriumCertificate cert = exploitability(m, zero, grid, OdeConfig{});
    CHECK(cert.epsilon <= 1e-7);
}

TEST_CASE("playing any control against itself is suboptimal") {
    GameModel m = make_kuramoto1(5, 1.0, 2.0);
    TimeGrid grid(1.0, 40);
    OdeConfig ode;
    ControlField beta = random_bounded_control(m, grid, 0.8, 21);
    ValueField j = evaluate_policy(m, beta, beta, grid, ode);
    ValueField v = solve_hjb(m, beta, grid, ode);
    for (std::size_t i = 0; i < j.data.size(); ++i)
        CHECK(j.data[i] >= v.data[i] - 5 * (ode.rtol * std::fabs(v.data[i]) + ode.atol));
}

TEST_CASE("exploitability decreases as the Picard tolerance shrinks") {
    GameModel m = make_kuramoto1(6, 1.0, 2.0);
    TimeGrid grid(1.0, 50);
    OdeConfig ode;
    ode.rtol = 1e-9;
    ode.atol = 1e-11;
    double prev = 1e300;
    for (double tol : {1e-4, 1e-6, 1e-8}) {
        PicardConfig cfg;
        cfg.grid = grid;
        cfg.ode = ode;
        cfg.tol = tol;
        cfg.max_iter = 200;
        PicardReport rep = picard_run(m, cfg);
        REQUIRE(rep.converged);
        EquilibriumCertificate cert = exploitability(m, rep.final_control, grid, ode);
        CHECK(cert.epsilon <= prev + 1e-12);
        prev = cert.epsilon;
    }
    CHECK(prev <= 1e-6);
}

TEST_CASE("state-relabeling symmetry of the symmetric two-state game") {
    // kuramoto2 is invariant under swapping the two states
    GameModel m = make_kuramoto2(10, 2.0, 2.0, 0.3);
    TimeGrid grid(2.0, 80);
    OdeConfig ode;
    PicardConfig cfg;
    cfg.grid = grid;
    cfg.ode = ode;
    cfg.tol = 1e-9;
    cfg.max_iter = 100;
    PicardReport rep = picard_run(m, cfg);
    REQUIRE(rep.converged);
    Bounds b = compute_bounds(m);
    const SimplexTable& sx = m.simplex();
    double tol = 10 * ode.rtol * b.c_v;
    for (int k = 0; k <= grid.M; ++k) {
        for (std::size_t mu = 0; mu < sx.size(); ++mu) {
            auto c = sx.counts(mu);
            CountVector swapped = {c[1], c[0]};
            std::size_t mu2 = sx.rank(swapped);
            CHECK(std::fabs(rep.final_value.at(k, 0, mu) - rep.final_value.at(k, 1, mu2)) <= tol);
        }
    }
}

TEST_CASE("pipeline comparison on a trivial model returns constants") {
    auto l0 = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.4; };
    auto l1 = [](int, std::span<const int>, std::span<double> out) { out[0] = 1.0; };
    auto g = [](int, std::span<const int>) { return 2.0; };
    GameModel m(2, 3, 1.0, l0, l1, CostModel::quadratic_plus_state(nullptr), g);
    PicardConfig cfg;
    cfg.grid = TimeGrid(1.0, 20);
    cfg.tol = 1e-9;
    cfg.max_iter = 20;
    PipelineComparison cmp = compare_pipelines(m, cfg);
    CHECK(cmp.value_gap <= 1e-7);
    CHECK(cmp.control_gap <= 1e-7);
    for (auto& [p, z] : cmp.slice_picard) {
        CHECK(z == doctest::Approx(0.0).epsilon(1e-9));
        (void)p;
    }
    for (double x : cmp.picard.final_value.data) CHECK(x == doctest::Approx(2.0));
    CHECK_FALSE(cmp.direct.instability);
}

TEST_CASE("negative raw epsilon is clamped in the certificate") {
    EquilibriumCertificate cert;
    cert.epsilon_raw = -1e-9;
    cert.epsilon = std::max(0.0, cert.epsilon_raw);
    CHECK(cert.epsilon == 0.0);
}
