#include "mpe/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mpe/kernels.hpp"

namespace mpe {

namespace {

// Shared scaffolding for the three backward solves. All of them integrate in
// reversed time tau = T - t, so du/dtau = +RHS with u(0) = g.
struct Assembler {
    const GameModel* model;
    const Tabulation* tab;
    const SimplexTable* sx;
    int d, dm1;
    std::size_t S, n;
    bool quadratic;

    explicit Assembler(const GameModel& m)
        : model(&m), tab(&m.tables()), sx(tab->simplex.get()), d(tab->d),
          dm1(tab->d - 1), S(tab->S), n(tab->n_states()),
          quadratic(m.cost().is_quadratic()) {}

    // difference vector of u at (x, m) into p[dm1]
    inline void diff(const double* u, int x, std::size_t m, double* p) const {
        const double ui = u[static_cast<std::size_t>(x) * S + m];
        for (int y = 0; y < d; ++y) {
            if (y == x) continue;
            p[rate_slot(y, x)] = u[static_cast<std::size_t>(y) * S + m] - ui;
        }
    }

    double hamiltonian_at(const double* u, int x, std::size_t m,
                          double* scratch_p, double* scratch_a) const {
        std::size_t i = static_cast<std::size_t>(x) * S + m;
        diff(u, x, m, scratch_p);
        if (quadratic) {
            const double* l0 = tab->lam0.data() + i * dm1;
            const double* l1 = tab->lam1.data() + i * dm1;
            double h = tab->f[i];
            for (int k = 0; k < dm1; ++k) {
                double neg = std::max(0.0, -l1[k] * scratch_p[k]);
                h += l0[k] * scratch_p[k] - 0.5 * neg * neg;
            }
            return h;
        }
        auto counts = sx->counts(m);
        std::span<double> a(scratch_a, static_cast<std::size_t>(dm1));
        model->cost().custom_minimizer(x, counts, {scratch_p, static_cast<std::size_t>(dm1)}, a);
        const double* l0 = tab->lam0.data() + i * dm1;
        const double* l1 = tab->lam1.data() + i * dm1;
        double h = model->cost().running_cost(x, counts, a);
        for (int k = 0; k < dm1; ++k)
            h += (l0[k] + l1[k] * a[static_cast<std::size_t>(k)]) * scratch_p[k];
        return h;
    }

    // running cost + controlled tagged generator, for policy evaluation
    double policy_cost_at(const double* u, const double* at, int x,
                          std::size_t m, double* scratch_p) const {
        std::size_t i = static_cast<std::size_t>(x) * S + m;
        diff(u, x, m, scratch_p);
        const double* l0 = tab->lam0.data() + i * dm1;
        const double* l1 = tab->lam1.data() + i * dm1;
        const double* a = at + i * dm1;
        double h;
        if (quadratic) {
            h = tab->f[i];
            for (int k = 0; k < dm1; ++k) h += 0.5 * a[k] * a[k];
        } else {
            h = model->cost().running_cost(x, sx->counts(m), {a, static_cast<std::size_t>(dm1)});
        }
        for (int k = 0; k < dm1; ++k)
            h += (l0[k] + l1[k] * a[k]) * scratch_p[k];
        return h;
    }

    // population generator under the grid-interpolated control slice bt
    double population_at(const double* u, const double* bt, int x,
                         std::size_t m) const {
        std::size_t i = static_cast<std::size_t>(x) * S + m;
        const double ui = u[i];
        auto counts = sx->counts(m);
        double acc = 0;
        for (int z = 0; z < d; ++z) {
            int nz = counts[static_cast<std::size_t>(z)];
            if (nz == 0) continue;
            std::size_t nu = sx->shifted(m, x, z);  // mu + e_{x,z}
            std::size_t j = static_cast<std::size_t>(z) * S + nu;
            const double* l0 = tab->lam0.data() + j * dm1;
            const double* l1 = tab->lam1.data() + j * dm1;
            const double* b = bt + j * dm1;
            for (int y = 0; y < d; ++y) {
                if (y == z) continue;
                int k = rate_slot(y, z);
                double rate = l0[k] + l1[k] * b[k];
                if (rate == 0) continue;
                std::size_t ms = sx->shifted(m, y, z);  // mu + e_{y,z}
                acc += nz * rate * (u[static_cast<std::size_t>(x) * S + ms] - ui);
            }
        }
        return acc;
    }

    void check_finite(std::span<const double> out, std::span<const double> u,
                      double t) const {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (std::isfinite(out[i])) continue;
            // a wild trial step explains it; let the controller reject those
            for (double v : u)
                if (!std::isfinite(v)) return;
            std::size_t x = i / S, m = i % S;
            throw SolverError("non-finite RHS at state (x=" + model->label(static_cast<int>(x)) +
                                  ", mu_rank=" + std::to_string(m) + ", t=" + std::to_string(t) + ")",
                              t);
        }
    }
};

void fill_minimizer_slice(const Assembler& A, std::span<const double> u,
                          std::span<double> alpha_slice,
                          std::vector<double>& pfield) {
    // difference field in control layout, then the closed-form clamp in one
    // pass (quadratic family); custom costs go state by state
    const std::size_t dm1 = static_cast<std::size_t>(A.dm1);
    for (int x = 0; x < A.d; ++x) {
        for (std::size_t m = 0; m < A.S; ++m) {
            std::size_t i = static_cast<std::size_t>(x) * A.S + m;
            A.diff(u.data(), x, m, pfield.data() + i * dm1);
        }
    }
    if (A.quadratic) {
        kernels::ops().relu_neg_prod(alpha_slice.data(), A.tab->lam1.data(),
                                     pfield.data(), alpha_slice.size());
        return;
    }
    for (int x = 0; x < A.d; ++x) {
        for (std::size_t m = 0; m < A.S; ++m) {
            std::size_t i = static_cast<std::size_t>(x) * A.S + m;
            A.model->cost().custom_minimizer(
                x, A.sx->counts(m), {pfield.data() + i * dm1, dm1},
                {alpha_slice.data() + i * dm1, dm1});
        }
    }
}

void check_compatible(const GameModel& model, const ControlField& c,
                      const TimeGrid& grid, const char* who) {
    const Tabulation& tab = model.tables();
    if (c.d != tab.d || c.S != tab.S)
        throw std::invalid_argument(std::string(who) + ": control field dimensions do not match the model");
    if (std::abs(c.grid.T - grid.T) > 1e-12 * grid.T)
        throw std::invalid_argument(std::string(who) + ": control horizon does not match the grid");
}

OdeConfig with_default_step(const OdeConfig& cfg, const TimeGrid& grid) {
    OdeConfig c = cfg;
    if (c.max_step <= 0) c.max_step = grid.dt();
    c.max_step = std::min(c.max_step, grid.dt());
    return c;
}

std::vector<double> sample_times(const TimeGrid& grid) {
    std::vector<double> s(static_cast<std::size_t>(grid.M));
    for (int j = 1; j <= grid.M; ++j) s[static_cast<std::size_t>(j - 1)] = grid.node(j);
    return s;
}

}  // namespace

ValueField solve_hjb(const GameModel& model, const ControlField& beta,
                     const TimeGrid& grid, const OdeConfig& cfg,
                     OdeStats* stats) {
    Assembler A(model);
    check_compatible(model, beta, grid, "solve_hjb");
    OdeConfig c = with_default_step(cfg, grid);

    ValueField v(grid, A.d, A.S);
    std::copy(A.tab->g.begin(), A.tab->g.end(), v.slice(grid.M).begin());

    std::vector<double> y(A.tab->g);
    std::vector<double> bt(beta.per_node());
    double T = grid.T;

    OdeRhs rhs = [&](double tau, std::span<const double> u, std::span<double> out) {
        beta.eval_slice(T - tau, bt);
        double p[64], a[64];
        for (int x = 0; x < A.d; ++x) {
            for (std::size_t m = 0; m < A.S; ++m) {
                std::size_t i = static_cast<std::size_t>(x) * A.S + m;
                out[i] = A.hamiltonian_at(u.data(), x, m, p, a) +
                         A.population_at(u.data(), bt.data(), x, m);
            }
        }
        A.check_finite(out, u, T - tau);
    };

    auto ts = sample_times(grid);
    OdeStats st = dopri5(rhs, y, 0.0, T, c, ts,
                         [&](std::size_t j, std::span<const double> u) {
                             auto dst = v.slice(grid.M - static_cast<int>(j) - 1);
                             std::copy(u.begin(), u.end(), dst.begin());
                         });
    if (stats) *stats = st;
    return v;
}

DirectSolveResult solve_nll_direct(const GameModel& model, const TimeGrid& grid,
                                   const OdeConfig& cfg, OdeStats* stats) {
    Assembler A(model);
    OdeConfig c = with_default_step(cfg, grid);
    Bounds bounds = compute_bounds(model);

    DirectSolveResult res;
    res.value = ValueField(grid, A.d, A.S);
    res.control = ControlField(grid, A.d, A.S);
    std::copy(A.tab->g.begin(), A.tab->g.end(), res.value.slice(grid.M).begin());

    std::vector<double> y(A.tab->g);
    std::vector<double> afield(A.n * static_cast<std::size_t>(A.dm1));
    std::vector<double> pfield(A.n * static_cast<std::size_t>(A.dm1));

    OdeRhs rhs = [&](double tau, std::span<const double> u, std::span<double> out) {
        // the equilibrium control induced by the current field, used in both
        // the Hamiltonian (implicitly) and the population generator
        fill_minimizer_slice(A, u, afield, pfield);
        double p[64], a[64];
        for (int x = 0; x < A.d; ++x) {
            for (std::size_t m = 0; m < A.S; ++m) {
                std::size_t i = static_cast<std::size_t>(x) * A.S + m;
                out[i] = A.hamiltonian_at(u.data(), x, m, p, a) +
                         A.population_at(u.data(), afield.data(), x, m);
            }
        }
        A.check_finite(out, u, grid.T - tau);
    };

    auto ts = sample_times(grid);
    OdeStats st = dopri5(rhs, y, 0.0, grid.T, c, ts,
                         [&](std::size_t j, std::span<const double> u) {
                             int k = grid.M - static_cast<int>(j) - 1;
                             std::copy(u.begin(), u.end(), res.value.slice(k).begin());
                             for (double vv : u)
                                 res.sup_value = std::max(res.sup_value, std::fabs(vv));
                         });
    if (stats) *stats = st;

    minimizer_field(model, res.value, res.control);
    for (double vv : res.value.slice(grid.M)) res.sup_value = std::max(res.sup_value, std::fabs(vv));
    res.instability = res.sup_value > 10.0 * bounds.c_v;
    return res;
}

ValueField evaluate_policy(const GameModel& model, const ControlField& alpha,
                           const ControlField& beta, const TimeGrid& grid,
                           const OdeConfig& cfg, OdeStats* stats) {
    Assembler A(model);
    check_compatible(model, alpha, grid, "evaluate_policy");
    check_compatible(model, beta, grid, "evaluate_policy");
    OdeConfig c = with_default_step(cfg, grid);

    ValueField v(grid, A.d, A.S);
    std::copy(A.tab->g.begin(), A.tab->g.end(), v.slice(grid.M).begin());

    std::vector<double> y(A.tab->g);
    std::vector<double> at(alpha.per_node()), bt(beta.per_node());
    double T = grid.T;

    OdeRhs rhs = [&](double tau, std::span<const double> u, std::span<double> out) {
        alpha.eval_slice(T - tau, at);
        beta.eval_slice(T - tau, bt);
        double p[64];
        for (int x = 0; x < A.d; ++x) {
            for (std::size_t m = 0; m < A.S; ++m) {
                std::size_t i = static_cast<std::size_t>(x) * A.S + m;
                out[i] = A.policy_cost_at(u.data(), at.data(), x, m, p) +
                         A.population_at(u.data(), bt.data(), x, m);
            }
        }
        A.check_finite(out, u, T - tau);
    };

    auto ts = sample_times(grid);
    OdeStats st = dopri5(rhs, y, 0.0, T, c, ts,
                         [&](std::size_t j, std::span<const double> u) {
                             auto dst = v.slice(grid.M - static_cast<int>(j) - 1);
                             std::copy(u.begin(), u.end(), dst.begin());
                         });
    if (stats) *stats = st;
    return v;
}

void minimizer_field(const GameModel& model, const ValueField& v,
                     ControlField& alpha_out) {
    Assembler A(model);
    if (alpha_out.d != A.d || alpha_out.S != A.S || !(alpha_out.grid == v.grid))
        alpha_out = ControlField(v.grid, A.d, A.S);
    std::vector<double> pfield(A.n * static_cast<std::size_t>(A.dm1));
    for (int k = 0; k <= v.grid.M; ++k)
        fill_minimizer_slice(A, v.slice(k), alpha_out.slice(k), pfield);
}

}  // namespace mpe
