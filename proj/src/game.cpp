#include "mpe/game.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace mpe {

CostModel CostModel::quadratic_plus_state(StateCost f) {
    CostModel c;
    c.state_cost = std::move(f);
    c.gamma = 1.0;
    return c;
}

CostModel CostModel::custom(RunningCost l, Minimizer argmin,
                            double strong_convexity, RunningCostGrad dl_da) {
    if (!l || !argmin)
        throw std::invalid_argument("CostModel::custom: l and argmin must be supplied together");
    if (!(strong_convexity > 0))
        throw std::invalid_argument("CostModel::custom: strong convexity must be > 0");
    CostModel c;
    c.running_cost = std::move(l);
    c.custom_minimizer = std::move(argmin);
    c.running_cost_grad = std::move(dl_da);
    c.gamma = strong_convexity;
    return c;
}

struct GameModel::Cache {
    std::once_flag simplex_once, tab_once;
    std::shared_ptr<const SimplexTable> simplex;
    std::shared_ptr<const Tabulation> tab;
};

GameModel::GameModel(int d, int N, double T, RateCallback lambda0,
                     RateCallback lambda1, CostModel cost,
                     ScalarCallback terminal, std::vector<std::string> labels)
    : d_(d),
      N_(N),
      T_(T),
      lambda0_(std::move(lambda0)),
      lambda1_(std::move(lambda1)),
      cost_(std::move(cost)),
      terminal_(std::move(terminal)),
      labels_(std::move(labels)),
      cache_(std::make_shared<Cache>()) {
    if (d_ < 2) throw std::invalid_argument("GameModel: d must be >= 2");
    if (d_ > 64) throw std::invalid_argument("GameModel: d beyond enumerable range");
    if (N_ < 0) throw std::invalid_argument("GameModel: N must be >= 0");
    if (!(T_ > 0)) throw std::invalid_argument("GameModel: T must be > 0");
    if (!lambda0_ || !lambda1_ || !terminal_)
        throw std::invalid_argument("GameModel: missing rate or terminal callback");
    if (labels_.empty()) {
        for (int x = 1; x <= d_; ++x) labels_.push_back(std::to_string(x));
    }
    if (static_cast<int>(labels_.size()) != d_)
        throw std::invalid_argument("GameModel: wrong number of state labels");
}

void GameModel::lambda0(int x, std::span<const int> counts,
                        std::span<double> out) const {
    lambda0_(x, counts, out);
}

void GameModel::lambda1(int x, std::span<const int> counts,
                        std::span<double> out) const {
    lambda1_(x, counts, out);
}

double GameModel::terminal(int x, std::span<const int> counts) const {
    return terminal_(x, counts);
}

double GameModel::running_cost(int x, std::span<const int> counts,
                               std::span<const double> a) const {
    if (cost_.is_quadratic()) {
        double q = 0;
        for (double v : a) q += v * v;
        return 0.5 * q + (cost_.state_cost ? cost_.state_cost(x, counts) : 0.0);
    }
    return cost_.running_cost(x, counts, a);
}

void GameModel::minimizer(int x, std::span<const int> counts,
                          std::span<const double> p,
                          std::span<double> a_out) const {
    if (!cost_.is_quadratic()) {
        cost_.custom_minimizer(x, counts, p, a_out);
        return;
    }
    // argmin_a 0.5|a|^2 + sum a_k lam1_k p_k, a >= 0
    double l1[64];
    std::span<double> lam1s(l1, p.size());
    lambda1_(x, counts, lam1s);
    for (std::size_t k = 0; k < p.size(); ++k)
        a_out[k] = std::max(0.0, -lam1s[k] * p[k]);
}

double GameModel::hamiltonian(int x, std::span<const int> counts,
                              std::span<const double> p) const {
    int dm1 = d_ - 1;
    double l0[64], l1[64], a[64];
    std::span<double> lam0s(l0, dm1), lam1s(l1, dm1), as(a, dm1);
    lambda0_(x, counts, lam0s);
    if (cost_.is_quadratic()) {
        lambda1_(x, counts, lam1s);
        double h = cost_.state_cost ? cost_.state_cost(x, counts) : 0.0;
        for (int k = 0; k < dm1; ++k) {
            double neg = std::max(0.0, -lam1s[k] * p[k]);
            h += lam0s[k] * p[k] - 0.5 * neg * neg;
        }
        return h;
    }
    minimizer(x, counts, p, as);
    lambda1_(x, counts, lam1s);
    double h = cost_.running_cost(x, counts, as);
    for (int k = 0; k < dm1; ++k) h += (lam0s[k] + lam1s[k] * a[k]) * p[k];
    return h;
}

const SimplexTable& GameModel::simplex() const {
    std::call_once(cache_->simplex_once, [this] {
        cache_->simplex = std::make_shared<const SimplexTable>(d_, N_);
    });
    return *cache_->simplex;
}

const Tabulation& GameModel::tables() const {
    std::call_once(cache_->tab_once, [this] {
        const SimplexTable& sx = simplex();
        auto tab = std::make_shared<Tabulation>();
        tab->simplex = cache_->simplex;
        tab->d = d_;
        tab->S = sx.size();
        std::size_t n = tab->n_states();
        if (n > max_table_entries)
            throw std::length_error("GameModel::tables: d*|simplex| exceeds table cap");
        std::size_t dm1 = static_cast<std::size_t>(d_ - 1);
        tab->lam0.assign(n * dm1, 0.0);
        tab->lam1.assign(n * dm1, 0.0);
        tab->f.assign(n, 0.0);
        tab->g.assign(n, 0.0);
        for (int x = 0; x < d_; ++x) {
            for (std::size_t m = 0; m < tab->S; ++m) {
                std::size_t i = joint_index(x, m, tab->S);
                auto counts = sx.counts(m);
                lambda0_(x, counts, {tab->lam0.data() + i * dm1, dm1});
                lambda1_(x, counts, {tab->lam1.data() + i * dm1, dm1});
                if (cost_.is_quadratic() && cost_.state_cost)
                    tab->f[i] = cost_.state_cost(x, counts);
                tab->g[i] = terminal_(x, counts);
                for (std::size_t k = 0; k < dm1; ++k) {
                    double r0 = tab->lam0[i * dm1 + k], r1 = tab->lam1[i * dm1 + k];
                    if (!(r0 >= 0) || !(r1 >= 0) || !std::isfinite(r0) || !std::isfinite(r1))
                        throw std::domain_error("GameModel: rates must be nonnegative and finite");
                    tab->lam1_max = std::max(tab->lam1_max, r1);
                }
                if (!(tab->g[i] >= 0) || !std::isfinite(tab->g[i]))
                    throw std::domain_error("GameModel: terminal cost must be nonnegative and finite");
            }
        }
        cache_->tab = tab;
    });
    return *cache_->tab;
}

int GameModel::state_from_label(const std::string& s) const {
    for (int x = 0; x < d_; ++x)
        if (labels_[static_cast<std::size_t>(x)] == s) return x;
    throw std::invalid_argument("unknown state label: " + s);
}

void delta_x(std::span<const double> values_by_state, int x,
             std::span<double> out) {
    int d = static_cast<int>(values_by_state.size());
    double vx = values_by_state[static_cast<std::size_t>(x)];
    for (int y = 0; y < d; ++y) {
        if (y == x) continue;
        out[static_cast<std::size_t>(rate_slot(y, x))] =
            values_by_state[static_cast<std::size_t>(y)] - vx;
    }
}

double tagged_generator(const GameModel& model, const FieldFn& v,
                        const ControlFn& alpha, int x,
                        std::span<const int> counts) {
    int d = model.d(), dm1 = d - 1;
    std::vector<double> l0(dm1), l1(dm1), a(dm1);
    model.lambda0(x, counts, l0);
    model.lambda1(x, counts, l1);
    alpha(x, counts, a);
    double vx = v(x, counts);
    double acc = 0;
    for (int y = 0; y < d; ++y) {
        if (y == x) continue;
        int k = rate_slot(y, x);
        double rate = l0[k] + l1[k] * a[k];
        if (!(a[k] >= 0))
            throw std::domain_error("tagged_generator: negative control rate");
        acc += rate * (v(y, counts) - vx);
    }
    return acc;
}

double population_generator(const GameModel& model, const FieldFn& v,
                            const ControlFn& beta, int x,
                            std::span<const int> counts) {
    int d = model.d(), dm1 = d - 1;
    std::vector<double> l0(dm1), l1(dm1), b(dm1);
    CountVector seen(d), moved(d);
    double vx = v(x, counts);
    double acc = 0;
    for (int z = 0; z < d; ++z) {
        int nz = counts[static_cast<std::size_t>(z)];
        if (nz == 0) continue;
        // distribution seen by an untagged player at z: mu + e_{x,z}
        for (int i = 0; i < d; ++i) seen[i] = counts[static_cast<std::size_t>(i)];
        seen[x] += 1;
        seen[z] -= 1;
        model.lambda0(z, seen, l0);
        model.lambda1(z, seen, l1);
        beta(z, seen, b);
        for (int y = 0; y < d; ++y) {
            if (y == z) continue;
            int k = rate_slot(y, z);
            if (!(b[k] >= 0))
                throw std::domain_error("population_generator: negative control rate");
            double rate = l0[k] + l1[k] * b[k];
            if (rate == 0) continue;
            for (int i = 0; i < d; ++i) moved[i] = counts[static_cast<std::size_t>(i)];
            moved[y] += 1;
            moved[z] -= 1;
            acc += nz * rate * (v(x, moved) - vx);
        }
    }
    return acc;
}

Bounds compute_bounds(const GameModel& model) {
    const Tabulation& tab = model.tables();
    const SimplexTable& sx = *tab.simplex;
    int d = model.d(), dm1 = d - 1;
    std::vector<double> zero(dm1, 0.0), a0(dm1);
    double c_v = 0, a0_max = 0;
    for (int x = 0; x < d; ++x) {
        for (std::size_t m = 0; m < sx.size(); ++m) {
            auto counts = sx.counts(m);
            double l0 = model.running_cost(x, counts, zero);
            c_v = std::max(c_v, model.T() * l0 + model.terminal(x, counts));
            model.minimizer(x, counts, zero, a0);
            double nrm = 0;
            for (double vv : a0) nrm += vv * vv;
            a0_max = std::max(a0_max, std::sqrt(nrm));
        }
    }
    double c_a = a0_max + 2.0 * tab.lam1_max * c_v *
                              std::sqrt(static_cast<double>(dm1)) / model.cost().gamma;
    return {c_v, c_a};
}

}  // namespace mpe
