#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mpe/simplex.hpp"

namespace mpe {

// Rates are indexed by destination: for tagged state x, slot k maps to
// destination y = k if k < x else k+1. This is the single place the paper's
// rate convention lives; use these two helpers everywhere.
inline int rate_slot(int y, int x) { return y < x ? y : y - 1; }
inline int slot_dest(int k, int x) { return k < x ? k : k + 1; }

using RateVector = std::vector<double>;  // d-1 nonnegative rates

// Running cost. Built-in family: l(x,mu,a) = 0.5*|a|^2 + f(x,mu), strongly
// convex with gamma = 1 and a closed-form Hamiltonian minimizer. Custom costs
// must supply the pair (l, argmin) together; there is no numeric inner solver.
struct CostModel {
    using StateCost = std::function<double(int x, std::span<const int> counts)>;
    using RunningCost = std::function<double(int x, std::span<const int> counts,
                                             std::span<const double> a)>;
    using Minimizer = std::function<void(int x, std::span<const int> counts,
                                         std::span<const double> p,
                                         std::span<double> a_out)>;
    using RunningCostGrad = std::function<void(int x, std::span<const int> counts,
                                               std::span<const double> a,
                                               std::span<double> dl_da)>;

    static CostModel quadratic_plus_state(StateCost f);
    // dl_da is optional; simulation-based training needs it for custom costs
    static CostModel custom(RunningCost l, Minimizer argmin,
                            double strong_convexity,
                            RunningCostGrad dl_da = nullptr);

    bool is_quadratic() const { return !running_cost; }

    StateCost state_cost;      // f, quadratic family only
    RunningCost running_cost;  // custom l
    Minimizer custom_minimizer;
    RunningCostGrad running_cost_grad;
    double gamma = 1.0;  // strong convexity constant
};

// Dense per-state tables of the model data, sized d*|simplex|*(d-1) for rates
// and d*|simplex| for costs. Built once; the ODE solvers read these instead of
// calling the model callbacks O(grid x iterations) times.
struct Tabulation {
    std::shared_ptr<const SimplexTable> simplex;
    int d = 0;
    std::size_t S = 0;
    std::vector<double> lam0, lam1;  // (d*S)*(d-1)
    std::vector<double> f, g;        // d*S
    double lam1_max = 0;

    std::size_t n_states() const { return static_cast<std::size_t>(d) * S; }
    std::span<const double> lam0_at(std::size_t state) const {
        return {lam0.data() + state * (d - 1), static_cast<std::size_t>(d - 1)};
    }
    std::span<const double> lam1_at(std::size_t state) const {
        return {lam1.data() + state * (d - 1), static_cast<std::size_t>(d - 1)};
    }
};

// The game: horizon, uncontrolled rates lambda0, control gains lambda1,
// running and terminal costs. Immutable after construction; the lazily built
// simplex/tabulation caches are shared and safe for concurrent readers.
class GameModel {
public:
    using RateCallback = std::function<void(int x, std::span<const int> counts,
                                            std::span<double> out)>;
    using ScalarCallback = std::function<double(int x, std::span<const int> counts)>;

    GameModel(int d, int N, double T, RateCallback lambda0, RateCallback lambda1,
              CostModel cost, ScalarCallback terminal,
              std::vector<std::string> state_labels = {});

    int d() const { return d_; }
    int N() const { return N_; }
    double T() const { return T_; }
    const CostModel& cost() const { return cost_; }

    void lambda0(int x, std::span<const int> counts, std::span<double> out) const;
    void lambda1(int x, std::span<const int> counts, std::span<double> out) const;
    double terminal(int x, std::span<const int> counts) const;
    double running_cost(int x, std::span<const int> counts,
                        std::span<const double> a) const;

    // unique Hamiltonian minimizer alpha_hat(x, mu, p)
    void minimizer(int x, std::span<const int> counts, std::span<const double> p,
                   std::span<double> a_out) const;
    double hamiltonian(int x, std::span<const int> counts,
                       std::span<const double> p) const;

    // Enumerated simplex (requires N >= 1) and dense tables; built on first
    // use, then cached. The tabulation cap rejects d*|simplex| beyond
    // max_table_entries (default 1e7).
    const SimplexTable& simplex() const;
    const Tabulation& tables() const;
    std::size_t max_table_entries = 10'000'000;

    const std::string& label(int x) const { return labels_[static_cast<std::size_t>(x)]; }
    const std::vector<std::string>& labels() const { return labels_; }
    int state_from_label(const std::string& s) const;

private:
    int d_, N_;
    double T_;
    RateCallback lambda0_, lambda1_;
    CostModel cost_;
    ScalarCallback terminal_;
    std::vector<std::string> labels_;
    struct Cache;
    std::shared_ptr<Cache> cache_;
};

// first difference vector: out[slot(y|x)] = values_by_state[y] - values_by_state[x]
void delta_x(std::span<const double> values_by_state, int x, std::span<double> out);

using FieldFn = std::function<double(int x, std::span<const int> counts)>;
using ControlFn = std::function<void(int z, std::span<const int> counts,
                                     std::span<double> rates_out)>;

// (L^alpha_x phi)(x,mu): tagged-player generator applied to a field.
double tagged_generator(const GameModel& model, const FieldFn& v,
                        const ControlFn& alpha, int x, std::span<const int> counts);

// (L^beta_mu phi)(x,mu): population generator; note the measure shift
// mu + e_{x,z} inside rates and controls, and that terms with zero count
// vanish.
double population_generator(const GameModel& model, const FieldFn& v,
                            const ControlFn& beta, int x, std::span<const int> counts);

struct Bounds {
    double c_v;  // sup of value functions over all admissible beta
    double c_a;  // sup of best-response norms (diagnostic, not a clamp)
};
Bounds compute_bounds(const GameModel& model);

}  // namespace mpe
