#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mpe/field.hpp"
#include "mpe/game.hpp"
#include "mpe/rng.hpp"

namespace mpe {

// A feedback control evaluable anywhere, as seen by the simulator.
class ControlPolicy {
public:
    virtual ~ControlPolicy() = default;
    virtual void rates(double t, int x, std::span<const int> counts,
                       std::span<double> out) const = 0;
    // spacing hint for the running-cost quadrature; 0 means none
    virtual double preferred_dt() const { return 0; }
};

class ZeroPolicy final : public ControlPolicy {
public:
    void rates(double, int, std::span<const int>, std::span<double> out) const override {
        for (double& v : out) v = 0;
    }
};

class ConstantPolicy final : public ControlPolicy {
public:
    explicit ConstantPolicy(std::vector<double> r) : rates_(std::move(r)) {}
    void rates(double, int, std::span<const int>, std::span<double> out) const override {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = rates_[k];
    }

private:
    std::vector<double> rates_;
};

// Grid control: rank lookup into a ControlField with linear interpolation.
class GridPolicy final : public ControlPolicy {
public:
    GridPolicy(const ControlField& field, const SimplexTable& simplex)
        : field_(&field), simplex_(&simplex) {}
    void rates(double t, int x, std::span<const int> counts,
               std::span<double> out) const override {
        field_->eval_rates(t, x, simplex_->rank(counts), out);
    }
    double preferred_dt() const override { return field_->grid.dt(); }

private:
    const ControlField* field_;
    const SimplexTable* simplex_;
};

class FunctionPolicy final : public ControlPolicy {
public:
    using Fn = std::function<void(double, int, std::span<const int>, std::span<double>)>;
    explicit FunctionPolicy(Fn fn) : fn_(std::move(fn)) {}
    void rates(double t, int x, std::span<const int> counts,
               std::span<double> out) const override {
        fn_(t, x, counts, out);
    }

private:
    Fn fn_;
};

struct TotalRates {
    double tagged = 0;
    std::vector<double> untagged_by_z;  // entries for empty states are 0
    double total() const {
        double s = tagged;
        for (double v : untagged_by_z) s += v;
        return s;
    }
};

// Pooled jump rates at (t, x, mu); mirrors the generator coefficients.
TotalRates total_rates(const GameModel& model, double t, int x,
                       std::span<const int> counts, const ControlPolicy& alpha,
                       const ControlPolicy& beta);

struct Event {
    double time;
    int actor;  // -1 for the tagged player, else the untagged player's state z
    int from;
    int to;
};

struct TrajectoryRecord {
    int x0 = 0;
    CountVector counts0;
    std::vector<Event> events;
    double cost = 0;  // running + terminal
    // for gradient estimation: sum of log tagged jump rates, and the integral
    // of the tagged total rate
    double loglik_jumps = 0;
    double loglik_intensity = 0;
};

struct SimOptions {
    // The default scheme freezes rates at the last event time (exact for
    // piecewise-constant rates). Thinning mode is exact for time-varying
    // controls given a global upper bound on the total rate.
    bool thinning = false;
    double rate_bound = 0;
    bool record_events = true;
    double cost_dt = 0;  // running-cost quadrature spacing; 0 = derive
};

TrajectoryRecord simulate_trajectory(const GameModel& model,
                                     const ControlPolicy& alpha,
                                     const ControlPolicy& beta, int x0,
                                     CountVector counts0, RngStream& rng,
                                     const SimOptions& opts = {});

// Initial distribution of tagged position and untagged counts.
class InitialDistribution {
public:
    static InitialDistribution deterministic(int x0, CountVector counts0);
    // all N+1 players sampled i.i.d. from probs, one tagged uniformly
    static InitialDistribution iid(std::vector<double> probs);

    void sample(RngStream& rng, int d, int N, int& x0, CountVector& counts0) const;

private:
    std::optional<std::pair<int, CountVector>> det_;
    std::vector<double> probs_;
};

struct StartStat {
    int x0;
    CountVector counts0;
    long count = 0;
    double mean_cost = 0;
};

struct CostEstimate {
    double mean = 0;
    double std_error = 0;
    long trajectories = 0;
    std::vector<StartStat> by_start;
};

// Monte Carlo estimate of the cost functional. Reproducible: per-trajectory
// streams are derived from (seed, index) and the reduction is a fixed-order
// pairwise sum, so the result is independent of the thread count.
CostEstimate estimate_cost(const GameModel& model, const ControlPolicy& alpha,
                           const ControlPolicy& beta,
                           const InitialDistribution& theta0, int M,
                           std::uint64_t seed, int threads = 1,
                           const SimOptions& opts = {},
                           std::vector<double>* costs_out = nullptr,
                           std::vector<TrajectoryRecord>* records_out = nullptr);

// fixed-order pairwise sum; deterministic regardless of parallel schedule
double pairwise_sum(std::span<const double> v);

}  // namespace mpe
