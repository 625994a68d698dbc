#include "mpe/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

namespace mpe {

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0;
        for (double x : v) s += x;
        return s;
    }
    std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {

void check_init(const GameModel& model, int x0, const CountVector& counts0) {
    if (x0 < 0 || x0 >= model.d())
        throw std::invalid_argument("simulate: initial tagged state out of range");
    if (static_cast<int>(counts0.size()) != model.d())
        throw std::invalid_argument("simulate: counts dimension mismatch");
    int sum = 0;
    for (int c : counts0) {
        if (c < 0) throw std::invalid_argument("simulate: negative count");
        sum += c;
    }
    if (sum != model.N())
        throw std::invalid_argument("simulate: counts must sum to N");
}

// per-destination rates of every actor at (t, x, mu); seen/buf are scratch
struct RateTable {
    std::vector<double> tagged;            // d-1, per destination slot
    std::vector<double> untagged;          // d*(d-1), per-player rates at z
    std::vector<double> lambda_z;          // d, n_z * sum of per-player rates
    double lambda_tagged = 0;

    void resize(int d) {
        tagged.assign(d - 1, 0.0);
        untagged.assign(static_cast<std::size_t>(d) * (d - 1), 0.0);
        lambda_z.assign(d, 0.0);
    }
};

void fill_rates(const GameModel& model, double t, int x,
                std::span<const int> counts, const ControlPolicy& alpha,
                const ControlPolicy& beta, RateTable& rt, CountVector& seen,
                std::vector<double>& l0, std::vector<double>& l1,
                std::vector<double>& ctrl) {
    const int d = model.d();
    const int dm1 = d - 1;

    model.lambda0(x, counts, l0);
    model.lambda1(x, counts, l1);
    alpha.rates(t, x, counts, ctrl);
    rt.lambda_tagged = 0;
    for (int k = 0; k < dm1; ++k) {
        double a = ctrl[static_cast<std::size_t>(k)];
        if (!(a >= 0) || !std::isfinite(a))
            throw std::domain_error("simulate: non-finite or negative tagged control rate");
        rt.tagged[static_cast<std::size_t>(k)] = l0[static_cast<std::size_t>(k)] + l1[static_cast<std::size_t>(k)] * a;
        rt.lambda_tagged += rt.tagged[static_cast<std::size_t>(k)];
    }

    for (int z = 0; z < d; ++z) {
        rt.lambda_z[static_cast<std::size_t>(z)] = 0;
        int nz = counts[static_cast<std::size_t>(z)];
        double* row = rt.untagged.data() + static_cast<std::size_t>(z) * dm1;
        std::fill(row, row + dm1, 0.0);
        if (nz == 0) continue;
        for (int i = 0; i < d; ++i) seen[static_cast<std::size_t>(i)] = counts[static_cast<std::size_t>(i)];
        seen[static_cast<std::size_t>(x)] += 1;
        seen[static_cast<std::size_t>(z)] -= 1;
        model.lambda0(z, seen, l0);
        model.lambda1(z, seen, l1);
        beta.rates(t, z, seen, ctrl);
        double s = 0;
        for (int k = 0; k < dm1; ++k) {
            double b = ctrl[static_cast<std::size_t>(k)];
            if (!(b >= 0) || !std::isfinite(b))
                throw std::domain_error("simulate: non-finite or negative untagged control rate");
            row[k] = l0[static_cast<std::size_t>(k)] + l1[static_cast<std::size_t>(k)] * b;
            s += row[k];
        }
        rt.lambda_z[static_cast<std::size_t>(z)] = nz * s;
    }
}

}  // namespace

TotalRates total_rates(const GameModel& model, double t, int x,
                       std::span<const int> counts, const ControlPolicy& alpha,
                       const ControlPolicy& beta) {
    RateTable rt;
    rt.resize(model.d());
    CountVector seen(model.d());
    std::vector<double> l0(model.d() - 1), l1(model.d() - 1), ctrl(model.d() - 1);
    fill_rates(model, t, x, counts, alpha, beta, rt, seen, l0, l1, ctrl);
    TotalRates out;
    out.tagged = rt.lambda_tagged;
    out.untagged_by_z = rt.lambda_z;
    return out;
}

TrajectoryRecord simulate_trajectory(const GameModel& model,
                                     const ControlPolicy& alpha,
                                     const ControlPolicy& beta, int x0,
                                     CountVector counts0, RngStream& rng,
                                     const SimOptions& opts) {
    check_init(model, x0, counts0);
    const int d = model.d();
    const int dm1 = d - 1;
    const double T = model.T();

    double quad_dt = opts.cost_dt;
    if (quad_dt <= 0) {
        double pa = alpha.preferred_dt(), pb = beta.preferred_dt();
        if (pa > 0 && pb > 0) quad_dt = std::min(pa, pb);
        else if (pa > 0) quad_dt = pa;
        else if (pb > 0) quad_dt = pb;
        else quad_dt = T / 256;
    }

    TrajectoryRecord rec;
    rec.x0 = x0;
    rec.counts0 = counts0;

    RateTable rt;
    rt.resize(d);
    CountVector counts = std::move(counts0), seen(d);
    std::vector<double> l0(dm1), l1(dm1), ctrl(dm1);
    int x = x0;
    double t = 0;

    // trapezoid of the running cost (and, in thinning mode, of the tagged
    // intensity) over [a, b] in the frozen state (x, counts)
    auto integrate_interval = [&](double a, double b) {
        if (b <= a) return;
        auto eval_l = [&](double u) {
            alpha.rates(u, x, counts, ctrl);
            return model.running_cost(x, counts, ctrl);
        };
        long j0 = static_cast<long>(std::floor(a / quad_dt)) + 1;
        double prev_u = a, prev_l = eval_l(a), acc = 0;
        for (long j = j0; j * quad_dt < b; ++j) {
            double u = j * quad_dt;
            if (u <= prev_u) continue;
            double lu = eval_l(u);
            acc += 0.5 * (prev_l + lu) * (u - prev_u);
            prev_u = u;
            prev_l = lu;
        }
        double lb = eval_l(b);
        acc += 0.5 * (prev_l + lb) * (b - prev_u);
        rec.cost += acc;
    };

    auto intensity_at = [&](double u) {
        model.lambda0(x, counts, l0);
        model.lambda1(x, counts, l1);
        alpha.rates(u, x, counts, ctrl);
        double s = 0;
        for (int k = 0; k < dm1; ++k) s += l0[static_cast<std::size_t>(k)] + l1[static_cast<std::size_t>(k)] * ctrl[static_cast<std::size_t>(k)];
        return s;
    };
    auto integrate_intensity = [&](double a, double b) {
        if (b <= a) return;
        long j0 = static_cast<long>(std::floor(a / quad_dt)) + 1;
        double prev_u = a, prev_v = intensity_at(a), acc = 0;
        for (long j = j0; j * quad_dt < b; ++j) {
            double u = j * quad_dt;
            if (u <= prev_u) continue;
            double vu = intensity_at(u);
            acc += 0.5 * (prev_v + vu) * (u - prev_u);
            prev_u = u;
            prev_v = vu;
        }
        acc += 0.5 * (prev_v + intensity_at(b)) * (b - prev_u);
        rec.loglik_intensity += acc;
    };

    if (opts.thinning && !(opts.rate_bound > 0))
        throw std::invalid_argument("simulate: thinning mode needs a positive rate bound");

    while (t < T) {
        if (opts.thinning) {
            double tau = rng.exponential(opts.rate_bound);
            double tnext = t + tau;
            if (tnext >= T) {
                integrate_interval(t, T);
                integrate_intensity(t, T);
                t = T;
                break;
            }
            fill_rates(model, tnext, x, counts, alpha, beta, rt, seen, l0, l1, ctrl);
            double lam = rt.lambda_tagged;
            for (int z = 0; z < d; ++z) lam += rt.lambda_z[static_cast<std::size_t>(z)];
            if (lam > opts.rate_bound * (1 + 1e-12))
                throw std::domain_error("simulate: rate bound violated in thinning mode");
            integrate_interval(t, tnext);
            integrate_intensity(t, tnext);
            t = tnext;
            if (rng.uniform() * opts.rate_bound >= lam) continue;  // ghost event
        } else {
            fill_rates(model, t, x, counts, alpha, beta, rt, seen, l0, l1, ctrl);
            double lam = rt.lambda_tagged;
            for (int z = 0; z < d; ++z) lam += rt.lambda_z[static_cast<std::size_t>(z)];
            if (!(lam > 0)) {
                integrate_interval(t, T);
                t = T;
                break;
            }
            double tau = rng.exponential(lam);
            double tnext = t + tau;
            if (tnext >= T) {
                integrate_interval(t, T);
                rec.loglik_intensity += rt.lambda_tagged * (T - t);
                t = T;
                break;
            }
            integrate_interval(t, tnext);
            rec.loglik_intensity += rt.lambda_tagged * (tnext - t);
            t = tnext;
        }

        // choose the actor: (tagged, untagged in state 1, ..., state d)
        double lam = rt.lambda_tagged;
        for (int z = 0; z < d; ++z) lam += rt.lambda_z[static_cast<std::size_t>(z)];
        double u = rng.uniform() * lam;
        if (u < rt.lambda_tagged) {
            int k = rng.categorical(rt.tagged, rt.lambda_tagged);
            int dest = slot_dest(k, x);
            rec.loglik_jumps += std::log(rt.tagged[static_cast<std::size_t>(k)]);
            if (opts.record_events) rec.events.push_back({t, -1, x, dest});
            x = dest;
        } else {
            u -= rt.lambda_tagged;
            int z = 0;
            while (z < d - 1 && u >= rt.lambda_z[static_cast<std::size_t>(z)]) {
                u -= rt.lambda_z[static_cast<std::size_t>(z)];
                ++z;
            }
            const double* row = rt.untagged.data() + static_cast<std::size_t>(z) * dm1;
            double rowsum = 0;
            for (int k = 0; k < dm1; ++k) rowsum += row[k];
            int k = rng.categorical({row, static_cast<std::size_t>(dm1)}, rowsum);
            int dest = slot_dest(k, z);
            if (opts.record_events) rec.events.push_back({t, z, z, dest});
            counts[static_cast<std::size_t>(z)] -= 1;
            counts[static_cast<std::size_t>(dest)] += 1;
        }
    }

    rec.cost += model.terminal(x, counts);
    return rec;
}

InitialDistribution InitialDistribution::deterministic(int x0, CountVector counts0) {
    InitialDistribution d;
    d.det_ = {x0, std::move(counts0)};
    return d;
}

InitialDistribution InitialDistribution::iid(std::vector<double> probs) {
    double s = 0;
    for (double p : probs) {
        if (!(p >= 0)) throw std::invalid_argument("InitialDistribution: negative probability");
        s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9)
        throw std::invalid_argument("InitialDistribution: probabilities must sum to 1");
    InitialDistribution d;
    d.probs_ = std::move(probs);
    return d;
}

void InitialDistribution::sample(RngStream& rng, int d, int N, int& x0,
                                 CountVector& counts0) const {
    if (det_) {
        x0 = det_->first;
        counts0 = det_->second;
        return;
    }
    if (static_cast<int>(probs_.size()) != d)
        throw std::invalid_argument("InitialDistribution: dimension mismatch");
    x0 = rng.categorical(probs_, 1.0);
    counts0.assign(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < N; ++i)
        counts0[static_cast<std::size_t>(rng.categorical(probs_, 1.0))] += 1;
}

CostEstimate estimate_cost(const GameModel& model, const ControlPolicy& alpha,
                           const ControlPolicy& beta,
                           const InitialDistribution& theta0, int M,
                           std::uint64_t seed, int threads,
                           const SimOptions& opts,
                           std::vector<double>* costs_out,
                           std::vector<TrajectoryRecord>* records_out) {
    if (M < 2) throw std::invalid_argument("estimate_cost: need M >= 2");
    std::vector<double> costs(static_cast<std::size_t>(M));
    std::vector<int> xs(static_cast<std::size_t>(M));
    std::vector<CountVector> cs(static_cast<std::size_t>(M));
    if (records_out) records_out->resize(static_cast<std::size_t>(M));

    SimOptions o = opts;
    if (records_out == nullptr) o.record_events = false;

    auto work = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            RngStream rng(seed, static_cast<std::uint64_t>(i));
            int x0;
            CountVector counts0;
            theta0.sample(rng, model.d(), model.N(), x0, counts0);
            TrajectoryRecord rec = simulate_trajectory(model, alpha, beta, x0,
                                                       std::move(counts0), rng, o);
            costs[static_cast<std::size_t>(i)] = rec.cost;
            xs[static_cast<std::size_t>(i)] = rec.x0;
            cs[static_cast<std::size_t>(i)] = rec.counts0;
            if (records_out) (*records_out)[static_cast<std::size_t>(i)] = std::move(rec);
        }
    };

    threads = std::max(1, threads);
    if (threads == 1) {
        work(0, M);
    } else {
        std::vector<std::thread> pool;
        int chunk = (M + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            int lo = t * chunk, hi = std::min(M, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    CostEstimate est;
    est.trajectories = M;
    est.mean = pairwise_sum(costs) / M;
    std::vector<double> sq(costs.size());
    for (std::size_t i = 0; i < costs.size(); ++i) {
        double dlt = costs[i] - est.mean;
        sq[i] = dlt * dlt;
    }
    est.std_error = std::sqrt(pairwise_sum(sq) / (static_cast<double>(M) * (M - 1)));

    std::map<std::pair<int, CountVector>, std::pair<long, double>> groups;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        auto& g = groups[{xs[i], cs[i]}];
        g.first += 1;
        g.second += costs[i];
    }
    for (auto& [key, g] : groups)
        est.by_start.push_back({key.first, key.second, g.first, g.second / g.first});

    if (costs_out) *costs_out = std::move(costs);
    return est;
}

}  // namespace mpe
