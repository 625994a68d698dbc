#include "mpe/picard.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mpe/kernels.hpp"
#include "mpe/rng.hpp"
#include "mpe/verify.hpp"

namespace mpe {

void PicardConfig::validate() const {
    if (!(rho >= 0) || !(rho < 1))
        throw std::invalid_argument("PicardConfig: rho must lie in [0, 1)");
    if (max_iter < 1) throw std::invalid_argument("PicardConfig: max_iter must be >= 1");
    if (!(tol > 0)) throw std::invalid_argument("PicardConfig: tol must be > 0");
    ode.validate();
}

RateFit fit_rate(std::span<const double> residuals) {
    if (residuals.size() < 3)
        throw std::invalid_argument("fit_rate: need at least 3 residuals");
    for (double r : residuals)
        if (!(r > 0)) throw std::invalid_argument("fit_rate: residuals must be positive");

    const std::size_t n = residuals.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(i + 1);
        double y = std::log(residuals[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    double nd = static_cast<double>(n);
    double det = nd * sxx - sx * sx;
    RateFit fit;
    fit.slope = (nd * sxy - sx * sy) / det;
    fit.intercept = (sy - fit.slope * sx) / nd;
    double ss_tot = syy - sy * sy / nd;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(i + 1);
        double e = std::log(residuals[i]) - (fit.intercept + fit.slope * x);
        ss_res += e * e;
    }
    fit.r_squared = ss_tot > 1e-300 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

std::pair<ControlField, ValueField> best_response(const GameModel& model,
                                                  const ControlField& beta,
                                                  const TimeGrid& grid,
                                                  const OdeConfig& ode) {
    ValueField v = solve_hjb(model, beta, grid, ode);
    ControlField alpha;
    minimizer_field(model, v, alpha);
    return {std::move(alpha), std::move(v)};
}

namespace {

void fit_if_possible(PicardReport& rep) {
    if (rep.residuals.size() < 3) return;
    for (double r : rep.residuals)
        if (!(r > 0)) return;
    rep.rate_fit = fit_rate(rep.residuals);
}

}  // namespace

PicardReport picard_run(const GameModel& model, const PicardConfig& cfg) {
    cfg.validate();
    auto t_start = std::chrono::steady_clock::now();
    const Tabulation& tab = model.tables();
    Bounds bounds = compute_bounds(model);

    ControlField beta = cfg.initial_control
                            ? *cfg.initial_control
                            : ControlField(cfg.grid, tab.d, tab.S);
    if (beta.d != tab.d || beta.S != tab.S || !(beta.grid == cfg.grid))
        throw std::invalid_argument("picard_run: initial control does not match model/grid");

    PicardReport rep;
    rep.c_a = bounds.c_a;
    ValueField v_prev;
    bool have_prev = false;

    for (int n = 1; n <= cfg.max_iter; ++n) {
        auto [alpha, v] = best_response(model, beta, cfg.grid, cfg.ode);
        rep.iterations_run = n;

        double residual = -1;
        if (have_prev) {
            residual = sup_norm_diff(v, v_prev);
            rep.residuals.push_back(residual);
        }

        // beta^(n) = rho*beta^(n-1) + (1-rho)*alpha^(n)
        kernels::ops().lerp_clamp(beta.data.data(), beta.data.data(),
                                  alpha.data.data(), 1.0 - cfg.rho, 0.0,
                                  beta.data.size());
        double bnorm = sup_state_norm(beta);
        rep.control_norms.push_back(bnorm);
        if (bnorm > bounds.c_a) rep.control_bound_exceeded = true;

        v_prev = std::move(v);
        have_prev = true;
        if (residual >= 0 && residual < cfg.tol) {
            rep.converged = true;
            break;
        }
    }

    rep.final_value = std::move(v_prev);
    rep.final_control = std::move(beta);
    fit_if_possible(rep);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

NoisyPicardResult picard_run_noisy(const GameModel& model,
                                   const PicardConfig& cfg,
                                   const NoiseConfig& noise) {
    cfg.validate();
    if (!(noise.delta >= 0))
        throw std::invalid_argument("picard_run_noisy: delta must be >= 0");
    auto t_start = std::chrono::steady_clock::now();
    const Tabulation& tab = model.tables();
    Bounds bounds = compute_bounds(model);

    ControlField beta_clean = cfg.initial_control
                                  ? *cfg.initial_control
                                  : ControlField(cfg.grid, tab.d, tab.S);
    ControlField beta_noisy = beta_clean;
    ControlField noisy_target(cfg.grid, tab.d, tab.S);  // alpha_hat + eps

    NoisyPicardResult out;
    PicardReport& rep = out.report;
    rep.c_a = bounds.c_a;
    ValueField v_prev;
    bool have_prev = false;

    for (int n = 1; n <= cfg.max_iter; ++n) {
        auto [alpha_clean, v_clean] = best_response(model, beta_clean, cfg.grid, cfg.ode);
        auto [alpha_noisy, v_noisy] = best_response(model, beta_noisy, cfg.grid, cfg.ode);
        rep.iterations_run = n;

        if (have_prev) rep.residuals.push_back(sup_norm_diff(v_noisy, v_prev));

        // clean update
        kernels::ops().lerp_clamp(beta_clean.data.data(), beta_clean.data.data(),
                                  alpha_clean.data.data(), 1.0 - cfg.rho, 0.0,
                                  beta_clean.data.size());

        // corrupted update: the same uniforms scaled by delta, so runs at
        // different delta share the noise structure
        RngStream rng(noise.seed, static_cast<std::uint64_t>(n));
        noisy_target.data = alpha_noisy.data;
        for (double& e : noisy_target.data) e += noise.delta * rng.uniform();
        kernels::ops().lerp_clamp(beta_noisy.data.data(), beta_noisy.data.data(),
                                  noisy_target.data.data(), 1.0 - cfg.rho, 0.0,
                                  beta_noisy.data.size());

        double dev = 0;
        for (int k = 0; k <= cfg.grid.M; ++k) {
            double s = kernels::ops().sumsq_diff(beta_noisy.slice(k).data(),
                                                 beta_clean.slice(k).data(),
                                                 beta_noisy.per_node());
            dev = std::max(dev, s);
        }
        out.deviations.push_back(dev);

        double bnorm = sup_state_norm(beta_noisy);
        rep.control_norms.push_back(bnorm);
        if (bnorm > bounds.c_a) rep.control_bound_exceeded = true;

        v_prev = std::move(v_noisy);
        have_prev = true;
    }

    rep.converged = !rep.residuals.empty() && rep.residuals.back() < cfg.tol;
    rep.final_value = std::move(v_prev);
    rep.final_control = std::move(beta_noisy);
    fit_if_possible(rep);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

}  // namespace mpe
