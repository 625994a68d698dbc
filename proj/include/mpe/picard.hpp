#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mpe/hjb.hpp"

namespace mpe {

// least-squares fit of log(residual_n) against n; slope < 0 means geometric
// convergence with empirical contraction factor exp(slope)
struct RateFit {
    double slope = 0;
    double intercept = 0;
    double r_squared = 0;
};
RateFit fit_rate(std::span<const double> residuals);

struct PicardConfig {
    double rho = 0.0;  // weighted update beta <- rho*beta + (1-rho)*alpha
    int max_iter = 50;
    double tol = 1e-8;  // stopping tolerance on sup_t |v^(n+1)(t)-v^(n)(t)|_2
    TimeGrid grid;
    OdeConfig ode;
    std::optional<ControlField> initial_control;  // default: identically 0

    void validate() const;
};

struct PicardReport {
    std::vector<double> residuals;  // sup_t |v^(n+1)-v^(n)|_2 per iteration
    ValueField final_value;
    ControlField final_control;
    RateFit rate_fit;
    int iterations_run = 0;
    bool converged = false;
    // diagnostics: sup_t |beta^(n)(t)|_2 per iteration against the c_a bound
    std::vector<double> control_norms;
    double c_a = 0;
    bool control_bound_exceeded = false;
    double seconds = 0;
};

// solves HJB(beta) and applies the Hamiltonian minimizer node by node
std::pair<ControlField, ValueField> best_response(const GameModel& model,
                                                  const ControlField& beta,
                                                  const TimeGrid& grid,
                                                  const OdeConfig& ode);

PicardReport picard_run(const GameModel& model, const PicardConfig& cfg);

struct NoiseConfig {
    double delta = 0;  // errors are i.i.d. uniform on [0, delta]^(d-1) per node
    std::uint64_t seed = 0;
};

struct NoisyPicardResult {
    PicardReport report;                    // the corrupted iteration
    std::vector<double> deviations;         // sup_t |beta_hat^(n)-beta^(n)|_2^2
};

// Runs the error-corrupted iteration alongside the clean one from the same
// initial control; both run the full max_iter so the deviation sequence is
// complete. The clean and noisy solves share ODE tolerances.
NoisyPicardResult picard_run_noisy(const GameModel& model, const PicardConfig& cfg,
                                   const NoiseConfig& noise);

}  // namespace mpe
