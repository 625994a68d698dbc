#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mpe/game.hpp"
#include "mpe/rng.hpp"
#include "mpe/simulate.hpp"

namespace mpe {

// Small fully connected control network: input (t/T, one-hot x, mu), tanh
// hidden layers, softplus output so every emitted rate is strictly positive.
// The output layer is zero-initialized, so a fresh net emits softplus(0)=ln 2.
class ControlNet final : public ControlPolicy {
public:
    ControlNet() = default;
    ControlNet(int d, double T, std::vector<int> hidden = {64, 64});

    void init_params(RngStream& rng);  // Xavier hidden layers, zero output layer

    int d() const { return d_; }
    double T() const { return T_; }
    int input_dim() const { return 2 * d_ + 1; }
    int output_dim() const { return d_ - 1; }
    const std::vector<int>& hidden() const { return hidden_; }
    std::size_t param_count() const { return params_.size(); }
    std::span<const double> params() const { return params_; }
    std::span<double> params() { return params_; }
    void set_params(std::span<const double> p);

    void rates(double t, int x, std::span<const int> counts,
               std::span<double> out) const override;

    struct Tape {
        std::vector<double> input;
        std::vector<std::vector<double>> act;  // tanh outputs per hidden layer
        std::vector<double> out_pre;           // pre-softplus
    };
    void forward(double t, int x, std::span<const int> counts, Tape& tape,
                 std::span<double> rates_out) const;
    // accumulates d(sum_k cot_rates[k] * rate_k)/dtheta into grad
    void backward(const Tape& tape, std::span<const double> cot_rates,
                  std::span<double> grad) const;

private:
    struct Layer {
        std::size_t w_off = 0, b_off = 0;
        int rows = 0, cols = 0;
    };
    void build_layout();
    void encode(double t, int x, std::span<const int> counts,
                std::span<double> in) const;

    int d_ = 0;
    double T_ = 0;
    std::vector<int> hidden_;
    std::vector<Layer> layers_;
    std::vector<double> params_;
};

// Convex combination of best-response nets representing the weighted Picard
// iterate beta_hat^(n) = rho*beta_hat^(n-1) + (1-rho)*alpha_hat^(n). Weights
// are kept summing to 1 exactly; zero-weight components are dropped.
class MixedControl final : public ControlPolicy {
public:
    MixedControl() = default;
    explicit MixedControl(ControlNet initial);
    static MixedControl from_components(std::vector<ControlNet> nets,
                                        std::vector<double> weights);

    void picard_update(ControlNet net, double rho);

    std::size_t size() const { return nets_.size(); }
    std::span<const double> weights() const { return weights_; }
    const ControlNet& net(std::size_t i) const { return nets_[i]; }

    void rates(double t, int x, std::span<const int> counts,
               std::span<double> out) const override;

private:
    void renormalize();
    std::vector<double> weights_;
    std::vector<ControlNet> nets_;
};

struct TrainConfig {
    int epochs = 120;
    int batch = 256;
    double lr = 1e-3;
    double lr_final = 0;  // > 0: exponential decay from lr to lr_final
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    enum class Estimator {
        ScoreTotal,  // total-cost coefficient (cost - baseline), per the plain form
        ScoreCausal  // cost-to-go coefficients with a per-time-bin baseline
    };
    Estimator estimator = Estimator::ScoreCausal;
    int baseline_bins = 32;    // time bins of the causal baseline
    bool use_baseline = true;  // moving-average baseline
    double baseline_decay = 0.5;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<int> hidden = {64, 64};
    double cost_dt = 0;  // quadrature spacing for costs and gradients; 0 = T/64
    // per-trajectory gradient norm clip (0 = off); see policy_gradient
    double grad_clip = 25.0;
    // initialize each best-response net from the previous iteration's result
    bool warm_start = true;
    double divergence_factor = 10.0;
    int divergence_patience = 50;

    void validate() const;
};

// Score-function policy gradient on a batch simulated with tagged control =
// net (frozen-rate scheme): mean over the batch of the exact pathwise
// running-cost derivative plus (cost - baseline) times the gradient of the
// trajectory log-likelihood of tagged jumps. Custom cost models must supply
// dl/da. clip_norm > 0 rescales each per-trajectory gradient to at most that
// norm before averaging; jump terms carry 1/rate factors whose spikes
// otherwise destabilize training once some rates become small.
std::vector<double> policy_gradient(std::span<const TrajectoryRecord> batch,
                                    const ControlNet& net, const GameModel& model,
                                    double baseline = 0, double quad_dt = 0,
                                    int threads = 1, double clip_norm = 0);

// per-trajectory baselines (e.g. conditioned on the start state); any
// trajectory-independent choice keeps the estimator unbiased
std::vector<double> policy_gradient(std::span<const TrajectoryRecord> batch,
                                    const ControlNet& net, const GameModel& model,
                                    std::span<const double> baselines,
                                    double quad_dt = 0, int threads = 1,
                                    double clip_norm = 0);

// Causal (cost-to-go) variant: each score term is weighted by the cost
// incurred from its decision time onward minus a per-time-bin baseline,
// instead of the total trajectory cost. Unbiased for the same gradient
// (past costs are uncorrelated with future score terms) with far lower
// variance on long horizons; the training loop uses this form by default.
// bin_baseline has `bins` entries covering [0, T] uniformly; pass an empty
// span for no baseline.
std::vector<double> policy_gradient_causal(std::span<const TrajectoryRecord> batch,
                                           const ControlNet& net,
                                           const GameModel& model,
                                           std::span<const double> bin_baseline,
                                           double quad_dt = 0, int threads = 1,
                                           double clip_norm = 0,
                                           std::vector<double>* ctg_bin_sum = nullptr,
                                           std::vector<long>* ctg_bin_cnt = nullptr);

struct TrainResult {
    ControlNet net;
    std::vector<double> loss_curve;  // batch mean cost per epoch
};

TrainResult train_best_response(const GameModel& model, const ControlPolicy& beta,
                                const InitialDistribution& theta0,
                                const TrainConfig& cfg,
                                std::uint64_t stream_namespace = 0,
                                const ControlNet* init = nullptr);

struct NeuralIterLog {
    int iteration = 0;
    double estimated_cost = 0;
    double cost_std_error = 0;
    std::vector<double> loss_curve;
};

struct NeuralPicardResult {
    MixedControl control;
    std::vector<NeuralIterLog> logs;
};

NeuralPicardResult neural_picard_run(const GameModel& model,
                                     const InitialDistribution& theta0,
                                     int n_iter, double rho,
                                     const TrainConfig& cfg);

}  // namespace mpe
