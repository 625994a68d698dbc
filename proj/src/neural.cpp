#include "mpe/neural.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

#include "mpe/kernels.hpp"

namespace mpe {

namespace {

double softplus(double x) {
    if (x > 30) return x;
    if (x < -30) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

ControlNet::ControlNet(int d, double T, std::vector<int> hidden)
    : d_(d), T_(T), hidden_(std::move(hidden)) {
    if (d_ < 2) throw std::invalid_argument("ControlNet: d must be >= 2");
    if (!(T_ > 0)) throw std::invalid_argument("ControlNet: T must be > 0");
    if (hidden_.empty()) throw std::invalid_argument("ControlNet: need at least one hidden layer");
    for (int h : hidden_)
        if (h < 1) throw std::invalid_argument("ControlNet: hidden width must be >= 1");
    build_layout();
}

void ControlNet::build_layout() {
    layers_.clear();
    std::size_t off = 0;
    int prev = input_dim();
    for (int h : hidden_) {
        Layer l;
        l.rows = h;
        l.cols = prev;
        l.w_off = off;
        off += static_cast<std::size_t>(h) * prev;
        l.b_off = off;
        off += static_cast<std::size_t>(h);
        layers_.push_back(l);
        prev = h;
    }
    Layer out;
    out.rows = output_dim();
    out.cols = prev;
    out.w_off = off;
    off += static_cast<std::size_t>(out.rows) * prev;
    out.b_off = off;
    off += static_cast<std::size_t>(out.rows);
    layers_.push_back(out);
    params_.assign(off, 0.0);
}

void ControlNet::init_params(RngStream& rng) {
    // Xavier-uniform hidden layers; output layer stays zero so the initial
    // control is the constant softplus(0)
    for (std::size_t li = 0; li + 1 < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        double bound = std::sqrt(6.0 / (l.rows + l.cols));
        for (int i = 0; i < l.rows * l.cols; ++i)
            params_[l.w_off + static_cast<std::size_t>(i)] = bound * (2 * rng.uniform() - 1);
        for (int i = 0; i < l.rows; ++i) params_[l.b_off + static_cast<std::size_t>(i)] = 0;
    }
    const Layer& out = layers_.back();
    std::fill(params_.begin() + static_cast<std::ptrdiff_t>(out.w_off), params_.end(), 0.0);
}

void ControlNet::set_params(std::span<const double> p) {
    if (p.size() != params_.size())
        throw std::invalid_argument("ControlNet::set_params: size mismatch");
    std::copy(p.begin(), p.end(), params_.begin());
}

void ControlNet::encode(double t, int x, std::span<const int> counts,
                        std::span<double> in) const {
    in[0] = t / T_;
    for (int i = 0; i < d_; ++i) in[static_cast<std::size_t>(1 + i)] = (i == x) ? 1.0 : 0.0;
    double n = 0;
    for (int c : counts) n += c;
    double inv = n > 0 ? 1.0 / n : 0.0;
    for (int i = 0; i < d_; ++i)
        in[static_cast<std::size_t>(1 + d_ + i)] = counts[static_cast<std::size_t>(i)] * inv;
}

void ControlNet::forward(double t, int x, std::span<const int> counts,
                         Tape& tape, std::span<double> rates_out) const {
    const auto& K = kernels::ops();
    tape.input.resize(static_cast<std::size_t>(input_dim()));
    encode(t, x, counts, tape.input);
    tape.act.resize(hidden_.size());
    const double* src = tape.input.data();
    std::size_t src_n = tape.input.size();
    for (std::size_t li = 0; li + 1 < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        auto& a = tape.act[li];
        a.resize(static_cast<std::size_t>(l.rows));
        K.gemv(a.data(), params_.data() + l.w_off, src,
               params_.data() + l.b_off, static_cast<std::size_t>(l.rows), src_n);
        for (double& v : a) v = std::tanh(v);
        src = a.data();
        src_n = a.size();
    }
    const Layer& out = layers_.back();
    tape.out_pre.resize(static_cast<std::size_t>(out.rows));
    K.gemv(tape.out_pre.data(), params_.data() + out.w_off, src,
           params_.data() + out.b_off, static_cast<std::size_t>(out.rows), src_n);
    for (int k = 0; k < out.rows; ++k)
        rates_out[static_cast<std::size_t>(k)] = softplus(tape.out_pre[static_cast<std::size_t>(k)]);
}

void ControlNet::rates(double t, int x, std::span<const int> counts,
                       std::span<double> out) const {
    thread_local Tape tape;
    forward(t, x, counts, tape, out);
}

void ControlNet::backward(const Tape& tape, std::span<const double> cot_rates,
                          std::span<double> grad) const {
    const auto& K = kernels::ops();
    const Layer& out = layers_.back();
    thread_local std::vector<double> delta, delta_prev;
    delta.assign(static_cast<std::size_t>(out.rows), 0.0);
    for (int k = 0; k < out.rows; ++k)
        delta[static_cast<std::size_t>(k)] =
            cot_rates[static_cast<std::size_t>(k)] * sigmoid(tape.out_pre[static_cast<std::size_t>(k)]);

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        const double* inputs = li == 0 ? tape.input.data() : tape.act[li - 1].data();
        std::size_t in_n = li == 0 ? tape.input.size() : tape.act[li - 1].size();
        K.ger_acc(grad.data() + l.w_off, delta.data(), inputs,
                  static_cast<std::size_t>(l.rows), in_n);
        for (int r = 0; r < l.rows; ++r)
            grad[l.b_off + static_cast<std::size_t>(r)] += delta[static_cast<std::size_t>(r)];
        if (li == 0) break;
        delta_prev.assign(in_n, 0.0);
        K.gemv_t_acc(delta_prev.data(), params_.data() + l.w_off, delta.data(),
                     static_cast<std::size_t>(l.rows), in_n);
        // through tanh
        const auto& a = tape.act[li - 1];
        for (std::size_t i = 0; i < in_n; ++i)
            delta_prev[i] *= (1.0 - a[i] * a[i]);
        std::swap(delta, delta_prev);
    }
}

MixedControl::MixedControl(ControlNet initial) {
    weights_.push_back(1.0);
    nets_.push_back(std::move(initial));
}

MixedControl MixedControl::from_components(std::vector<ControlNet> nets,
                                           std::vector<double> weights) {
    if (nets.empty() || nets.size() != weights.size())
        throw std::invalid_argument("MixedControl: component mismatch");
    double sum = 0;
    for (double w : weights) {
        if (!(w >= 0)) throw std::invalid_argument("MixedControl: negative weight");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("MixedControl: weights must sum to 1");
    MixedControl mc;
    mc.nets_ = std::move(nets);
    mc.weights_ = std::move(weights);
    mc.renormalize();
    return mc;
}

void MixedControl::picard_update(ControlNet net, double rho) {
    if (!(rho >= 0) || !(rho < 1))
        throw std::invalid_argument("MixedControl: rho must lie in [0, 1)");
    for (double& w : weights_) w *= rho;
    weights_.push_back(1.0 - rho);
    nets_.push_back(std::move(net));
    // drop exactly-zero components (rho = 0 keeps only the newest net)
    std::size_t keep = 0;
    for (std::size_t i = 0; i < nets_.size(); ++i) {
        if (weights_[i] == 0.0) continue;
        if (keep != i) {
            weights_[keep] = weights_[i];
            nets_[keep] = std::move(nets_[i]);
        }
        ++keep;
    }
    weights_.resize(keep);
    nets_.resize(keep);
    renormalize();
}

void MixedControl::renormalize() {
    // compensated sum of all but the heaviest entry; the heaviest absorbs the
    // correction so the weights sum to 1 exactly
    if (weights_.empty()) return;
    std::size_t heavy = 0;
    for (std::size_t i = 1; i < weights_.size(); ++i)
        if (weights_[i] > weights_[heavy]) heavy = i;
    double sum = 0, c = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (i == heavy) continue;
        double y = weights_[i] - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    weights_[heavy] = 1.0 - sum;
}

void MixedControl::rates(double t, int x, std::span<const int> counts,
                         std::span<double> out) const {
    if (nets_.empty()) throw std::logic_error("MixedControl: empty mixture");
    thread_local std::vector<double> tmp;
    tmp.assign(out.size(), 0.0);
    for (double& v : out) v = 0;
    for (std::size_t i = 0; i < nets_.size(); ++i) {
        nets_[i].rates(t, x, counts, tmp);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += weights_[i] * tmp[k];
    }
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch < 2 || !(lr > 0))
        throw std::invalid_argument("TrainConfig: epochs, batch and lr must be positive");
}

std::vector<double> policy_gradient(std::span<const TrajectoryRecord> batch,
                                    const ControlNet& net, const GameModel& model,
                                    double baseline, double quad_dt, int threads,
                                    double clip_norm) {
    std::vector<double> baselines(batch.size(), baseline);
    return policy_gradient(batch, net, model, baselines, quad_dt, threads, clip_norm);
}

std::vector<double> policy_gradient(std::span<const TrajectoryRecord> batch,
                                    const ControlNet& net, const GameModel& model,
                                    std::span<const double> baselines,
                                    double quad_dt, int threads, double clip_norm) {
    if (batch.empty()) throw std::invalid_argument("policy_gradient: empty batch");
    if (baselines.size() != batch.size())
        throw std::invalid_argument("policy_gradient: one baseline per trajectory");
    const bool quad = model.cost().is_quadratic();
    if (!quad && !model.cost().running_cost_grad)
        throw std::invalid_argument(
            "policy_gradient: custom cost models must supply a running-cost gradient");
    const int d = model.d();
    const int dm1 = d - 1;
    const double T = model.T();
    if (quad_dt <= 0) quad_dt = T / 256;

    std::vector<std::vector<double>> per_traj(batch.size());

    auto work = [&](std::size_t lo, std::size_t hi) {
        ControlNet::Tape tape;
        std::vector<double> rates(static_cast<std::size_t>(dm1));
        std::vector<double> cot(static_cast<std::size_t>(dm1));
        std::vector<double> dl(static_cast<std::size_t>(dm1));
        std::vector<double> l0(static_cast<std::size_t>(dm1)), l1(static_cast<std::size_t>(dm1));
        for (std::size_t bi = lo; bi < hi; ++bi) {
            const TrajectoryRecord& rec = batch[bi];
            auto& grad = per_traj[bi];
            grad.assign(net.param_count(), 0.0);
            double coeff = rec.cost - baselines[bi];

            int x = rec.x0;
            CountVector counts = rec.counts0;
            double t0 = 0;
            std::size_t ev = 0;
            while (true) {
                bool at_end = ev >= rec.events.size();
                double t1 = at_end ? T : rec.events[ev].time;
                // interval [t0, t1] spent in (x, counts)
                model.lambda1(x, counts, l1);
                bool tagged_jump_next = !at_end && rec.events[ev].actor == -1;

                // trapezoid nodes of the pathwise term on [t0, t1]; the node
                // at t0 additionally carries the frozen-rate score cotangents
                long j0 = static_cast<long>(std::floor(t0 / quad_dt)) + 1;
                thread_local std::vector<double> nodes;
                nodes.clear();
                nodes.push_back(t0);
                for (long j = j0; j * quad_dt < t1; ++j) {
                    double u = j * quad_dt;
                    if (u > nodes.back()) nodes.push_back(u);
                }
                if (t1 > nodes.back()) nodes.push_back(t1);

                for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
                    double u = nodes[ni];
                    double w;
                    if (nodes.size() == 1) {
                        w = 0;
                    } else if (ni == 0) {
                        w = 0.5 * (nodes[1] - nodes[0]);
                    } else if (ni + 1 == nodes.size()) {
                        w = 0.5 * (nodes[ni] - nodes[ni - 1]);
                    } else {
                        w = 0.5 * (nodes[ni + 1] - nodes[ni - 1]);
                    }
                    net.forward(u, x, counts, tape, rates);
                    // pathwise running-cost derivative: a for the quadratic family
                    if (quad) {
                        for (int k = 0; k < dm1; ++k)
                            cot[static_cast<std::size_t>(k)] = w * rates[static_cast<std::size_t>(k)];
                    } else {
                        model.cost().running_cost_grad(x, counts, rates, dl);
                        for (int k = 0; k < dm1; ++k)
                            cot[static_cast<std::size_t>(k)] = w * dl[static_cast<std::size_t>(k)];
                    }
                    if (ni == 0) {
                        // score terms, frozen at the interval start
                        double len = t1 - t0;
                        for (int k = 0; k < dm1; ++k)
                            cot[static_cast<std::size_t>(k)] -=
                                coeff * l1[static_cast<std::size_t>(k)] * len;
                        if (tagged_jump_next) {
                            int dest = rec.events[ev].to;
                            int k = rate_slot(dest, x);
                            model.lambda0(x, counts, l0);
                            double rate = l0[static_cast<std::size_t>(k)] +
                                          l1[static_cast<std::size_t>(k)] * rates[static_cast<std::size_t>(k)];
                            if (rate > 0)
                                cot[static_cast<std::size_t>(k)] +=
                                    coeff * l1[static_cast<std::size_t>(k)] / rate;
                        }
                    }
                    net.backward(tape, cot, grad);
                }

                if (at_end) break;
                const Event& e = rec.events[ev];
                if (e.actor == -1) {
                    x = e.to;
                } else {
                    counts[static_cast<std::size_t>(e.from)] -= 1;
                    counts[static_cast<std::size_t>(e.to)] += 1;
                }
                t0 = t1;
                ++ev;
            }
            if (clip_norm > 0) {
                double nrm = std::sqrt(kernels::ops().sumsq(grad.data(), grad.size()));
                if (nrm > clip_norm) {
                    double s = clip_norm / nrm;
                    for (double& v : grad) v *= s;
                }
            }
        }
    };

    threads = std::max(1, threads);
    if (threads == 1 || batch.size() < 8) {
        work(0, batch.size());
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (batch.size() + threads - 1) / static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            std::size_t lo = static_cast<std::size_t>(t) * chunk;
            std::size_t hi = std::min(batch.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    // fixed-order reduction
    std::vector<double> grad(net.param_count(), 0.0);
    for (const auto& g : per_traj)
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
    double inv = 1.0 / static_cast<double>(batch.size());
    for (double& v : grad) v *= inv;
    return grad;
}


std::vector<double> policy_gradient_causal(std::span<const TrajectoryRecord> batch,
                                           const ControlNet& net,
                                           const GameModel& model,
                                           std::span<const double> bin_baseline,
                                           double quad_dt, int threads,
                                           double clip_norm,
                                           std::vector<double>* ctg_bin_sum,
                                           std::vector<long>* ctg_bin_cnt) {
    if (batch.empty()) throw std::invalid_argument("policy_gradient_causal: empty batch");
    const bool quad = model.cost().is_quadratic();
    if (!quad && !model.cost().running_cost_grad)
        throw std::invalid_argument(
            "policy_gradient_causal: custom cost models must supply a running-cost gradient");
    const int d = model.d();
    const int dm1 = d - 1;
    const double T = model.T();
    if (quad_dt <= 0) quad_dt = T / 64;
    const int bins = static_cast<int>(bin_baseline.size());

    std::vector<std::vector<double>> per_traj(batch.size());
    std::vector<std::vector<std::pair<int, double>>> per_traj_ctg(batch.size());

    auto work = [&](std::size_t lo, std::size_t hi) {
        ControlNet::Tape tape;
        std::vector<double> rates(static_cast<std::size_t>(dm1));
        std::vector<double> cot(static_cast<std::size_t>(dm1));
        std::vector<double> dl(static_cast<std::size_t>(dm1));
        std::vector<double> l0(static_cast<std::size_t>(dm1)), l1(static_cast<std::size_t>(dm1));
        for (std::size_t bi = lo; bi < hi; ++bi) {
            const TrajectoryRecord& rec = batch[bi];
            auto& grad = per_traj[bi];
            grad.assign(net.param_count(), 0.0);

            int x = rec.x0;
            CountVector counts = rec.counts0;
            double t0 = 0;
            double cost_before = 0;  // running cost accumulated before t0
            std::size_t ev = 0;
            while (true) {
                bool at_end = ev >= rec.events.size();
                double t1 = at_end ? T : rec.events[ev].time;
                model.lambda1(x, counts, l1);
                bool tagged_jump_next = !at_end && rec.events[ev].actor == -1;

                double ctg = rec.cost - cost_before;
                int bin = -1;
                double b = 0;
                if (bins > 0) {
                    bin = std::min(bins - 1, static_cast<int>(t0 / T * bins));
                    b = bin_baseline[static_cast<std::size_t>(bin)];
                    per_traj_ctg[bi].emplace_back(bin, ctg);
                }
                double coeff = ctg - b;

                long j0 = static_cast<long>(std::floor(t0 / quad_dt)) + 1;
                thread_local std::vector<double> nodes;
                nodes.clear();
                nodes.push_back(t0);
                for (long j = j0; j * quad_dt < t1; ++j) {
                    double u = j * quad_dt;
                    if (u > nodes.back()) nodes.push_back(u);
                }
                if (t1 > nodes.back()) nodes.push_back(t1);

                for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
                    double u = nodes[ni];
                    double w;
                    if (nodes.size() == 1) {
                        w = 0;
                    } else if (ni == 0) {
                        w = 0.5 * (nodes[1] - nodes[0]);
                    } else if (ni + 1 == nodes.size()) {
                        w = 0.5 * (nodes[ni] - nodes[ni - 1]);
                    } else {
                        w = 0.5 * (nodes[ni + 1] - nodes[ni - 1]);
                    }
                    net.forward(u, x, counts, tape, rates);
                    cost_before += w * model.running_cost(x, counts, rates);
                    if (quad) {
                        for (int k = 0; k < dm1; ++k)
                            cot[static_cast<std::size_t>(k)] = w * rates[static_cast<std::size_t>(k)];
                    } else {
                        model.cost().running_cost_grad(x, counts, rates, dl);
                        for (int k = 0; k < dm1; ++k)
                            cot[static_cast<std::size_t>(k)] = w * dl[static_cast<std::size_t>(k)];
                    }
                    if (ni == 0) {
                        double len = t1 - t0;
                        for (int k = 0; k < dm1; ++k)
                            cot[static_cast<std::size_t>(k)] -=
                                coeff * l1[static_cast<std::size_t>(k)] * len;
                        if (tagged_jump_next) {
                            int dest = rec.events[ev].to;
                            int k = rate_slot(dest, x);
                            model.lambda0(x, counts, l0);
                            double rate = l0[static_cast<std::size_t>(k)] +
                                          l1[static_cast<std::size_t>(k)] * rates[static_cast<std::size_t>(k)];
                            if (rate > 0)
                                cot[static_cast<std::size_t>(k)] +=
                                    coeff * l1[static_cast<std::size_t>(k)] / rate;
                        }
                    }
                    net.backward(tape, cot, grad);
                }

                if (at_end) break;
                const Event& e = rec.events[ev];
                if (e.actor == -1) {
                    x = e.to;
                } else {
                    counts[static_cast<std::size_t>(e.from)] -= 1;
                    counts[static_cast<std::size_t>(e.to)] += 1;
                }
                t0 = t1;
                ++ev;
            }
            if (clip_norm > 0) {
                double nrm = std::sqrt(kernels::ops().sumsq(grad.data(), grad.size()));
                if (nrm > clip_norm) {
                    double sc = clip_norm / nrm;
                    for (double& v : grad) v *= sc;
                }
            }
        }
    };

    threads = std::max(1, threads);
    if (threads == 1 || batch.size() < 8) {
        work(0, batch.size());
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (batch.size() + threads - 1) / static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            std::size_t lo = static_cast<std::size_t>(t) * chunk;
            std::size_t hi = std::min(batch.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    std::vector<double> grad(net.param_count(), 0.0);
    for (const auto& g : per_traj)
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
    double inv = 1.0 / static_cast<double>(batch.size());
    for (double& v : grad) v *= inv;
    if (ctg_bin_sum && ctg_bin_cnt) {
        ctg_bin_sum->assign(static_cast<std::size_t>(bins), 0.0);
        ctg_bin_cnt->assign(static_cast<std::size_t>(bins), 0);
        for (const auto& lst : per_traj_ctg)
            for (auto& [bn, val] : lst) {
                (*ctg_bin_sum)[static_cast<std::size_t>(bn)] += val;
                (*ctg_bin_cnt)[static_cast<std::size_t>(bn)] += 1;
            }
    }
    return grad;
}

TrainResult train_best_response(const GameModel& model, const ControlPolicy& beta,
                                const InitialDistribution& theta0,
                                const TrainConfig& cfg,
                                std::uint64_t stream_namespace,
                                const ControlNet* init) {
    cfg.validate();
    ControlNet net(model.d(), model.T(), cfg.hidden);
    if (init) {
        net.set_params(init->params());
    } else {
        RngStream rng(cfg.seed, (stream_namespace << 32) ^ 0x1234567ULL);
        net.init_params(rng);
    }

    TrainResult result;
    std::vector<double> m(net.param_count(), 0.0), v(net.param_count(), 0.0);
    // moving-average baselines conditioned on the start state (x0, mu0);
    // conditioning removes the start-draw variance from the score coefficient
    std::map<std::pair<int, CountVector>, double> start_baseline;
    // per-time-bin cost-to-go baselines (causal estimator)
    const int bins = std::max(1, cfg.baseline_bins);
    std::vector<double> bin_baseline(static_cast<std::size_t>(bins), 0.0);
    std::vector<char> bin_seen(static_cast<std::size_t>(bins), 0);
    int diverged_epochs = 0;
    double initial_loss = 0;

    double quad_dt = cfg.cost_dt > 0 ? cfg.cost_dt : model.T() / 64;
    SimOptions sim;
    sim.record_events = true;
    sim.cost_dt = quad_dt;

    std::vector<TrajectoryRecord> records;
    std::vector<double> costs;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::uint64_t epoch_ns =
            (stream_namespace << 40) ^ (static_cast<std::uint64_t>(epoch) << 20);
        records.resize(static_cast<std::size_t>(cfg.batch));
        costs.resize(static_cast<std::size_t>(cfg.batch));

        auto work = [&](int lo, int hi) {
            for (int i = lo; i < hi; ++i) {
                RngStream rng(cfg.seed, epoch_ns ^ static_cast<std::uint64_t>(i));
                int x0;
                CountVector counts0;
                theta0.sample(rng, model.d(), model.N(), x0, counts0);
                records[static_cast<std::size_t>(i)] = simulate_trajectory(
                    model, net, beta, x0, std::move(counts0), rng, sim);
                costs[static_cast<std::size_t>(i)] = records[static_cast<std::size_t>(i)].cost;
            }
        };
        int threads = std::max(1, cfg.threads);
        if (threads == 1) {
            work(0, cfg.batch);
        } else {
            std::vector<std::thread> pool;
            int chunk = (cfg.batch + threads - 1) / threads;
            for (int t = 0; t < threads; ++t) {
                int lo = t * chunk, hi = std::min(cfg.batch, lo + chunk);
                if (lo >= hi) break;
                pool.emplace_back(work, lo, hi);
            }
            for (auto& th : pool) th.join();
        }

        double loss = pairwise_sum(costs) / cfg.batch;
        result.loss_curve.push_back(loss);
        if (epoch == 0) initial_loss = loss;

        std::vector<double> grad;
        if (cfg.estimator == TrainConfig::Estimator::ScoreCausal) {
            std::vector<double> csum;
            std::vector<long> ccnt;
            grad = policy_gradient_causal(records, net, model,
                                          cfg.use_baseline ? std::span<const double>(bin_baseline)
                                                           : std::span<const double>(),
                                          quad_dt, cfg.threads, cfg.grad_clip,
                                          &csum, &ccnt);
            for (int bn = 0; bn < bins && !csum.empty(); ++bn) {
                if (ccnt[static_cast<std::size_t>(bn)] == 0) continue;
                double mean = csum[static_cast<std::size_t>(bn)] / ccnt[static_cast<std::size_t>(bn)];
                if (!bin_seen[static_cast<std::size_t>(bn)]) {
                    bin_baseline[static_cast<std::size_t>(bn)] = mean;
                    bin_seen[static_cast<std::size_t>(bn)] = 1;
                } else {
                    bin_baseline[static_cast<std::size_t>(bn)] =
                        cfg.baseline_decay * bin_baseline[static_cast<std::size_t>(bn)] +
                        (1 - cfg.baseline_decay) * mean;
                }
            }
        } else {
            // per-start moving averages, updated with the current batch first:
            // a lagging baseline biases the score term while the loss moves fast
            std::map<std::pair<int, CountVector>, std::pair<long, double>> batch_means;
            for (const auto& rec : records) {
                auto& cell = batch_means[{rec.x0, rec.counts0}];
                cell.first += 1;
                cell.second += rec.cost;
            }
            for (auto& [key, cell] : batch_means) {
                double mean = cell.second / cell.first;
                auto it = start_baseline.find(key);
                if (it == start_baseline.end())
                    start_baseline.emplace(key, mean);
                else
                    it->second = cfg.baseline_decay * it->second +
                                 (1 - cfg.baseline_decay) * mean;
            }
            std::vector<double> baselines(records.size(), 0.0);
            if (cfg.use_baseline)
                for (std::size_t i = 0; i < records.size(); ++i)
                    baselines[i] = start_baseline.at({records[i].x0, records[i].counts0});
            grad = policy_gradient(records, net, model, baselines, quad_dt,
                                   cfg.threads, cfg.grad_clip);
        }

        // Adam step, optionally with an exponentially decaying rate
        double lr = cfg.lr;
        if (cfg.lr_final > 0 && cfg.epochs > 1)
            lr = cfg.lr * std::pow(cfg.lr_final / cfg.lr,
                                   static_cast<double>(epoch) / (cfg.epochs - 1));
        double t1 = epoch + 1;
        double bc1 = 1.0 - std::pow(cfg.adam_beta1, t1);
        double bc2 = 1.0 - std::pow(cfg.adam_beta2, t1);
        auto p = net.params();
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1 - cfg.adam_beta1) * grad[i];
            v[i] = cfg.adam_beta2 * v[i] + (1 - cfg.adam_beta2) * grad[i] * grad[i];
            p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
        }

        if (std::fabs(loss) > cfg.divergence_factor * std::max(1e-12, std::fabs(initial_loss))) {
            if (++diverged_epochs >= cfg.divergence_patience)
                throw std::runtime_error("train_best_response: training diverged");
        } else {
            diverged_epochs = 0;
        }
    }

    result.net = std::move(net);
    return result;
}

NeuralPicardResult neural_picard_run(const GameModel& model,
                                     const InitialDistribution& theta0,
                                     int n_iter, double rho,
                                     const TrainConfig& cfg) {
    if (n_iter < 0) throw std::invalid_argument("neural_picard_run: n_iter must be >= 0");
    if (!(rho >= 0) || !(rho < 1))
        throw std::invalid_argument("neural_picard_run: rho must lie in [0, 1)");

    ControlNet beta0(model.d(), model.T(), cfg.hidden);
    {
        RngStream rng(cfg.seed, 0xB0ULL);
        beta0.init_params(rng);
    }
    NeuralPicardResult result;
    result.control = MixedControl(std::move(beta0));

    ControlNet prev;
    bool have_prev = false;
    for (int n = 1; n <= n_iter; ++n) {
        TrainResult tr = train_best_response(model, result.control, theta0, cfg,
                                             static_cast<std::uint64_t>(n),
                                             cfg.warm_start && have_prev ? &prev : nullptr);
        NeuralIterLog log;
        log.iteration = n;
        log.loss_curve = tr.loss_curve;
        {
            SimOptions sim;
            sim.record_events = false;
            sim.cost_dt = cfg.cost_dt > 0 ? cfg.cost_dt : model.T() / 64;
            CostEstimate est = estimate_cost(model, tr.net, result.control, theta0,
                                             std::max(64, cfg.batch),
                                             cfg.seed ^ (0xE57ULL + static_cast<std::uint64_t>(n) * 7919),
                                             cfg.threads, sim);
            log.estimated_cost = est.mean;
            log.cost_std_error = est.std_error;
        }
        if (cfg.warm_start) {
            prev = tr.net;
            have_prev = true;
        }
        result.control.picard_update(std::move(tr.net), rho);
        result.logs.push_back(std::move(log));
    }
    return result;
}

}  // namespace mpe
