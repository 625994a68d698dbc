// Command-line end of the solver: configure a model, run one of the
// pipelines, and emit CSV/plot data. Exit codes: 0 success (including
// non-converged runs, reported in summary.json), 2 config error, 3 solver
// failure.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpe/io.hpp"
#include "mpe/kernels.hpp"
#include "mpe/neural.hpp"
#include "mpe/picard.hpp"
#include "mpe/presets.hpp"
#include "mpe/verify.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json default_config() {
    return json{
        {"model", {{"preset", "kuramoto1"}}},
        {"grid", {{"M", 0}}},
        {"ode", {{"rtol", 1e-6}, {"atol", 1e-8}, {"max_step", 0.0}}},
        {"picard", {{"rho", 0.0}, {"max_iter", 100}, {"tol", 1e-8}}},
        {"mc",
         {{"M", 1000},
          {"seed", 1},
          {"thinning", false},
          {"rate_bound", 0.0},
          {"evals", 10},
          {"init", {{"type", "uniform"}}},
          {"dump_trajectories", false}}},
        {"neural",
         {{"layers", 2}, {"width", 64}, {"lr", 1e-3}, {"epochs", 120}, {"batch", 256}, {"iters", 5}}},
        {"noise", {{"delta", 0.05}, {"seed", 1}}},
        {"output", "out"},
    };
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("unknown key '" + where + it.key() + "'");
    }
}

void validate_config(const json& cfg) {
    check_keys(cfg, {"model", "grid", "ode", "picard", "mc", "neural", "noise", "output"}, "");
    const json& model = cfg.at("model");
    if (model.contains("custom")) {
        check_keys(model, {"custom"}, "model.");
        check_keys(model.at("custom"),
                   {"d", "N", "T", "lambda0", "lambda1", "f", "g", "labels"},
                   "model.custom.");
    } else {
        std::string preset = model.value("preset", "");
        if (preset == "kuramoto1")
            check_keys(model, {"preset", "N", "T", "kappa"}, "model.");
        else if (preset == "kuramoto2")
            check_keys(model, {"preset", "N", "T", "kappa", "sigma2"}, "model.");
        else if (preset == "cyber")
            check_keys(model,
                       {"preset", "N", "T", "v_H", "qD_inf", "qU_inf", "qD_rec",
                        "qU_rec", "lam_UU", "lam_DU", "lam_DD", "lam_UD", "k_D", "k_I"},
                       "model.");
        else
            throw ConfigError("unknown preset '" + preset + "' (kuramoto1|kuramoto2|cyber)");
    }
    check_keys(cfg.at("grid"), {"T", "M"}, "grid.");
    check_keys(cfg.at("ode"), {"rtol", "atol", "max_step"}, "ode.");
    check_keys(cfg.at("picard"), {"rho", "max_iter", "tol"}, "picard.");
    check_keys(cfg.at("mc"),
               {"M", "seed", "thinning", "rate_bound", "evals", "init", "dump_trajectories"},
               "mc.");
    check_keys(cfg.at("mc").at("init"), {"type", "x0", "counts", "probs"}, "mc.init.");
    check_keys(cfg.at("neural"), {"layers", "width", "lr", "epochs", "batch", "iters"}, "neural.");
    check_keys(cfg.at("noise"), {"delta", "seed"}, "noise.");

    double rho = cfg.at("picard").at("rho").get<double>();
    if (!(rho >= 0.0) || !(rho < 1.0)) throw ConfigError("picard.rho must lie in [0, 1)");
    if (!(cfg.at("picard").at("tol").get<double>() > 0)) throw ConfigError("picard.tol must be > 0");
    if (cfg.at("picard").at("max_iter").get<int>() < 1) throw ConfigError("picard.max_iter must be >= 1");
    if (!(cfg.at("ode").at("rtol").get<double>() > 0) || !(cfg.at("ode").at("atol").get<double>() > 0))
        throw ConfigError("ode tolerances must be > 0");
    if (cfg.at("mc").at("M").get<long>() < 2) throw ConfigError("mc.M must be >= 2");
    if (!(cfg.at("noise").at("delta").get<double>() >= 0)) throw ConfigError("noise.delta must be >= 0");
}

void deep_merge(json& base, const json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            deep_merge(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

void apply_set(json& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    json* node = &cfg;
    std::size_t pos = 0;
    while (true) {
        auto dot = key.find('.', pos);
        std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) throw ConfigError("--set: empty key component in '" + key + "'");
        if (dot == std::string::npos) {
            json parsed;
            try {
                parsed = json::parse(value);
            } catch (...) {
                parsed = value;  // plain string
            }
            (*node)[part] = parsed;
            return;
        }
        node = &(*node)[part];
        pos = dot + 1;
    }
}

struct BuiltModel {
    mpe::GameModel model;
    std::string name;
    bool nonuniqueness = false;
};

BuiltModel build_model(const json& cfg) {
    const json& m = cfg.at("model");
    if (m.contains("custom")) {
        const json& c = m.at("custom");
        int d = c.at("d").get<int>();
        int N = c.at("N").get<int>();
        double T = c.at("T").get<double>();
        auto lam0_tab = c.at("lambda0").get<std::vector<std::vector<double>>>();
        auto lam1_tab = c.at("lambda1").get<std::vector<std::vector<double>>>();
        auto f_tab = c.at("f").get<std::vector<double>>();
        auto g_tab = c.at("g").get<std::vector<double>>();
        std::vector<std::string> labels;
        if (c.contains("labels")) labels = c.at("labels").get<std::vector<std::string>>();
        if (static_cast<int>(lam0_tab.size()) != d || static_cast<int>(lam1_tab.size()) != d ||
            static_cast<int>(f_tab.size()) != d || static_cast<int>(g_tab.size()) != d)
            throw ConfigError("model.custom: tables must have d rows");
        for (const auto& row : lam0_tab)
            if (static_cast<int>(row.size()) != d - 1)
                throw ConfigError("model.custom.lambda0 rows must have d-1 entries");
        for (const auto& row : lam1_tab)
            if (static_cast<int>(row.size()) != d - 1)
                throw ConfigError("model.custom.lambda1 rows must have d-1 entries");
        auto lam0 = [lam0_tab](int x, std::span<const int>, std::span<double> out) {
            for (std::size_t k = 0; k < out.size(); ++k) out[k] = lam0_tab[static_cast<std::size_t>(x)][k];
        };
        auto lam1 = [lam1_tab](int x, std::span<const int>, std::span<double> out) {
            for (std::size_t k = 0; k < out.size(); ++k) out[k] = lam1_tab[static_cast<std::size_t>(x)][k];
        };
        auto f = [f_tab](int x, std::span<const int>) { return f_tab[static_cast<std::size_t>(x)]; };
        auto g = [g_tab](int x, std::span<const int>) { return g_tab[static_cast<std::size_t>(x)]; };
        return {mpe::GameModel(d, N, T, lam0, lam1,
                               mpe::CostModel::quadratic_plus_state(f), g, labels),
                "custom", false};
    }

    std::string preset = m.at("preset").get<std::string>();
    if (preset == "kuramoto1") {
        int N = m.value("N", 500);
        double T = m.value("T", 1.0), kappa = m.value("kappa", 2.0);
        return {mpe::make_kuramoto1(N, T, kappa), preset, false};
    }
    if (preset == "kuramoto2") {
        int N = m.value("N", 500);
        double T = m.value("T", 10.0), kappa = m.value("kappa", 6.0),
               sigma2 = m.value("sigma2", 0.5);
        return {mpe::make_kuramoto2(N, T, kappa, sigma2), preset,
                mpe::kuramoto2_nonuniqueness_regime(kappa, sigma2)};
    }
    mpe::CyberParams p;
    p.v_H = m.value("v_H", p.v_H);
    p.qD_inf = m.value("qD_inf", p.qD_inf);
    p.qU_inf = m.value("qU_inf", p.qU_inf);
    p.qD_rec = m.value("qD_rec", p.qD_rec);
    p.qU_rec = m.value("qU_rec", p.qU_rec);
    p.lam_UU = m.value("lam_UU", p.lam_UU);
    p.lam_DU = m.value("lam_DU", p.lam_DU);
    p.lam_DD = m.value("lam_DD", p.lam_DD);
    p.lam_UD = m.value("lam_UD", p.lam_UD);
    p.k_D = m.value("k_D", p.k_D);
    p.k_I = m.value("k_I", p.k_I);
    return {mpe::make_cyber(m.value("N", 24), m.value("T", 10.0), p), preset, false};
}

mpe::TimeGrid build_grid(const json& cfg, const mpe::GameModel& model) {
    const json& g = cfg.at("grid");
    double T = g.value("T", model.T());
    if (std::fabs(T - model.T()) > 1e-12 * model.T())
        throw ConfigError("grid.T must match the model horizon");
    int M = g.value("M", 0);
    if (M == 0) M = static_cast<int>(std::lround(T / 0.01));
    if (M < 1) throw ConfigError("grid.M must be >= 1");
    return mpe::TimeGrid(T, M);
}

mpe::OdeConfig build_ode(const json& cfg) {
    mpe::OdeConfig o;
    o.rtol = cfg.at("ode").at("rtol").get<double>();
    o.atol = cfg.at("ode").at("atol").get<double>();
    o.max_step = cfg.at("ode").value("max_step", 0.0);
    return o;
}

mpe::InitialDistribution build_init(const json& cfg, const mpe::GameModel& model) {
    const json& init = cfg.at("mc").at("init");
    std::string type = init.value("type", "uniform");
    if (type == "uniform") {
        std::vector<double> probs(static_cast<std::size_t>(model.d()),
                                  1.0 / model.d());
        return mpe::InitialDistribution::iid(probs);
    }
    if (type == "iid")
        return mpe::InitialDistribution::iid(init.at("probs").get<std::vector<double>>());
    if (type == "deterministic") {
        int x0;
        const json& jx = init.at("x0");
        if (jx.is_string())
            x0 = model.state_from_label(jx.get<std::string>());
        else
            x0 = jx.get<int>();
        auto counts = init.at("counts").get<mpe::CountVector>();
        return mpe::InitialDistribution::deterministic(x0, std::move(counts));
    }
    throw ConfigError("mc.init.type must be uniform|iid|deterministic");
}

json rate_fit_json(const mpe::RateFit& fit) {
    return json{{"slope", fit.slope},
                {"gamma", std::exp(fit.slope)},
                {"intercept", fit.intercept},
                {"r_squared", fit.r_squared}};
}

void write_summary(const fs::path& out, const json& summary) {
    fs::create_directories(out);
    std::ofstream f(out / "summary.json", std::ios::binary);
    f << summary.dump(2) << '\n';
}

json base_summary(const std::string& command, const json& cfg, const BuiltModel& bm) {
    json s;
    s["command"] = command;
    s["config"] = cfg;
    s["model"] = bm.name;
    s["d"] = bm.model.d();
    s["N"] = bm.model.N();
    s["kernels"] = mpe::kernels::ops().name;
    if (bm.name == "kuramoto2") s["nonuniqueness_regime"] = bm.nonuniqueness;
    return s;
}

int cmd_picard(const json& cfg, const fs::path& out) {
    BuiltModel bm = build_model(cfg);
    mpe::PicardConfig pc;
    pc.grid = build_grid(cfg, bm.model);
    pc.ode = build_ode(cfg);
    pc.rho = cfg.at("picard").at("rho").get<double>();
    pc.max_iter = cfg.at("picard").at("max_iter").get<int>();
    pc.tol = cfg.at("picard").at("tol").get<double>();

    mpe::PicardReport rep = mpe::picard_run(bm.model, pc);

    mpe::io::write_values_csv(out / "values.csv", bm.model, rep.final_value);
    mpe::io::write_control_csv(out / "control.csv", bm.model, rep.final_control);
    mpe::io::write_convergence_csv(out / "convergence.csv", rep.residuals);
    if (bm.model.d() == 2)
        mpe::io::write_slice_csv(out / "slice.csv",
                                 mpe::slice_observable(bm.model, rep.final_value, 0));

    json s = base_summary("picard", cfg, bm);
    s["converged"] = rep.converged;
    s["iterations"] = rep.iterations_run;
    s["residuals"] = rep.residuals;
    s["rate_fit"] = rate_fit_json(rep.rate_fit);
    s["c_a"] = rep.c_a;
    s["control_bound_exceeded"] = rep.control_bound_exceeded;
    s["seconds"] = rep.seconds;
    write_summary(out, s);
    if (rep.control_bound_exceeded)
        std::cerr << "warning: control exceeded the admissible bound c_a = " << rep.c_a << "\n";
    std::cout << "picard: " << (rep.converged ? "converged" : "NOT converged")
              << " after " << rep.iterations_run << " iterations; outputs in "
              << out.string() << "\n";
    return 0;
}

int cmd_direct(const json& cfg, const fs::path& out) {
    BuiltModel bm = build_model(cfg);
    mpe::TimeGrid grid = build_grid(cfg, bm.model);
    mpe::OdeConfig ode = build_ode(cfg);

    mpe::DirectSolveResult res = mpe::solve_nll_direct(bm.model, grid, ode);

    mpe::io::write_values_csv(out / "values.csv", bm.model, res.value);
    mpe::io::write_control_csv(out / "control.csv", bm.model, res.control);
    if (bm.model.d() == 2)
        mpe::io::write_slice_csv(out / "slice.csv",
                                 mpe::slice_observable(bm.model, res.value, 0));

    json s = base_summary("direct", cfg, bm);
    s["instability"] = res.instability;
    s["sup_value"] = res.sup_value;
    write_summary(out, s);
    if (res.instability)
        std::cerr << "warning: direct solve exceeded 10*c_v; result may not be an equilibrium\n";
    std::cout << "direct: done" << (res.instability ? " (instability flagged)" : "")
              << "; outputs in " << out.string() << "\n";
    return 0;
}

int cmd_verify(const json& cfg, const fs::path& control_path, const fs::path& out) {
    BuiltModel bm = build_model(cfg);
    mpe::ControlField beta;
    try {
        beta = mpe::io::read_control_csv(control_path, bm.model);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("control file: ") + e.what());
    }
    mpe::OdeConfig ode = build_ode(cfg);
    mpe::EquilibriumCertificate cert =
        mpe::exploitability(bm.model, beta, beta.grid, ode);

    json s = base_summary("verify", cfg, bm);
    s["epsilon"] = cert.epsilon;
    s["epsilon_raw"] = cert.epsilon_raw;
    s["argmax"] = {{"t", beta.grid.node(cert.t_index)},
                   {"x", bm.model.label(cert.x)},
                   {"mu_rank", cert.mu_rank}};
    s["grid_M"] = beta.grid.M;
    write_summary(out, s);
    fs::create_directories(out);
    std::ofstream rep(out / "certificate.txt");
    rep << "epsilon-MPE certificate\n"
        << "epsilon: " << mpe::io::fmt(cert.epsilon) << "\n"
        << "epsilon_raw: " << mpe::io::fmt(cert.epsilon_raw) << "\n"
        << "argmax: t=" << mpe::io::fmt(beta.grid.node(cert.t_index))
        << " x=" << bm.model.label(cert.x) << " mu_rank=" << cert.mu_rank << "\n"
        << "grid: M=" << beta.grid.M << " T=" << mpe::io::fmt(beta.grid.T) << "\n"
        << "ode: rtol=" << mpe::io::fmt(ode.rtol) << " atol=" << mpe::io::fmt(ode.atol) << "\n";
    std::cout << "verify: epsilon = " << mpe::io::fmt(cert.epsilon) << " at t="
              << mpe::io::fmt(beta.grid.node(cert.t_index)) << ", x="
              << bm.model.label(cert.x) << ", mu_rank=" << cert.mu_rank << "\n";
    return 0;
}

// node-sampled per-state fractions of all N+1 players along one trajectory
void occupancy_series(const mpe::GameModel& model, const mpe::TrajectoryRecord& rec,
                      const mpe::TimeGrid& grid, std::vector<double>& accum) {
    int d = model.d();
    int x = rec.x0;
    mpe::CountVector counts = rec.counts0;
    std::size_t ev = 0;
    double denom = model.N() + 1;
    for (int k = 0; k <= grid.M; ++k) {
        double t = grid.node(k);
        while (ev < rec.events.size() && rec.events[ev].time <= t) {
            const mpe::Event& e = rec.events[ev];
            if (e.actor < 0) {
                x = e.to;
            } else {
                counts[static_cast<std::size_t>(e.from)] -= 1;
                counts[static_cast<std::size_t>(e.to)] += 1;
            }
            ++ev;
        }
        for (int s = 0; s < d; ++s) {
            double frac = (counts[static_cast<std::size_t>(s)] + (x == s ? 1.0 : 0.0)) / denom;
            accum[static_cast<std::size_t>(k) * d + static_cast<std::size_t>(s)] += frac;
        }
    }
}

int cmd_simulate(const json& cfg, const std::string& alpha_path,
                 const std::string& beta_path, const fs::path& out, int threads) {
    BuiltModel bm = build_model(cfg);
    mpe::TimeGrid grid = build_grid(cfg, bm.model);

    mpe::ZeroPolicy zero;
    std::optional<mpe::ControlField> alpha_field, beta_field;
    std::unique_ptr<mpe::GridPolicy> alpha_grid, beta_grid;
    const mpe::ControlPolicy* alpha = &zero;
    const mpe::ControlPolicy* beta = &zero;
    if (!alpha_path.empty()) {
        alpha_field = mpe::io::read_control_csv(alpha_path, bm.model);
        alpha_grid = std::make_unique<mpe::GridPolicy>(*alpha_field, bm.model.simplex());
        alpha = alpha_grid.get();
    }
    if (!beta_path.empty()) {
        beta_field = mpe::io::read_control_csv(beta_path, bm.model);
        beta_grid = std::make_unique<mpe::GridPolicy>(*beta_field, bm.model.simplex());
        beta = beta_grid.get();
    } else if (alpha_grid) {
        beta = alpha_grid.get();
    }

    const json& mc = cfg.at("mc");
    int M = mc.at("M").get<int>();
    int evals = mc.at("evals").get<int>();
    std::uint64_t seed = mc.at("seed").get<std::uint64_t>();
    mpe::SimOptions opts;
    opts.thinning = mc.at("thinning").get<bool>();
    opts.rate_bound = mc.at("rate_bound").get<double>();
    opts.record_events = true;
    mpe::InitialDistribution theta0 = build_init(cfg, bm.model);

    int d = bm.model.d();
    std::size_t nk = static_cast<std::size_t>(grid.M + 1) * d;
    std::vector<double> mean(nk, 0.0), m2(nk, 0.0);
    std::vector<double> all_costs;
    std::vector<mpe::TrajectoryRecord> all_records;
    double cost_mean_total = 0;

    for (int e = 0; e < evals; ++e) {
        std::uint64_t seed_e = seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(e + 1));
        std::vector<double> costs;
        std::vector<mpe::TrajectoryRecord> records;
        mpe::CostEstimate est = mpe::estimate_cost(bm.model, *alpha, *beta, theta0,
                                                   M, seed_e, threads, opts,
                                                   &costs, &records);
        cost_mean_total += est.mean / evals;
        std::vector<double> acc(nk, 0.0);
        for (const auto& rec : records) occupancy_series(bm.model, rec, grid, acc);
        for (std::size_t i = 0; i < nk; ++i) {
            double v = acc[i] / M;
            double delta = v - mean[i];
            mean[i] += delta / (e + 1);
            m2[i] += delta * (v - mean[i]);
        }
        if (mc.at("dump_trajectories").get<bool>()) {
            all_costs.insert(all_costs.end(), costs.begin(), costs.end());
            for (auto& r : records) all_records.push_back(std::move(r));
        }
    }

    mpe::io::DistributionBands bands;
    bands.times.resize(static_cast<std::size_t>(grid.M + 1));
    for (int k = 0; k <= grid.M; ++k) bands.times[static_cast<std::size_t>(k)] = grid.node(k);
    bands.mean = mean;
    bands.std.resize(nk);
    for (std::size_t i = 0; i < nk; ++i)
        bands.std[i] = evals > 1 ? std::sqrt(m2[i] / (evals - 1)) : 0.0;
    mpe::io::write_bands_csv(out / "bands.csv", bm.model, bands);

    if (mc.at("dump_trajectories").get<bool>()) {
        mpe::io::write_trajectories_csv(out / "trajectories.csv", bm.model, all_records);
        mpe::io::write_costs_csv(out / "costs.csv", all_costs);
    }

    json s = base_summary("simulate", cfg, bm);
    s["evals"] = evals;
    s["trajectories_per_eval"] = M;
    s["mean_cost"] = cost_mean_total;
    write_summary(out, s);
    std::cout << "simulate: " << evals << " evaluations x " << M
              << " trajectories; outputs in " << out.string() << "\n";
    return 0;
}

int cmd_neural(const json& cfg, const fs::path& out, int threads) {
    BuiltModel bm = build_model(cfg);
    const json& nn = cfg.at("neural");
    mpe::TrainConfig tc;
    int layers = nn.at("layers").get<int>();
    int width = nn.at("width").get<int>();
    if (layers < 1 || width < 1) throw ConfigError("neural.layers and neural.width must be >= 1");
    tc.hidden.assign(static_cast<std::size_t>(layers), width);
    tc.lr = nn.at("lr").get<double>();
    tc.epochs = nn.at("epochs").get<int>();
    tc.batch = nn.at("batch").get<int>();
    tc.seed = cfg.at("mc").at("seed").get<std::uint64_t>();
    tc.threads = threads;
    int iters = nn.at("iters").get<int>();
    double rho = cfg.at("picard").at("rho").get<double>();
    mpe::InitialDistribution theta0 = build_init(cfg, bm.model);

    mpe::NeuralPicardResult res =
        mpe::neural_picard_run(bm.model, theta0, iters, rho, tc);

    fs::create_directories(out);
    mpe::io::save_mixed_control(out / "mixed_control.json", res.control);
    mpe::io::write_loss_csv(out / "loss.csv", res.logs);
    {
        std::ofstream f(out / "cost.csv", std::ios::binary);
        f << "iter,cost,stderr\n";
        for (const auto& log : res.logs)
            f << log.iteration << ',' << mpe::io::fmt(log.estimated_cost) << ','
              << mpe::io::fmt(log.cost_std_error) << '\n';
    }

    json s = base_summary("neural", cfg, bm);
    s["iterations"] = iters;
    s["components"] = res.control.size();
    json costs = json::array();
    for (const auto& log : res.logs) costs.push_back(log.estimated_cost);
    s["estimated_costs"] = costs;
    write_summary(out, s);
    std::cout << "neural: " << iters << " iterations; outputs in " << out.string() << "\n";
    return 0;
}

int cmd_noise(const json& cfg, const fs::path& out) {
    BuiltModel bm = build_model(cfg);
    mpe::PicardConfig pc;
    pc.grid = build_grid(cfg, bm.model);
    pc.ode = build_ode(cfg);
    pc.rho = cfg.at("picard").at("rho").get<double>();
    pc.max_iter = cfg.at("picard").at("max_iter").get<int>();
    pc.tol = cfg.at("picard").at("tol").get<double>();
    mpe::NoiseConfig nc;
    nc.delta = cfg.at("noise").at("delta").get<double>();
    nc.seed = cfg.at("noise").at("seed").get<std::uint64_t>();

    mpe::NoisyPicardResult res = mpe::picard_run_noisy(bm.model, pc, nc);
    mpe::io::write_deviations_csv(out / "deviations.csv", res.deviations);

    json s = base_summary("noise", cfg, bm);
    s["delta"] = nc.delta;
    s["iterations"] = res.report.iterations_run;
    s["max_deviation"] =
        res.deviations.empty() ? 0.0 : *std::max_element(res.deviations.begin(), res.deviations.end());
    write_summary(out, s);
    std::cout << "noise: " << res.report.iterations_run
              << " iterations at delta=" << nc.delta << "; outputs in "
              << out.string() << "\n";
    return 0;
}

int cmd_presets_list() {
    std::cout << "kuramoto1  d=2  two-state synchronization, terminal coupling\n"
                 "           defaults: N=500 T=1 kappa=2\n"
                 "kuramoto2  d=2  two-state synchronization, running coupling + thermal noise\n"
                 "           defaults: N=500 T=10 kappa=6 sigma2=0.5\n"
                 "cyber      d=4  cyber-security with quadratic adjustment costs, states (DI,DS,UI,US)\n"
                 "           defaults: N=24 T=10 v_H=0.2 qD_inf=0.4 qU_inf=0.3 qD_rec=0.1 qU_rec=0.65\n"
                 "                     lam_UD=0.4 lam_DD=0.4 lam_DU=0.3 lam_UU=0.3 k_D=0.3 k_I=0.5\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markov perfect equilibria of symmetric finite-state games"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;

    app.add_option("--config", config_path, "JSON config file")->capture_default_str();
    app.add_option("--preset", preset, "model preset (kuramoto1|kuramoto2|cyber)");
    app.add_option("--set", sets, "override a config key, e.g. --set picard.rho=0.5");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "seed for mc and noise sections");
    app.add_option("--threads", threads, "worker threads")->capture_default_str();
    app.fallthrough();

    auto* sub_picard = app.add_subcommand("picard", "weighted Picard iteration on the dynamic programming equation");
    auto* sub_direct = app.add_subcommand("direct", "directly integrate the coupled equilibrium system");
    auto* sub_verify = app.add_subcommand("verify", "certify a control file as an eps-MPE");
    std::string verify_control;
    sub_verify->add_option("control", verify_control, "control.csv to certify")->required();
    auto* sub_sim = app.add_subcommand("simulate", "pooled jump simulation under given controls");
    std::string sim_alpha, sim_beta;
    sub_sim->add_option("alpha", sim_alpha, "tagged control.csv (default: zero control)");
    sub_sim->add_option("beta", sim_beta, "untagged control.csv (default: same as alpha)");
    auto* sub_neural = app.add_subcommand("neural", "neural weighted Picard iteration (simulation-based)");
    auto* sub_noise = app.add_subcommand("noise", "error-corrupted Picard iteration");
    auto* sub_list = app.add_subcommand("presets-list", "list built-in example models");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sub_list->parsed()) return cmd_presets_list();

        json cfg = default_config();
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw ConfigError("cannot open config file: " + config_path);
            json file_cfg;
            try {
                f >> file_cfg;
            } catch (const std::exception& e) {
                throw ConfigError(std::string("config parse error: ") + e.what());
            }
            deep_merge(cfg, file_cfg);
        }
        if (!preset.empty()) cfg["model"] = json{{"preset", preset}};
        for (const auto& kv : sets) apply_set(cfg, kv);
        if (seed) {
            cfg["mc"]["seed"] = *seed;
            cfg["noise"]["seed"] = *seed;
        }
        if (!out_dir.empty()) cfg["output"] = out_dir;
        try {
            validate_config(cfg);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        fs::path out = cfg.at("output").get<std::string>();

        if (sub_picard->parsed()) return cmd_picard(cfg, out);
        if (sub_direct->parsed()) return cmd_direct(cfg, out);
        if (sub_verify->parsed()) return cmd_verify(cfg, verify_control, out);
        if (sub_sim->parsed()) return cmd_simulate(cfg, sim_alpha, sim_beta, out, threads);
        if (sub_neural->parsed()) return cmd_neural(cfg, out, threads);
        if (sub_noise->parsed()) return cmd_noise(cfg, out);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    }
}
