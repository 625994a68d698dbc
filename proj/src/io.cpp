#include "mpe/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mpe::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    return f;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_values_csv(const std::filesystem::path& path, const GameModel& model,
                      const ValueField& v) {
    auto f = open_out(path);
    const SimplexTable& sx = model.simplex();
    f << "t,x";
    for (int i = 1; i <= model.d(); ++i) f << ",n_" << i;
    f << ",v\n";
    for (int k = 0; k <= v.grid.M; ++k) {
        std::string t = fmt(v.grid.node(k));
        for (int x = 0; x < model.d(); ++x) {
            for (std::size_t m = 0; m < sx.size(); ++m) {
                f << t << ',' << model.label(x);
                for (int c : sx.counts(m)) f << ',' << c;
                f << ',' << fmt(v.at(k, x, m)) << '\n';
            }
        }
    }
}

void write_control_csv(const std::filesystem::path& path, const GameModel& model,
                       const ControlField& c) {
    auto f = open_out(path);
    const SimplexTable& sx = model.simplex();
    f << "t,x";
    for (int i = 1; i <= model.d(); ++i) f << ",n_" << i;
    for (int i = 1; i <= model.d() - 1; ++i) f << ",a_" << i;
    f << '\n';
    for (int k = 0; k <= c.grid.M; ++k) {
        std::string t = fmt(c.grid.node(k));
        for (int x = 0; x < model.d(); ++x) {
            for (std::size_t m = 0; m < sx.size(); ++m) {
                f << t << ',' << model.label(x);
                for (int cc : sx.counts(m)) f << ',' << cc;
                for (double a : c.rates(k, x, m)) f << ',' << fmt(a);
                f << '\n';
            }
        }
    }
}

ControlField read_control_csv(const std::filesystem::path& path,
                              const GameModel& model) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open control file: " + path.string());
    const SimplexTable& sx = model.simplex();
    const int d = model.d();
    const std::size_t ncols = 2 + static_cast<std::size_t>(d) + static_cast<std::size_t>(d - 1);

    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty control file");
    auto header = split_csv_line(line);
    if (header.size() != ncols || header[0] != "t" || header[1] != "x")
        throw std::runtime_error("control file header does not match the model dimensions");

    struct Row {
        double t;
        int x;
        std::size_t m;
        std::vector<double> a;
    };
    std::vector<Row> rows;
    double tmax = 0;
    std::map<double, int> tvals;
    CountVector counts(static_cast<std::size_t>(d));
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != ncols)
            throw std::runtime_error("control file row has wrong column count");
        Row r;
        r.t = std::stod(cells[0]);
        r.x = model.state_from_label(cells[1]);
        for (int i = 0; i < d; ++i) counts[static_cast<std::size_t>(i)] = std::stoi(cells[2 + static_cast<std::size_t>(i)]);
        r.m = sx.rank(counts);
        r.a.resize(static_cast<std::size_t>(d - 1));
        for (int i = 0; i < d - 1; ++i) {
            double a = std::stod(cells[2 + static_cast<std::size_t>(d) + static_cast<std::size_t>(i)]);
            if (!(a >= 0) || !std::isfinite(a))
                throw std::runtime_error("control file has a negative or non-finite rate");
            r.a[static_cast<std::size_t>(i)] = a;
        }
        tmax = std::max(tmax, r.t);
        tvals[r.t] = 1;
        rows.push_back(std::move(r));
    }
    if (tvals.size() < 2) throw std::runtime_error("control file needs at least two time nodes");

    int M = static_cast<int>(tvals.size()) - 1;
    TimeGrid grid(tmax, M);
    // node lookup with tolerance
    int idx = 0;
    std::map<double, int> node_of;
    for (auto& [t, tag] : tvals) {
        (void)tag;
        double expect = grid.node(idx);
        if (std::fabs(t - expect) > 1e-9 * std::max(1.0, tmax))
            throw std::runtime_error("control file time nodes are not a uniform grid");
        node_of[t] = idx++;
    }

    ControlField c(grid, d, sx.size());
    std::vector<char> seen(c.data.size() / static_cast<std::size_t>(d - 1), 0);
    for (const Row& r : rows) {
        int k = node_of.at(r.t);
        auto dst = c.rates(k, r.x, r.m);
        std::copy(r.a.begin(), r.a.end(), dst.begin());
        std::size_t flat = (static_cast<std::size_t>(k) * static_cast<std::size_t>(d) + static_cast<std::size_t>(r.x)) * sx.size() + r.m;
        if (seen[flat]) throw std::runtime_error("control file has duplicate rows");
        seen[flat] = 1;
    }
    for (char s : seen)
        if (!s) throw std::runtime_error("control file does not cover every (t, x, mu)");
    return c;
}

void write_convergence_csv(const std::filesystem::path& path,
                           std::span<const double> residuals) {
    auto f = open_out(path);
    f << "iter,residual\n";
    for (std::size_t i = 0; i < residuals.size(); ++i)
        f << (i + 1) << ',' << fmt(residuals[i]) << '\n';
}

void write_slice_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<double, double>>& slice) {
    auto f = open_out(path);
    f << "p,z\n";
    for (auto& [p, z] : slice) f << fmt(p) << ',' << fmt(z) << '\n';
}

void write_deviations_csv(const std::filesystem::path& path,
                          std::span<const double> deviations) {
    auto f = open_out(path);
    f << "iter,deviation\n";
    for (std::size_t i = 0; i < deviations.size(); ++i)
        f << (i + 1) << ',' << fmt(deviations[i]) << '\n';
}

void write_trajectories_csv(const std::filesystem::path& path,
                            const GameModel& model,
                            std::span<const TrajectoryRecord> records) {
    auto f = open_out(path);
    f << "traj_id,event_time,actor,from,to\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (const Event& e : records[i].events) {
            f << i << ',' << fmt(e.time) << ','
              << (e.actor < 0 ? "tagged" : "untagged") << ','
              << model.label(e.from) << ',' << model.label(e.to) << '\n';
        }
    }
}

void write_costs_csv(const std::filesystem::path& path,
                     std::span<const double> costs) {
    auto f = open_out(path);
    f << "traj_id,cost\n";
    for (std::size_t i = 0; i < costs.size(); ++i)
        f << i << ',' << fmt(costs[i]) << '\n';
}

void write_bands_csv(const std::filesystem::path& path, const GameModel& model,
                     const DistributionBands& bands) {
    auto f = open_out(path);
    f << "t,x,mean,std\n";
    int d = model.d();
    for (std::size_t ti = 0; ti < bands.times.size(); ++ti) {
        for (int x = 0; x < d; ++x) {
            std::size_t i = ti * static_cast<std::size_t>(d) + static_cast<std::size_t>(x);
            f << fmt(bands.times[ti]) << ',' << model.label(x) << ','
              << fmt(bands.mean[i]) << ',' << fmt(bands.std[i]) << '\n';
        }
    }
}

void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<NeuralIterLog>& logs) {
    auto f = open_out(path);
    f << "iter,epoch,loss\n";
    for (const auto& log : logs)
        for (std::size_t e = 0; e < log.loss_curve.size(); ++e)
            f << log.iteration << ',' << (e + 1) << ',' << fmt(log.loss_curve[e]) << '\n';
}

namespace {

nlohmann::json net_to_json(const ControlNet& net) {
    nlohmann::json j;
    j["kind"] = "control_net";
    j["version"] = 1;
    j["d"] = net.d();
    j["T"] = net.T();
    j["hidden"] = net.hidden();
    j["params"] = std::vector<double>(net.params().begin(), net.params().end());
    return j;
}

ControlNet net_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "control_net" || j.value("version", 0) != 1)
        throw std::runtime_error("checkpoint: not a version-1 control_net");
    ControlNet net(j.at("d").get<int>(), j.at("T").get<double>(),
                   j.at("hidden").get<std::vector<int>>());
    auto p = j.at("params").get<std::vector<double>>();
    net.set_params(p);
    return net;
}

}  // namespace

void save_control_net(const std::filesystem::path& path, const ControlNet& net) {
    auto f = open_out(path);
    f << net_to_json(net).dump(2) << '\n';
}

ControlNet load_control_net(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
    nlohmann::json j;
    f >> j;
    return net_from_json(j);
}

void save_mixed_control(const std::filesystem::path& path, const MixedControl& mc) {
    nlohmann::json j;
    j["kind"] = "mixed_control";
    j["version"] = 1;
    j["weights"] = std::vector<double>(mc.weights().begin(), mc.weights().end());
    nlohmann::json nets = nlohmann::json::array();
    for (std::size_t i = 0; i < mc.size(); ++i) nets.push_back(net_to_json(mc.net(i)));
    j["nets"] = std::move(nets);
    auto f = open_out(path);
    f << j.dump(2) << '\n';
}

MixedControl load_mixed_control(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
    nlohmann::json j;
    f >> j;
    if (j.value("kind", "") != "mixed_control" || j.value("version", 0) != 1)
        throw std::runtime_error("checkpoint: not a version-1 mixed_control");
    auto weights = j.at("weights").get<std::vector<double>>();
    auto nets = j.at("nets");
    if (weights.empty() || weights.size() != nets.size())
        throw std::runtime_error("checkpoint: weight/net mismatch");
    std::vector<ControlNet> loaded;
    for (const auto& nj : nets) loaded.push_back(net_from_json(nj));
    return MixedControl::from_components(std::move(loaded), std::move(weights));
}

}  // namespace mpe::io
