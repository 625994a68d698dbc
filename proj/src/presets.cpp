#include "mpe/presets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mpe {

namespace {

void check_positive(double v, const char* name) {
    if (!(v > 0)) throw std::invalid_argument(std::string(name) + " must be > 0");
}

// kappa * (mu({1}) if x=0 else mu({0})), counts-based
double coupling_cost(double kappa, int N, int x, std::span<const int> counts) {
    double frac = static_cast<double>(counts[x == 0 ? 1 : 0]) / N;
    return kappa * frac;
}

}  // namespace

GameModel make_kuramoto1(int N, double T, double kappa) {
    if (N < 1) throw std::invalid_argument("make_kuramoto1: N must be >= 1");
    check_positive(T, "make_kuramoto1: T");
    check_positive(kappa, "make_kuramoto1: kappa");
    auto zero = [](int, std::span<const int>, std::span<double> out) { out[0] = 0.0; };
    auto one = [](int, std::span<const int>, std::span<double> out) { out[0] = 1.0; };
    auto g = [kappa, N](int x, std::span<const int> counts) {
        return coupling_cost(kappa, N, x, counts);
    };
    return GameModel(2, N, T, zero, one,
                     CostModel::quadratic_plus_state(nullptr), g, {"0", "1"});
}

GameModel make_kuramoto2(int N, double T, double kappa, double sigma2) {
    if (N < 1) throw std::invalid_argument("make_kuramoto2: N must be >= 1");
    check_positive(T, "make_kuramoto2: T");
    check_positive(kappa, "make_kuramoto2: kappa");
    if (!(sigma2 >= 0)) throw std::invalid_argument("make_kuramoto2: sigma2 must be >= 0");
    auto lam0 = [sigma2](int, std::span<const int>, std::span<double> out) { out[0] = sigma2; };
    auto one = [](int, std::span<const int>, std::span<double> out) { out[0] = 1.0; };
    auto f = [kappa, N](int x, std::span<const int> counts) {
        return coupling_cost(kappa, N, x, counts);
    };
    auto g = [](int, std::span<const int>) { return 0.0; };
    return GameModel(2, N, T, lam0, one, CostModel::quadratic_plus_state(f), g,
                     {"0", "1"});
}

bool kuramoto2_nonuniqueness_regime(double kappa, double sigma2) {
    return kappa > 4.0 * sigma2 * sigma2;
}

GameModel make_cyber(int N, double T, const CyberParams& p) {
    if (N < 1) throw std::invalid_argument("make_cyber: N must be >= 1");
    check_positive(T, "make_cyber: T");
    for (double v : {p.v_H, p.qD_inf, p.qU_inf, p.qD_rec, p.qU_rec, p.lam_UD,
                     p.lam_DD, p.lam_DU, p.lam_UU, p.k_D, p.k_I})
        if (!(v >= 0)) throw std::invalid_argument("make_cyber: parameters must be >= 0");

    // state order (DI, DS, UI, US) = (0, 1, 2, 3)
    constexpr int DI = 0, DS = 1, UI = 2, US = 3;

    auto lam0 = [p, N](int x, std::span<const int> counts, std::span<double> out) {
        for (double& v : out) v = 0;
        double muDI = static_cast<double>(counts[DI]) / N;
        double muUI = static_cast<double>(counts[UI]) / N;
        switch (x) {
            case DI:
                out[rate_slot(DS, DI)] = p.qD_rec;
                break;
            case DS:
                out[rate_slot(DI, DS)] = p.v_H * p.qD_inf + p.lam_DD * muDI + p.lam_UD * muUI;
                break;
            case UI:
                out[rate_slot(US, UI)] = p.qU_rec;
                break;
            case US:
                out[rate_slot(UI, US)] = p.v_H * p.qU_inf + p.lam_UU * muUI + p.lam_DU * muDI;
                break;
        }
    };
    // controls act on the defense switches only
    auto lam1 = [](int x, std::span<const int>, std::span<double> out) {
        for (double& v : out) v = 0;
        switch (x) {
            case DI: out[rate_slot(UI, DI)] = 1.0; break;
            case DS: out[rate_slot(US, DS)] = 1.0; break;
            case UI: out[rate_slot(DI, UI)] = 1.0; break;
            case US: out[rate_slot(DS, US)] = 1.0; break;
        }
    };
    auto f = [p](int x, std::span<const int>) {
        bool defended = (x == DI || x == DS);
        bool infected = (x == DI || x == UI);
        return (defended ? p.k_D : 0.0) + (infected ? p.k_I : 0.0);
    };
    auto g = [](int, std::span<const int>) { return 0.0; };
    return GameModel(4, N, T, lam0, lam1, CostModel::quadratic_plus_state(f), g,
                     {"DI", "DS", "UI", "US"});
}

std::vector<std::pair<double, double>> slice_observable(const GameModel& model,
                                                        const ValueField& value,
                                                        int t_index) {
    if (model.d() != 2)
        throw std::invalid_argument("slice_observable: requires d = 2");
    const SimplexTable& sx = model.simplex();
    int N = model.N();
    std::vector<std::pair<double, double>> out;
    out.reserve(sx.size());
    for (std::size_t m = 0; m < sx.size(); ++m) {
        auto c = sx.counts(m);
        double pfrac = static_cast<double>(c[1]) / N;
        out.emplace_back(pfrac, value.at(t_index, 0, m) - value.at(t_index, 1, m));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace mpe
