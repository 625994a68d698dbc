#include "mpe/verify.hpp"

#include <algorithm>
#include <cmath>

#include "mpe/kernels.hpp"
#include "mpe/presets.hpp"

namespace mpe {

double field_norm(const ValueField& f, int k) {
    return std::sqrt(kernels::ops().sumsq(f.slice(k).data(), f.states()));
}

double field_norm(const ControlField& f, int k) {
    return std::sqrt(kernels::ops().sumsq(f.slice(k).data(), f.per_node()));
}

namespace {
template <class Field>
double sup_norm_impl(const Field& f) {
    double s = 0;
    for (int k = 0; k <= f.grid.M; ++k) s = std::max(s, field_norm(f, k));
    return s;
}
template <class Field>
double sup_norm_diff_impl(const Field& a, const Field& b) {
    if (a.data.size() != b.data.size())
        throw std::invalid_argument("sup_norm_diff: incompatible fields");
    std::size_t per = a.data.size() / static_cast<std::size_t>(a.grid.M + 1);
    double s = 0;
    for (int k = 0; k <= a.grid.M; ++k) {
        std::size_t off = static_cast<std::size_t>(k) * per;
        s = std::max(s, kernels::ops().sumsq_diff(a.data.data() + off,
                                                  b.data.data() + off, per));
    }
    return std::sqrt(s);
}
template <class Field>
double sup_abs_impl(const Field& f) {
    double s = 0;
    for (double v : f.data) s = std::max(s, std::fabs(v));
    return s;
}
}  // namespace

double sup_norm(const ValueField& f) { return sup_norm_impl(f); }
double sup_norm(const ControlField& f) { return sup_norm_impl(f); }
double sup_norm_diff(const ValueField& a, const ValueField& b) {
    return sup_norm_diff_impl(a, b);
}
double sup_norm_diff(const ControlField& a, const ControlField& b) {
    return sup_norm_diff_impl(a, b);
}
double sup_abs(const ValueField& f) { return sup_abs_impl(f); }
double sup_abs(const ControlField& f) { return sup_abs_impl(f); }

double sup_state_norm(const ControlField& f) {
    std::size_t dm1 = static_cast<std::size_t>(f.d - 1);
    double best = 0;
    for (std::size_t off = 0; off + dm1 <= f.data.size(); off += dm1) {
        double s = 0;
        for (std::size_t k = 0; k < dm1; ++k) s += f.data[off + k] * f.data[off + k];
        best = std::max(best, s);
    }
    return std::sqrt(best);
}

EquilibriumCertificate exploitability(const GameModel& model,
                                      const ControlField& beta,
                                      const TimeGrid& grid,
                                      const OdeConfig& cfg) {
    ValueField v = solve_hjb(model, beta, grid, cfg);
    ValueField j = evaluate_policy(model, beta, beta, grid, cfg);

    EquilibriumCertificate cert;
    cert.grid = grid;
    cert.ode = cfg;
    const Tabulation& tab = model.tables();
    double best = -1e300;
    for (int k = 0; k <= grid.M; ++k) {
        auto js = j.slice(k);
        auto vs = v.slice(k);
        for (std::size_t i = 0; i < js.size(); ++i) {
            double gap = js[i] - vs[i];
            if (gap > best) {
                best = gap;
                cert.t_index = k;
                cert.x = static_cast<int>(i / tab.S);
                cert.mu_rank = i % tab.S;
            }
        }
    }
    cert.epsilon_raw = best;
    cert.epsilon = std::max(0.0, best);
    return cert;
}

PipelineComparison compare_pipelines(const GameModel& model,
                                     const PicardConfig& cfg) {
    PipelineComparison cmp;
    cmp.picard = picard_run(model, cfg);
    cmp.direct = solve_nll_direct(model, cfg.grid, cfg.ode);
    cmp.value_gap = sup_norm_diff(cmp.picard.final_value, cmp.direct.value);
    cmp.control_gap = sup_norm_diff(cmp.picard.final_control, cmp.direct.control);
    if (model.d() == 2) {
        cmp.slice_picard = slice_observable(model, cmp.picard.final_value, 0);
        cmp.slice_direct = slice_observable(model, cmp.direct.value, 0);
    }
    return cmp;
}

}  // namespace mpe
