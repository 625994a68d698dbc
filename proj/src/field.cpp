#include "mpe/field.hpp"

#include <algorithm>

#include "mpe/kernels.hpp"

namespace mpe {

void ControlField::eval_slice(double t, std::span<double> out) const {
    int k;
    double w;
    grid.locate(t, k, w);
    kernels::ops().lerp_clamp(out.data(), slice(k).data(), slice(k + 1).data(),
                              w, 0.0, per_node());
}

void ControlField::eval_rates(double t, int x, std::size_t m,
                              std::span<double> out) const {
    int k;
    double w;
    grid.locate(t, k, w);
    auto a = rates(k, x, m);
    auto b = rates(k + 1, x, m);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::max(0.0, (1.0 - w) * a[i] + w * b[i]);
}

}  // namespace mpe
