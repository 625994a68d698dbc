#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpe {

// Adaptive embedded Runge-Kutta order 5(4), Dormand-Prince coefficients, with
// 4th-order dense output. Defaults follow the solver class used for the
// experiments; max_step = 0 means "grid spacing" and is filled by the caller.
struct OdeConfig {
    double rtol = 1e-6;
    double atol = 1e-8;
    double max_step = 0;

    void validate() const {
        if (!(rtol > 0) || !(atol > 0))
            throw std::invalid_argument("OdeConfig: tolerances must be > 0");
    }
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double t) : std::runtime_error(what), t_fail(t) {}
    double t_fail;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_evals = 0;
};

using OdeRhs = std::function<void(double t, std::span<const double> y,
                                  std::span<double> dydt)>;
// called for each requested sample time, in order
using OdeSampler = std::function<void(std::size_t sample_index,
                                      std::span<const double> y)>;

// Integrates y' = f(t, y) from t0 to t1 (t1 > t0), evaluating dense output at
// the sorted times sample_t (all within (t0, t1]). y holds y(t0) on entry and
// y(t1) on return. Throws SolverError on step-size underflow or non-finite
// right-hand sides.
OdeStats dopri5(const OdeRhs& f, std::vector<double>& y, double t0, double t1,
                const OdeConfig& cfg, std::span<const double> sample_t,
                const OdeSampler& on_sample);

}  // namespace mpe
