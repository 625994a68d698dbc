#pragma once

#include "mpe/dopri.hpp"
#include "mpe/field.hpp"
#include "mpe/game.hpp"

namespace mpe {

// Backward dynamic programming solve: the tagged player's value field when
// untagged players use beta. The terminal slice equals g bit-exactly; interior
// nodes are dense-output samples of the adaptive integration.
ValueField solve_hjb(const GameModel& model, const ControlField& beta,
                     const TimeGrid& grid, const OdeConfig& cfg,
                     OdeStats* stats = nullptr);

struct DirectSolveResult {
    ValueField value;
    ControlField control;   // minimizer of the solved value, sampled on the grid
    bool instability = false;  // sup-norm of value exceeded 10*c_v
    double sup_value = 0;
};

// Directly integrates the coupled equilibrium system: the control is
// recomputed from the current value field inside every RHS evaluation.
DirectSolveResult solve_nll_direct(const GameModel& model, const TimeGrid& grid,
                                   const OdeConfig& cfg, OdeStats* stats = nullptr);

// Linear policy evaluation: cost of the tagged player using alpha while the
// others use beta; no minimization in the right-hand side.
ValueField evaluate_policy(const GameModel& model, const ControlField& alpha,
                           const ControlField& beta, const TimeGrid& grid,
                           const OdeConfig& cfg, OdeStats* stats = nullptr);

// alpha(t_k) = alpha_hat(x, mu, Delta_x v(t_k)) node by node.
void minimizer_field(const GameModel& model, const ValueField& v,
                     ControlField& alpha_out);

}  // namespace mpe
