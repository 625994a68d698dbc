#pragma once

#include <utility>
#include <vector>

#include "mpe/hjb.hpp"
#include "mpe/picard.hpp"

namespace mpe {

// |psi(t_k)|_2: Euclidean norm over all states (and rate components) at a node
double field_norm(const ValueField& f, int k);
double field_norm(const ControlField& f, int k);
// max over grid nodes of the node norms
double sup_norm(const ValueField& f);
double sup_norm(const ControlField& f);
double sup_norm_diff(const ValueField& a, const ValueField& b);
double sup_norm_diff(const ControlField& a, const ControlField& b);
// pointwise sup |entry| over the whole field
double sup_abs(const ValueField& f);
double sup_abs(const ControlField& f);
// max over (t, x, mu) of the per-state rate-vector norm |psi(t,x,mu)|_2;
// the quantity the admissibility bound c_a controls
double sup_state_norm(const ControlField& f);

struct EquilibriumCertificate {
    double epsilon = 0;      // clamped at 0 in reports
    double epsilon_raw = 0;  // can be slightly negative from solver noise
    int t_index = 0;
    int x = 0;
    std::size_t mu_rank = 0;
    TimeGrid grid;
    OdeConfig ode;
};

// Smallest eps certifying beta as an eps-MPE on the grid: the maximal gap
// between the cost of playing beta against itself and the best-response value.
EquilibriumCertificate exploitability(const GameModel& model,
                                      const ControlField& beta,
                                      const TimeGrid& grid, const OdeConfig& cfg);

struct PipelineComparison {
    PicardReport picard;
    DirectSolveResult direct;
    double value_gap = 0;    // sup-norm gap between the two value fields
    double control_gap = 0;  // sup-norm gap between the two controls
    // d = 2 only: (p, v(0,state0,p) - v(0,state1,p)) sorted by p
    std::vector<std::pair<double, double>> slice_picard, slice_direct;
};

PipelineComparison compare_pipelines(const GameModel& model, const PicardConfig& cfg);

}  // namespace mpe
