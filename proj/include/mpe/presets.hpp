#pragma once

#include <utility>
#include <vector>

#include "mpe/field.hpp"
#include "mpe/game.hpp"

namespace mpe {

// Two-state synchronization game with terminal coupling: lambda0 = 0,
// lambda1 = 1, l = a^2/2, g(x,mu) = kappa*(mu({1}) if x=0 else mu({0})).
// State labels are {0, 1}.
GameModel make_kuramoto1(int N, double T, double kappa);

// Two-state variant with running coupling and thermal noise: lambda0 = sigma2,
// l = a^2/2 + kappa*(mu({1}) if x=0 else mu({0})), g = 0.
GameModel make_kuramoto2(int N, double T, double kappa, double sigma2);

// The mean-field limit admits multiple equilibria in this regime (large T).
bool kuramoto2_nonuniqueness_regime(double kappa, double sigma2);

// Four-state cyber-security game with quadratic adjustment costs. State order
// (DI, DS, UI, US); the control rates the defense switches DI<->UI, DS<->US.
struct CyberParams {
    double v_H = 0.2;
    double qD_inf = 0.4;
    double qU_inf = 0.3;
    double qD_rec = 0.1;
    double qU_rec = 0.65;
    double lam_UD = 0.4;
    double lam_DD = 0.4;
    double lam_DU = 0.3;
    double lam_UU = 0.3;
    double k_D = 0.3;
    double k_I = 0.5;
};
GameModel make_cyber(int N, double T, const CyberParams& params = {});

// d = 2 only: (p, z) pairs with p = n1/N and z = v(t,0,mu) - v(t,1,mu),
// sorted by p. At the equilibrium this slice coincides with the optimal
// control of the tagged player.
std::vector<std::pair<double, double>> slice_observable(const GameModel& model,
                                                        const ValueField& value,
                                                        int t_index);

}  // namespace mpe
