#pragma once

#include <vector>

#include "mf/auction.hpp"

// Forward shooting for the asymmetric inverse-bid system: start just above the
// lowest bid with the fractional-series initialization
//   v_j(b0 + h) = v_low + D1_j*h + delta1*D2_j*h^(1+delta2),
// integrate forward with an adaptive RK45 stepper, and close the top boundary
// either by the power-law rescaling (pure-power models) or by a bisection
// search over the second-order pattern (general models, n = 2).

namespace mf {

struct ShootingConfig {
    std::vector<double> D1;   // empty: slopes from the bottom-of-support expansion
    std::vector<double> D2;   // empty: fitted so the expansion matches the ODE at b0
    double delta1 = 1.0;
    double delta2 = 1.0;      // b0 = v_low + 10^(-7/(1+delta2))
    double b_stop = 0.0;      // 0: run to the top-boundary event
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    int max_steps = 200000;
    int output_points = 513;  // resampled grid size of the returned solution
};

// Inverse-bid slopes at the bottom of the support: 1 + 1/(sum_k a_k - a_j) for
// pure powers v^{a_j}; n/(n-1) when densities are positive at v_low.
std::vector<double> shooting_slope_defaults(const ValuationModel& vm);

InverseBidSolution solve_shooting(const ValuationModel& vm, const ShootingConfig& cfg = {});

// Signature mirroring the documented operation; forwards to the config form.
InverseBidSolution solve_shooting(const ValuationModel& vm, const std::vector<double>& D1,
                                  const std::vector<double>& D2, double delta1,
                                  double delta2, double b_stop);

}  // namespace mf
