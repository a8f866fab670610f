#pragma once

#include <vector>

#include "mf/auction.hpp"

// Polynomial collocation for the inverse-bid system: represent
//   v_j(b) = bbar - sum_{k=0..K} mu_{j,k} (bbar - b)^k
// and minimize the squared first-order-condition residuals H_j on a grid that
// tracks the moving top bid bbar, plus T-weighted boundary penalties. Solved
// by damped Gauss-Newton over the 1 + n(K+1) unknowns [bbar; mu].

namespace mf {

struct CollocationConfig {
    int K = 7;          // polynomial degree >= 2 (K = 1 is enough for uniform)
    int T = 64;         // residual grid size
    int max_iter = 200;
    double tol = 1e-10;          // stop when the objective drops below tol
    double step_tol = 1e-13;     // or the damped step stalls
    std::vector<double> init;    // optional seed [bbar; mu_{1,0..K}; ...; mu_{n,0..K}]
};

// Objective at a given coefficient vector (exposed for seed diagnostics):
// sum_{t,j} H_j(b_t)^2 + T * sum_j (v_j(bbar) - v_high)^2
//                      + T * sum_j (v_j(b_low) - v_low)^2.
double collocation_objective(const ValuationModel& vm, const CollocationConfig& cfg,
                             const std::vector<double>& coeffs);

// Default seed from the symmetric closed form of the mean CDF.
std::vector<double> collocation_seed(const ValuationModel& vm, const CollocationConfig& cfg);

InverseBidSolution solve_collocation(const ValuationModel& vm, const CollocationConfig& cfg = {});

}  // namespace mf
