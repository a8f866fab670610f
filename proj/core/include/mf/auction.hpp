#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mf/cdf.hpp"

// Static first-price auction machinery: symmetric and spiteful closed forms,
// the coupled inverse-bid ODE right-hand side, and seller revenue.

namespace mf {

struct InverseBidSolution {
    double b_low = 0.0;
    double b_high = 0.0;                      // computed top bid
    std::vector<double> grid;                 // increasing bid grid in [b_low, b_high]
    std::vector<std::vector<double>> curves;  // curves[j][i] = v_j(grid[i])
    double residual = 0.0;                    // max |H_j| over the interior grid
    double boundary_defect = 0.0;             // max |v_j(b_low)-v_low|, |v_j(b_high)-v_high|
    std::string method;                       // shooting | collocation | closed-form
    bool converged = false;
    double objective = 0.0;                   // final least-squares objective (collocation)
    int iterations = 0;

    double value_at(int j, double b) const;   // linear interpolation on the grid
    double bid_at(int j, double v) const;     // inverse lookup (curves are monotone)
};

// b(v) = v - int_{v_low}^{v} F^{n-1} / F^{n-1}(v), by adaptive quadrature.
double symmetric_bid(const Cdf& F, int n, double v);

// Uniform-model spiteful equilibrium b(v) = (n-1)/(n-alpha) * v and the
// residual of the defining ODE b = v*(1 - (1-alpha)/(n-1) * b'(v)).
double spiteful_symmetric_bid(int n, double alpha, double v);
double spiteful_ode_residual(int n, double alpha, double v);

// Seller revenue n(n-1)/((n-alpha)(n+1)) for the symmetric spiteful model.
double spiteful_revenue(int n, double alpha);

// Right-hand side of the inverse-bid system
//   v_j'(b) = F_j(v_j)/f_j(v_j) * [ 1/(n-1) * sum_k 1/(v_k - b) - 1/(v_j - b) ].
// Throws std::domain_error on v_j <= b (singular) or f_j(v_j) <= 0.
std::vector<double> ode_rhs(const ValuationModel& vm, double b, const std::vector<double>& v);

// First-order-condition defect H_j = 1 + (b - v_j) sum_{k != j} (f_k/F_k) v_k'
// evaluated with finite-difference slopes from a solution's grid curves.
double solution_residual(const ValuationModel& vm, const InverseBidSolution& sol);

struct RevenueEstimate {
    double mc = 0.0;       // Monte-Carlo E[max_j b_j(v_j)]
    double mc_se = 0.0;    // standard error of the MC mean
    double flow = 0.0;     // quadrature route: b_low + int (1 - prod_j F_j(v_j(b))) db
};

RevenueEstimate seller_revenue(const ValuationModel& vm, const InverseBidSolution& sol,
                               int mc_samples, std::uint64_t seed);

// Symmetric-model quadrature route int b(v) n F^{n-1}(v) f(v) dv.
double symmetric_revenue_quadrature(const Cdf& F, int n);

}  // namespace mf
