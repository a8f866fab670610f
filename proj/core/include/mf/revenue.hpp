#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mf/collocation.hpp"

// Revenue perturbation experiment: perturb the uniform model by the
// antisymmetric cubic pair F_{1,2} = v -+ eps*v(1-v)(1/2-v), solve the
// asymmetric equilibrium by collocation, and measure how fast the seller's
// revenue leaves the symmetric value. The observable is the quadratic scaling
// of the gap in eps.

namespace mf {

struct PerturbationRow {
    double eps = 0.0;        // family parameter
    double model_eps = 0.0;  // sup-norm heterogeneity max_j sup|F_j - mean|
    double revenue = 0.0;    // flow-quadrature revenue of the perturbed pair
    double gap = 0.0;        // |revenue - symmetric revenue|
    bool valid = false;      // false: eps rejected (non-monotone CDF) or solver failed
    std::string note;
};

struct PerturbationResult {
    std::vector<PerturbationRow> rows;
    double base_revenue = 0.0;  // symmetric uniform revenue via the same pipeline
    double slope = 0.0;         // log-log slope of gap vs eps over valid rows
};

PerturbationResult revenue_perturbation_experiment(const std::vector<double>& eps_list,
                                                   std::uint64_t seed,
                                                   const CollocationConfig& cfg = {});

}  // namespace mf
