#pragma once

#include <functional>
#include <vector>

#include "mf/approx.hpp"

// Small-game brute-force verifiers: unilateral (Nash), coalition (strong Nash)
// and evolutionary stability checks on gridded action spaces.

namespace mf {

struct NashReport {
    bool pass = false;
    double best_improvement = 0.0;  // largest unilateral gain found
    int player = -1;                // player achieving it (-1 if none)
    double deviation = 0.0;         // the improving action
};

struct EssReport {
    bool pass = false;
    double worst_invader = 0.0;   // invader that (weakly) beats the candidate
    double worst_margin = 0.0;    // min over eps of incumbent payoff - invader payoff
};

// Scans a uniform grid of unilateral deviations per player; a deviation counts
// as profitable only if it improves the deviator by more than 1e-9.
NashReport verify_nash(const PayoffSpec& p, const Profile& profile, int grid_points);

// Same scan with per-player payoff functions (asymmetric games).
NashReport verify_nash(const std::vector<std::function<double(const Profile&)>>& payoffs,
                       double a_low, double a_high, const Profile& profile,
                       int grid_points);

// Coalition version: every nonempty subset tries joint grid deviations; pass
// iff no deviation makes all coalition members strictly better. Exponential in
// n, intended for n <= 4 sanity checks.
NashReport verify_strong_nash(const PayoffSpec& p, const Profile& profile, int grid_points);

// Evolutionary stability of a symmetric profile a*: for each grid invader
// a != a*, the incumbent must strictly out-earn the invader for some tested
// invasion share eps in (0, eps_max]; an invader weakly improving at every
// tested eps is a counterexample. Expectations over the mixed population are
// exact (binomial grouping over opponent draws).
EssReport verify_ess(const PayoffSpec& p, double a_star, int invader_grid,
                     int epsilon_grid, double eps_max = 0.5);

}  // namespace mf
