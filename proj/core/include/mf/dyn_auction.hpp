#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mf/cdf.hpp"

// Finite-horizon repeated first-price auction with per-bidder budgets:
//   s_{t+1} = s_t - c(s_t, b_t) * 1{win},   V_T(s) = terminal(s),
//   V_t(s) = E_v sup_{b <= cap(s)} E[(v - b)1{win} + V_{t+1}(s - c(s,b))1{win}
//                                   + V_{t+1}(s)1{lose}].
// Opponent bids enter through beliefs: continuous piecewise-linear CDFs on the
// bid grid (plus a possible atom at zero for forced abstention). Keeping the
// beliefs continuous keeps the win probability, the best response and the
// revenue smooth, which the second-order revenue experiment needs.

namespace mf {

class PiecewiseLinearCdf {
public:
    PiecewiseLinearCdf() = default;
    // knots strictly increasing; values nondecreasing, values.back() == 1.
    // values.front() > 0 is an atom at knots.front().
    PiecewiseLinearCdf(std::vector<double> knots, std::vector<double> values);

    double operator()(double x) const;
    double atom_at_origin() const { return values_.empty() ? 0.0 : values_.front(); }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    double sample(double u) const;  // inverse transform, u in (0,1)

private:
    std::vector<double> knots_;
    std::vector<double> values_;
};

// E[max of independent draws], one per CDF, all sharing the same knot grid;
// exact per linear piece (Gauss-Legendre of sufficient order).
double expected_max(const std::vector<PiecewiseLinearCdf>& cdfs);

struct DynAuctionConfig {
    int n = 2;
    int horizon = 1;                               // T periods 0..T-1
    double s_max = 4.0;
    int budget_points = 101;
    double initial_budget = 4.0;
    std::vector<std::vector<CdfPtr>> value_cdfs;   // [t][j]; one row may be shared
    std::function<double(double, double)> cost;    // c(s, b); default c = b
    std::function<double(double)> terminal;        // gbar(s); default 0
    double bid_max = 1.0;
    int bid_points = 201;
    // One dense value grid serves both the E_v quadrature (cell-mass weights)
    // and the policy/belief sampling; keeping them identical makes the
    // discretization bias cancel between matched runs.
    int value_nodes = 257;
    // belief fixed-point controls
    double fp_damping = 0.5;
    double fp_tol = 1e-6;
    int fp_max_rounds = 100;
    int outer_sweeps = 8;        // budget-distribution consistency sweeps
    double outer_tol = 1e-6;

    static DynAuctionConfig uniform_symmetric(int n, int horizon);
    double feasible_cap(double s) const;  // largest b with c(s,b) <= s, clipped to bid_max
    const Cdf& value_cdf(int t, int j) const;
};

enum class BeliefMode {
    RationalExpectations,  // per-period fixed point: policy <-> induced bid CDF
    Exogenous,             // caller-supplied opponent bid CDFs, no fixed point
};

struct ValueTable {
    std::vector<double> budget_grid;
    std::vector<double> value_grid;
    // V[j][t][s]: t = 0..T (row T is the terminal payoff)
    std::vector<std::vector<std::vector<double>>> V;
    // policy[j][t][s][v]
    std::vector<std::vector<std::vector<std::vector<double>>>> policy;
    // equilibrium bid-distribution beliefs[t][j]
    std::vector<std::vector<PiecewiseLinearCdf>> beliefs;
    bool fixed_point_converged = false;
    double fixed_point_residual = 0.0;
    int fixed_point_rounds = 0;

    double value0(int j, double s) const;
    double policy_bid(int j, int t, double v, double s) const;
};

struct BestResponse {
    double bid = 0.0;
    double objective = 0.0;  // expected continuation value of the period
    double win_prob = 0.0;
};

// Single-state best response against fixed opponent bid CDFs; V_next maps
// budget to next-period value. Grid scan plus golden-section refinement inside
// the bracketing cell; exact ties resolve toward the lower bid.
BestResponse best_response_bid(const DynAuctionConfig& cfg, double v, double s,
                               const std::vector<const PiecewiseLinearCdf*>& opponents,
                               const std::function<double(double)>& V_next);

// Backward dynamic program over the budget and value grids. In
// rational-expectations mode each period's beliefs must regenerate from the
// committed policies. Periods where budget caps stay slack on every reachable
// path and the continuation surface is flat reduce to static first-price
// auctions; those are pinned by the inverse-bid collocation solver and the
// beliefs induced from its curves, which the damped best-response iteration
// cannot do on its own (the iteration map repels the smooth equilibrium).
// Binding-budget configurations fall back to the damped iteration and are
// flagged through fixed_point_converged when the residual stalls.
ValueTable value_iteration(const DynAuctionConfig& cfg,
                           BeliefMode mode = BeliefMode::RationalExpectations,
                           const std::vector<std::vector<PiecewiseLinearCdf>>* exogenous = nullptr);

struct PlayStats {
    double revenue_mean = 0.0;  // seller revenue summed over the horizon
    double revenue_ci = 0.0;    // 95% halfwidth over episodes
    std::vector<double> bidder_payoff_mean;
    std::vector<double> bidder_payoff_ci;
    int episodes = 0;
    std::uint64_t seed = 0;
};

// Plays the tabulated policy; uniform tie-break among top bids; budgets follow
// the recursion and bids are clipped to the feasibility cap.
PlayStats simulate_play(const DynAuctionConfig& cfg, const ValueTable& table, int episodes,
                        std::uint64_t seed);

// Deterministic revenue of the equilibrium flow: sum_t E[max_j b_{j,t}] under
// the fixed-point beliefs.
double expected_revenue_flow(const DynAuctionConfig& cfg, const ValueTable& table);

// Cubic-family heterogeneous copy of a symmetric config: bidder j's CDF is
// mean + pattern_j*eps*v(1-v)(1/2-v) with a zero-sum +-1 pattern.
DynAuctionConfig perturb_config(const DynAuctionConfig& base, double eps);

struct DynPerturbationRow {
    double eps = 0.0;
    double flow_gap = 0.0;  // |flow revenue(eps) - flow revenue(0)|
    double sim_gap = 0.0;   // matched-seed simulated gap
    double sim_ci = 0.0;
    bool valid = false;
    std::string note;
};

struct DynPerturbationResult {
    std::vector<DynPerturbationRow> rows;
    double base_flow = 0.0;
    double flow_slope = 0.0;
    double sim_slope = 0.0;
};

DynPerturbationResult revenue_bound_experiment(const DynAuctionConfig& base,
                                               const std::vector<double>& eps_list,
                                               int episodes, std::uint64_t seed);

struct ScalingRow {
    int n = 0;
    double eps = 0.0;       // delta0 / n^alpha
    double flow_gap = 0.0;
};

// Heterogeneity shrinking with the player count: eps(n) = delta0/n^alpha, so
// the revenue gap should track 1/n^(2*alpha).
std::vector<ScalingRow> scaling_experiment(const std::vector<int>& ns, double delta0,
                                           double alpha, int horizon);

}  // namespace mf
