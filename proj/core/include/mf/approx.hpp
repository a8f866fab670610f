#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

// Indistinguishable-payoff machinery: symmetric reduction, finite-difference
// curvature, and the exact second-order error bound
//   delta = | n/(2(n-1)) * ( -rbar''(m)/n^2 + d2_own ) |,
//   |r(a) - rbar(mean)| <= delta * sum_j (a_j - mean)^2,
// valid for every n >= 2 (no large-n limit involved).

namespace mf {

using Profile = std::vector<double>;

struct PayoffSpec {
    int n = 2;                                     // player count, >= 2
    std::function<double(const Profile&)> evaluate;  // r(a), a.size() == n
    double a_low = 0.0;
    double a_high = 1.0;
    // Optional analytic channels; finite differences are used when absent.
    std::function<double(double)> analytic_reduction;  // m -> rbar(m)
    std::function<double(double)> analytic_d2;         // m -> d^2 r / d a_1^2 at (m,...,m)
};

struct ActionProfile {
    Profile actions;
    double mean = 0.0;
    double deviation_sq = 0.0;  // sum_j (a_j - mean)^2
    double epsilon = 0.0;       // max_j |a_j - mean|

    static ActionProfile from_actions(Profile a);
};

struct TrajectoryProfile {
    std::vector<Profile> actions;  // [t][j]
    std::vector<double> means;     // per-period mean
    double l2_deviation = 0.0;     // sum_t sum_j (a_{j,t} - mean_t)^2

    static TrajectoryProfile from_actions(std::vector<Profile> a);
};

struct ErrorBoundReport {
    double delta = 0.0;        // bound coefficient
    double bound = 0.0;        // delta * deviation_sq
    double gap = 0.0;          // |r(a) - rbar(mean)|
    double rbar_second = 0.0;  // rbar''(mean)
    double d2_own = 0.0;       // d^2 r / d a_1^2 at the symmetric point
    int n = 0;
    double epsilon = 0.0;
};

struct DynamicBoundReport {
    double delta_sup = 0.0;  // sup_t delta_{mean_t}
    double bound = 0.0;      // delta_sup * l2_deviation
    double gap = 0.0;        // |sum_t r(a_t) - sum_t rbar(mean_t)|
    double l2_deviation = 0.0;
    int horizon = 0;
};

struct IndistinguishabilityReport {
    bool pass = false;
    double max_violation = 0.0;  // max relative discrepancy over transpositions
    Profile worst_profile;       // profile achieving it (or a non-finite evaluation)
    int samples = 0;
    std::uint64_t seed = 0;
};

struct NearIndistinguishabilityReport {
    double eps_nonscalable = 0.0;  // sup |r_j - r|
    double eps_scalable = 0.0;     // sup |r_j - r| / |r|
    int scalable_skipped = 0;      // points with |r| < 1e-12, skipped in the ratio
    int samples = 0;
    std::uint64_t seed = 0;
};

// Default finite-difference step for second derivatives: max(1e-5, 1e-5*|m|).
double default_fd_step(double m);

// Samples uniform profiles and tests every adjacent transposition; pass iff
// max relative discrepancy <= 1e-9. Non-finite evaluations fail with the
// offending profile reported.
IndistinguishabilityReport check_indistinguishable(const PayoffSpec& p, int samples,
                                                   std::uint64_t seed);

// rbar(m) = r(m,...,m), or the analytic reduction when supplied.
double symmetric_reduce(const PayoffSpec& p, double m);

// (rbar''(m), d2_own) by central differences with step h (h <= 0 picks the
// default). Analytic channels take precedence.
std::pair<double, double> second_derivatives(const PayoffSpec& p, double m, double h = 0.0);

ErrorBoundReport error_bound_static(const PayoffSpec& p, const ActionProfile& a,
                                    double h = 0.0);

// delta_sup = sup_t delta at the per-period means; bound covers the summed
// trajectory payoff.
DynamicBoundReport error_bound_dynamic(const PayoffSpec& p, const TrajectoryProfile& traj,
                                       double h = 0.0);

// Monte-Carlo estimate of how far per-player payoffs stray from a common
// reference, in both the absolute and the multiplicative sense.
NearIndistinguishabilityReport near_indistinguishability_gap(
    const std::vector<std::function<double(const Profile&)>>& payoffs,
    const PayoffSpec& reference, int samples, std::uint64_t seed);

}  // namespace mf
