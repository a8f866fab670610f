#include "mf/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mf/rng.hpp"

namespace mf {

namespace {

void require_valid(const PayoffSpec& p) {
    if (p.n < 2) throw std::domain_error("PayoffSpec: need n >= 2 (the bound divides by n-1)");
    if (!p.evaluate) throw std::invalid_argument("PayoffSpec: missing evaluator");
    if (!(p.a_low < p.a_high)) throw std::invalid_argument("PayoffSpec: empty action interval");
}

void require_in_bounds(const PayoffSpec& p, double m) {
    if (m < p.a_low || m > p.a_high)
        throw std::domain_error("action outside [a_low, a_high]");
}

double eval_checked(const PayoffSpec& p, const Profile& a) {
    const double r = p.evaluate(a);
    if (!std::isfinite(r)) throw std::domain_error("payoff evaluated to a non-finite value");
    return r;
}

}  // namespace

ActionProfile ActionProfile::from_actions(Profile a) {
    if (a.empty()) throw std::invalid_argument("ActionProfile: empty profile");
    ActionProfile out;
    out.actions = std::move(a);
    double s = 0.0;
    for (double x : out.actions) s += x;
    out.mean = s / static_cast<double>(out.actions.size());
    for (double x : out.actions) {
        const double d = x - out.mean;
        out.deviation_sq += d * d;
        out.epsilon = std::max(out.epsilon, std::abs(d));
    }
    return out;
}

TrajectoryProfile TrajectoryProfile::from_actions(std::vector<Profile> a) {
    if (a.empty()) throw std::invalid_argument("TrajectoryProfile: empty horizon");
    TrajectoryProfile out;
    out.actions = std::move(a);
    const std::size_t n = out.actions.front().size();
    for (const Profile& at : out.actions) {
        if (at.size() != n)
            throw std::invalid_argument("TrajectoryProfile: ragged profiles");
        const ActionProfile ap = ActionProfile::from_actions(at);
        out.means.push_back(ap.mean);
        out.l2_deviation += ap.deviation_sq;
    }
    return out;
}

double default_fd_step(double m) { return std::max(1e-5, 1e-5 * std::abs(m)); }

IndistinguishabilityReport check_indistinguishable(const PayoffSpec& p, int samples,
                                                   std::uint64_t seed) {
    require_valid(p);
    if (samples < 1) throw std::invalid_argument("check_indistinguishable: samples >= 1");
    IndistinguishabilityReport rep;
    rep.samples = samples;
    rep.seed = seed;
    std::mt19937_64 g = substream(seed, 0);
    const std::size_t n = static_cast<std::size_t>(p.n);
    Profile a(n);
    for (int s = 0; s < samples; ++s) {
        for (double& x : a) x = p.a_low + (p.a_high - p.a_low) * uniform01(g);
        double base;
        try {
            base = eval_checked(p, a);
        } catch (const std::domain_error&) {
            rep.pass = false;
            rep.max_violation = std::numeric_limits<double>::infinity();
            rep.worst_profile = a;
            return rep;
        }
        // Adjacent transpositions generate the whole symmetric group, so
        // checking them suffices for full permutation invariance.
        for (std::size_t i = 0; i + 1 < n; ++i) {
            std::swap(a[i], a[i + 1]);
            const double swapped = eval_checked(p, a);
            std::swap(a[i], a[i + 1]);
            const double scale = std::max({1.0, std::abs(base), std::abs(swapped)});
            const double viol = std::abs(swapped - base) / scale;
            if (viol > rep.max_violation) {
                rep.max_violation = viol;
                rep.worst_profile = a;
            }
        }
    }
    rep.pass = rep.max_violation <= 1e-9;
    return rep;
}

double symmetric_reduce(const PayoffSpec& p, double m) {
    require_valid(p);
    require_in_bounds(p, m);
    if (p.analytic_reduction) return p.analytic_reduction(m);
    return eval_checked(p, Profile(static_cast<std::size_t>(p.n), m));
}

std::pair<double, double> second_derivatives(const PayoffSpec& p, double m, double h) {
    require_valid(p);
    if (h <= 0.0) h = default_fd_step(m);
    require_in_bounds(p, m - h);
    require_in_bounds(p, m + h);

    double rbar_second;
    if (p.analytic_reduction) {
        const auto& rbar = p.analytic_reduction;
        rbar_second = (rbar(m + h) - 2 * rbar(m) + rbar(m - h)) / (h * h);
    } else {
        // r(m^n + eps*1) = rbar(m + eps): the diagonal direction probes rbar.
        const double c = symmetric_reduce(p, m);
        const double pl = eval_checked(p, Profile(static_cast<std::size_t>(p.n), m + h));
        const double mi = eval_checked(p, Profile(static_cast<std::size_t>(p.n), m - h));
        rbar_second = (pl - 2 * c + mi) / (h * h);
    }

    double d2_own;
    if (p.analytic_d2) {
        d2_own = p.analytic_d2(m);
    } else {
        Profile a(static_cast<std::size_t>(p.n), m);
        const double c = eval_checked(p, a);
        a[0] = m + h;
        const double pl = eval_checked(p, a);
        a[0] = m - h;
        const double mi = eval_checked(p, a);
        d2_own = (pl - 2 * c + mi) / (h * h);
    }

    if (!std::isfinite(rbar_second) || !std::isfinite(d2_own))
        throw std::domain_error("second_derivatives: step too small, differences cancelled");
    return {rbar_second, d2_own};
}

ErrorBoundReport error_bound_static(const PayoffSpec& p, const ActionProfile& a, double h) {
    require_valid(p);
    if (static_cast<int>(a.actions.size()) != p.n)
        throw std::invalid_argument("error_bound_static: profile size != n");
    for (double x : a.actions) require_in_bounds(p, x);

    const auto [rbar2, d2own] = second_derivatives(p, a.mean, h);
    const double n = static_cast<double>(p.n);
    ErrorBoundReport rep;
    rep.rbar_second = rbar2;
    rep.d2_own = d2own;
    rep.delta = std::abs(n / (2 * (n - 1)) * (-rbar2 / (n * n) + d2own));
    rep.bound = rep.delta * a.deviation_sq;
    rep.gap = std::abs(eval_checked(p, a.actions) - symmetric_reduce(p, a.mean));
    rep.n = p.n;
    rep.epsilon = a.epsilon;
    return rep;
}

DynamicBoundReport error_bound_dynamic(const PayoffSpec& p, const TrajectoryProfile& traj,
                                       double h) {
    require_valid(p);
    if (traj.actions.empty()) throw std::invalid_argument("error_bound_dynamic: empty horizon");
    DynamicBoundReport rep;
    rep.horizon = static_cast<int>(traj.actions.size());
    rep.l2_deviation = traj.l2_deviation;
    double sum_r = 0.0, sum_rbar = 0.0;
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
        const ActionProfile at = ActionProfile::from_actions(traj.actions[t]);
        const ErrorBoundReport st = error_bound_static(p, at, h);
        rep.delta_sup = std::max(rep.delta_sup, st.delta);
        sum_r += eval_checked(p, traj.actions[t]);
        sum_rbar += symmetric_reduce(p, traj.means[t]);
    }
    rep.bound = rep.delta_sup * rep.l2_deviation;
    rep.gap = std::abs(sum_r - sum_rbar);
    return rep;
}

NearIndistinguishabilityReport near_indistinguishability_gap(
    const std::vector<std::function<double(const Profile&)>>& payoffs,
    const PayoffSpec& reference, int samples, std::uint64_t seed) {
    require_valid(reference);
    if (payoffs.empty()) throw std::invalid_argument("near_indistinguishability_gap: no payoffs");
    if (samples < 1) throw std::invalid_argument("near_indistinguishability_gap: samples >= 1");
    NearIndistinguishabilityReport rep;
    rep.samples = samples;
    rep.seed = seed;
    std::mt19937_64 g = substream(seed, 0);
    Profile a(static_cast<std::size_t>(reference.n));
    for (int s = 0; s < samples; ++s) {
        for (double& x : a)
            x = reference.a_low + (reference.a_high - reference.a_low) * uniform01(g);
        const double rg = eval_checked(reference, a);
        for (const auto& rj : payoffs) {
            const double diff = std::abs(rj(a) - rg);
            rep.eps_nonscalable = std::max(rep.eps_nonscalable, diff);
            if (std::abs(rg) < 1e-12) {
                ++rep.scalable_skipped;
            } else {
                rep.eps_scalable = std::max(rep.eps_scalable, diff / std::abs(rg));
            }
        }
    }
    return rep;
}

}  // namespace mf
