#include "mf/games.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mf {

namespace {

constexpr double kImprovementTol = 1e-9;  // gains below this do not count

NashReport scan_unilateral(const std::function<double(int, const Profile&)>& payoff_of,
                           double a_low, double a_high, const Profile& profile,
                           int grid_points) {
    if (grid_points < 2) throw std::invalid_argument("verify_nash: grid_points >= 2");
    NashReport rep;
    rep.pass = true;
    Profile work = profile;
    for (std::size_t j = 0; j < profile.size(); ++j) {
        const double base = payoff_of(static_cast<int>(j), profile);
        for (int g = 0; g < grid_points; ++g) {
            const double a = a_low + (a_high - a_low) * g / (grid_points - 1);
            work[j] = a;
            const double dev = payoff_of(static_cast<int>(j), work);
            const double gain = dev - base;
            if (gain > kImprovementTol && gain > rep.best_improvement) {
                rep.best_improvement = gain;
                rep.player = static_cast<int>(j);
                rep.deviation = a;
                rep.pass = false;
            }
        }
        work[j] = profile[j];
    }
    return rep;
}

}  // namespace

NashReport verify_nash(const PayoffSpec& p, const Profile& profile, int grid_points) {
    if (static_cast<int>(profile.size()) != p.n)
        throw std::invalid_argument("verify_nash: profile size != n");
    // Indistinguishable game: every player shares the same payoff map.
    return scan_unilateral([&](int, const Profile& a) { return p.evaluate(a); }, p.a_low,
                           p.a_high, profile, grid_points);
}

NashReport verify_nash(const std::vector<std::function<double(const Profile&)>>& payoffs,
                       double a_low, double a_high, const Profile& profile,
                       int grid_points) {
    if (payoffs.size() != profile.size())
        throw std::invalid_argument("verify_nash: payoffs/profile size mismatch");
    return scan_unilateral([&](int j, const Profile& a) { return payoffs[static_cast<std::size_t>(j)](a); },
                           a_low, a_high, profile, grid_points);
}

NashReport verify_strong_nash(const PayoffSpec& p, const Profile& profile, int grid_points) {
    if (static_cast<int>(profile.size()) != p.n)
        throw std::invalid_argument("verify_strong_nash: profile size != n");
    if (p.n > 4) throw std::invalid_argument("verify_strong_nash: brute force limited to n <= 4");
    if (grid_points < 2) throw std::invalid_argument("verify_strong_nash: grid_points >= 2");

    const int n = p.n;
    const double base = p.evaluate(profile);
    NashReport rep;
    rep.pass = true;

    std::vector<std::size_t> members;
    Profile work = profile;
    for (int mask = 1; mask < (1 << n); ++mask) {
        members.clear();
        for (int j = 0; j < n; ++j)
            if (mask & (1 << j)) members.push_back(static_cast<std::size_t>(j));
        const std::size_t k = members.size();
        // Odometer over the coalition's joint grid deviations.
        std::vector<int> idx(k, 0);
        while (true) {
            for (std::size_t i = 0; i < k; ++i)
                work[members[i]] =
                    p.a_low + (p.a_high - p.a_low) * idx[i] / (grid_points - 1);
            // In an indistinguishable game every member earns the same value.
            const double dev = p.evaluate(work);
            const double gain = dev - base;
            if (gain > kImprovementTol && gain > rep.best_improvement) {
                rep.best_improvement = gain;
                rep.player = static_cast<int>(members.front());
                rep.deviation = work[members.front()];
                rep.pass = false;
            }
            std::size_t pos = 0;
            while (pos < k && ++idx[pos] == grid_points) idx[pos++] = 0;
            if (pos == k) break;
        }
        for (std::size_t i = 0; i < k; ++i) work[members[i]] = profile[members[i]];
    }
    return rep;
}

EssReport verify_ess(const PayoffSpec& p, double a_star, int invader_grid, int epsilon_grid,
                     double eps_max) {
    if (a_star < p.a_low || a_star > p.a_high)
        throw std::domain_error("verify_ess: candidate outside bounds");
    if (invader_grid < 2 || epsilon_grid < 1)
        throw std::invalid_argument("verify_ess: need invader_grid >= 2, epsilon_grid >= 1");

    const int n = p.n;
    const int m = n - 1;

    // Expected payoff of a focal action x against n-1 opponents drawn iid from
    // (1-eps) delta_{a*} + eps delta_a. Indistinguishability lets us group the
    // opponent draws by invader count.
    const auto mixed = [&](double x, double a, double eps) {
        double total = 0.0;
        double comb = 1.0;  // C(m, k), updated incrementally
        for (int k = 0; k <= m; ++k) {
            if (k > 0) comb = comb * (m - k + 1) / k;
            Profile prof(static_cast<std::size_t>(n), a_star);
            prof[0] = x;
            for (int i = 0; i < k; ++i) prof[static_cast<std::size_t>(i) + 1] = a;
            total += comb * std::pow(eps, k) * std::pow(1.0 - eps, m - k) * p.evaluate(prof);
        }
        return total;
    };

    EssReport rep;
    rep.pass = true;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (int gi = 0; gi < invader_grid; ++gi) {
        const double a = p.a_low + (p.a_high - p.a_low) * gi / (invader_grid - 1);
        if (std::abs(a - a_star) < 1e-12) continue;  // degenerate invader excluded
        // a* survives this invader if the incumbent strictly out-earns it for
        // at least one tested invasion share.
        double best_margin = -std::numeric_limits<double>::infinity();
        for (int ge = 1; ge <= epsilon_grid; ++ge) {
            const double eps = eps_max * ge / epsilon_grid;
            const double margin = mixed(a_star, a, eps) - mixed(a, a, eps);
            best_margin = std::max(best_margin, margin);
        }
        if (best_margin <= kImprovementTol) {
            rep.pass = false;
            if (best_margin < rep.worst_margin) {
                rep.worst_margin = best_margin;
                rep.worst_invader = a;
            }
        }
    }
    if (rep.pass) rep.worst_margin = 0.0;
    return rep;
}

}  // namespace mf
