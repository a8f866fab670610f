#include "doctest.h"

#include <cmath>
#include <random>

#include "mf/approx.hpp"
#include "mf/rng.hpp"
#include "oracles.hpp"

using namespace mf;

namespace {

// Symmetric quadratic r(a) = c0 + c1*sum a + c2*sum a^2 + c3*sum_{i<j} a_i a_j:
// the second-order bound is exactly tight on this family.
PayoffSpec quadratic_spec(int n, double c0, double c1, double c2, double c3) {
    PayoffSpec p;
    p.n = n;
    p.a_low = -4.0;  // wide enough that large finite-difference probes stay inside
    p.a_high = 4.0;
    p.evaluate = [=](const Profile& a) {
        double s = 0.0, sq = 0.0, cross = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += a[i];
            sq += a[i] * a[i];
            for (std::size_t j = i + 1; j < a.size(); ++j) cross += a[i] * a[j];
        }
        return c0 + c1 * s + c2 * sq + c3 * cross;
    };
    return p;
}

PayoffSpec product_spec(int n) {
    PayoffSpec p;
    p.n = n;
    p.a_low = 0.0;
    p.a_high = 2.0;
    p.evaluate = [](const Profile& a) {
        double prod = 1.0;
        for (double x : a) prod *= x;
        return prod;
    };
    return p;
}

}  // namespace

TEST_CASE("profile statistics") {
    auto a = ActionProfile::from_actions({1.0, 2.0, 3.0});
    CHECK(a.mean == doctest::Approx(2.0));
    CHECK(a.deviation_sq == doctest::Approx(2.0));
    CHECK(a.epsilon == doctest::Approx(1.0));

    auto traj = TrajectoryProfile::from_actions({{1.0, 3.0}, {2.0, 2.0}});
    CHECK(traj.means[0] == doctest::Approx(2.0));
    CHECK(traj.means[1] == doctest::Approx(2.0));
    CHECK(traj.l2_deviation == doctest::Approx(2.0));
}

TEST_CASE("finite-difference curvature matches an independent stencil") {
    PayoffSpec p;
    p.n = 3;
    p.a_low = 0.0;
    p.a_high = 1.0;
    p.evaluate = [](const Profile& a) {
        double sq = 0.0;
        for (double x : a) sq += x * x;
        return std::exp(sq / static_cast<double>(a.size()));
    };
    const double m = 0.4;
    auto [rbar2, d2own] = second_derivatives(p, m);

    const oracle::Fn f = p.evaluate;
    const double d2_oracle = oracle::partial2(f, {m, m, m}, 0, 0, 1e-4);
    CHECK(d2own == doctest::Approx(d2_oracle).epsilon(1e-5));

    // rbar(m) = exp(m^2): rbar'' = (2 + 4 m^2) exp(m^2)
    const double rbar2_exact = (2.0 + 4.0 * m * m) * std::exp(m * m);
    CHECK(rbar2 == doctest::Approx(rbar2_exact).epsilon(1e-5));
}

TEST_CASE("bound is exactly tight on symmetric quadratics") {
    std::mt19937_64 g = substream(20240901ull, 7);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + static_cast<int>(g() % 7);
        const double c0 = 2.0 * uniform01(g) - 1.0;
        const double c1 = 2.0 * uniform01(g) - 1.0;
        const double c2 = 2.0 * uniform01(g) - 1.0;
        const double c3 = 2.0 * uniform01(g) - 1.0;
        auto p = quadratic_spec(n, c0, c1, c2, c3);
        Profile a(static_cast<std::size_t>(n));
        for (double& x : a) x = 2.0 * uniform01(g) - 1.0;
        // central differences are algebraically exact on quadratics at any
        // step, so a large step leaves no roundoff amplification
        const auto rep = error_bound_static(p, ActionProfile::from_actions(a), 0.5);
        CHECK(std::abs(rep.gap - rep.bound) <= 1e-9);
    }
}

TEST_CASE("worked product example: n=2, a=(1, (1-e)^2)") {
    for (double eps : {0.1, 0.01}) {
        auto p = product_spec(2);
        const double a2 = (1.0 - eps) * (1.0 - eps);
        const auto rep =
            error_bound_static(p, ActionProfile::from_actions({1.0, a2}), 0.5);
        const double expected_gap = eps * eps * eps * eps / 4.0 + (1.0 - eps) * eps * eps;
        CHECK(rep.gap == doctest::Approx(expected_gap).epsilon(1e-12));
        CHECK(rep.bound <= eps * eps);
        CHECK(rep.gap == doctest::Approx(rep.bound).epsilon(1e-10));
    }
}

TEST_CASE("gap scales as epsilon^2 for smooth payoffs") {
    PayoffSpec exp_spec;
    exp_spec.n = 3;
    exp_spec.a_low = 0.0;
    exp_spec.a_high = 1.0;
    exp_spec.evaluate = [](const Profile& a) {
        double sq = 0.0;
        for (double x : a) sq += x * x;
        return std::exp(sq / static_cast<double>(a.size()));
    };
    for (const auto& p : {exp_spec, product_spec(3)}) {
        std::vector<double> epss, gaps;
        for (double eps = 1e-3; eps < 1.1e-1; eps *= std::sqrt(10.0)) {
            const Profile a = {0.5 + eps, 0.5 - eps, 0.5};
            const auto rep = error_bound_static(p, ActionProfile::from_actions(a));
            epss.push_back(eps);
            gaps.push_back(rep.gap);
        }
        CHECK(oracle::loglog_slope(epss, gaps) == doctest::Approx(2.0).epsilon(0.05));
        // the bound coefficient is the exact second-order term, so gap/bound -> 1
        const Profile tiny = {0.5 + 1e-4, 0.5 - 1e-4, 0.5};
        const auto rep = error_bound_static(p, ActionProfile::from_actions(tiny));
        CHECK(rep.gap / rep.bound == doctest::Approx(1.0).epsilon(2e-3));
    }
}

TEST_CASE("dynamic bound sums periods and sups the coefficient") {
    auto p = product_spec(2);
    const auto traj = TrajectoryProfile::from_actions({{0.8, 1.0}, {1.1, 0.9}, {1.0, 1.0}});
    const auto rep = error_bound_dynamic(p, traj, 0.5);
    CHECK(rep.horizon == 3);
    CHECK(rep.l2_deviation == doctest::Approx(0.02 + 0.02));
    double signed_sum = 0.0;
    for (const auto& a : traj.actions) {
        const double m = (a[0] + a[1]) / 2.0;
        signed_sum += p.evaluate(a) - symmetric_reduce(p, m);
    }
    CHECK(rep.gap == doctest::Approx(std::abs(signed_sum)).epsilon(1e-12));
    CHECK(rep.gap <= rep.bound + 1e-12);
}

TEST_CASE("indistinguishability detector") {
    auto good = product_spec(3);
    const auto ok = check_indistinguishable(good, 200, 99);
    CHECK(ok.pass);
    CHECK(ok.max_violation <= 1e-9);

    PayoffSpec biased = product_spec(3);
    biased.evaluate = [](const Profile& a) { return a[0] * 2.0 + a[1] + a[2]; };
    const auto bad = check_indistinguishable(biased, 200, 99);
    CHECK_FALSE(bad.pass);
    CHECK(bad.worst_profile.size() == 3);
}

TEST_CASE("near-indistinguishability gap for perturbed payoff families") {
    auto ref = product_spec(2);
    const double eta = 1e-3;
    std::vector<std::function<double(const Profile&)>> payoffs = {
        [=](const Profile& a) { return a[0] * a[1] + eta * a[0]; },
        [=](const Profile& a) { return a[0] * a[1] - eta * a[1]; },
    };
    const auto rep = near_indistinguishability_gap(payoffs, ref, 400, 1234);
    CHECK(rep.eps_nonscalable <= 2.0 * eta + 1e-12);
    CHECK(rep.eps_nonscalable >= 0.25 * eta);
    CHECK(rep.samples == 400);
}
