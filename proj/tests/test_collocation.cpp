#include "doctest.h"

#include <cmath>

#include "mf/collocation.hpp"
#include "mf/shooting.hpp"

using namespace mf;

namespace {

double sup_gap_to_line(const InverseBidSolution& sol, int j, double slope) {
    double worst = 0.0;
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        const double v = sol.curves[static_cast<std::size_t>(j)][i];
        worst = std::max(worst, std::abs(v - slope * sol.grid[i]));
    }
    return worst;
}

}  // namespace

TEST_CASE("objective vanishes at the exact uniform coefficients") {
    auto vm = ValuationModel::make({make_uniform_cdf(), make_uniform_cdf()});
    CollocationConfig cfg;
    cfg.K = 1;
    // v_j(b) = 2b written in the basis bbar - sum mu_k (bbar - b)^k:
    // bbar = 0.5, mu_0 = -0.5, mu_1 = 2 for both bidders.
    const std::vector<double> exact = {0.5, -0.5, 2.0, -0.5, 2.0};
    CHECK(collocation_objective(vm, cfg, exact) < 1e-12);

    // any perturbation of the coefficients must cost something
    std::vector<double> off = exact;
    off[2] += 1e-3;
    CHECK(collocation_objective(vm, cfg, off) > 1e-8);
}

TEST_CASE("uniform pair solves to the linear inverse bid") {
    auto vm = ValuationModel::make({make_uniform_cdf(), make_uniform_cdf()});
    const auto sol = solve_collocation(vm);
    CHECK(sol.converged);
    CHECK(sol.method == "collocation");
    CHECK(sol.b_high == doctest::Approx(0.5).epsilon(2e-3));
    CHECK(sup_gap_to_line(sol, 0, 2.0) < 1e-3);
    CHECK(sup_gap_to_line(sol, 1, 2.0) < 1e-3);
    CHECK(sol.boundary_defect < 1e-3);
}

TEST_CASE("symmetric quadratic power model") {
    auto vm = ValuationModel::make({make_power_cdf(2.0), make_power_cdf(2.0)});
    const auto sol = solve_collocation(vm);
    CHECK(sol.converged);
    CHECK(sol.b_high == doctest::Approx(2.0 / 3.0).epsilon(2e-3));
    CHECK(sup_gap_to_line(sol, 0, 1.5) < 2e-3);
}

TEST_CASE("default seed comes from the mean-cdf symmetric closed form") {
    auto vm = ValuationModel::make({make_power_cdf(7.0), make_power_cdf(8.0)});
    CollocationConfig cfg;
    const auto seed = collocation_seed(vm, cfg);
    REQUIRE(seed.size() == 1 + 2 * static_cast<std::size_t>(cfg.K + 1));
    // the top bid of the seed sits between the two symmetric one-family tops
    CHECK(seed[0] > 7.0 / 8.0 * 0.9);
    CHECK(seed[0] < 1.0);
    // the seed already satisfies the boundary pins approximately, so the
    // objective starts finite and small-ish
    CHECK(collocation_objective(vm, cfg, seed) < 10.0);
}

TEST_CASE("power pair agrees with the shooting route") {
    auto vm = ValuationModel::make({make_power_cdf(7.0), make_power_cdf(8.0)});
    const auto col = solve_collocation(vm);
    const auto sh = solve_shooting(vm);
    CHECK(col.converged);
    CHECK(col.boundary_defect < 1e-3);
    CHECK(sh.converged);

    // weak bidder shades less: v_2 >= v_1 on the interior
    for (std::size_t i = 1; i + 1 < col.grid.size(); ++i)
        CHECK(col.curves[1][i] >= col.curves[0][i] - 1e-6);

    const double btop = std::min(col.b_high, sh.b_high);
    double sup = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double b = btop * i / 200.0;
        for (int j = 0; j < 2; ++j)
            sup = std::max(sup, std::abs(col.value_at(j, b) - sh.value_at(j, b)));
    }
    CHECK(sup < 5e-3);
}

TEST_CASE("perturbed cubic pair converges") {
    auto vm = ValuationModel::make(
        {make_perturbed_cubic_cdf(0.4, +1), make_perturbed_cubic_cdf(0.4, -1)});
    const auto sol = solve_collocation(vm);
    CHECK(sol.converged);
    CHECK(sol.boundary_defect < 1e-3);
    CHECK(sol.b_high > 0.3);
    CHECK(sol.b_high < 0.7);
    for (int j = 0; j < 2; ++j)
        for (std::size_t i = 1; i < sol.grid.size(); ++i)
            CHECK(sol.curves[static_cast<std::size_t>(j)][i] >=
                  sol.curves[static_cast<std::size_t>(j)][i - 1] - 1e-9);
}
