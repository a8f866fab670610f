#include "doctest.h"

#include <cmath>
#include <vector>

#include "mf/dyn_auction.hpp"
#include "oracles.hpp"

using namespace mf;

namespace {

// Opponent-bid CDF regenerated from a committed policy row: invert the
// monotone bid curve on the value grid, then push the value CDF through it.
double regenerated_bid_cdf(const std::vector<double>& values, const std::vector<double>& bids,
                           const Cdf& F, double b) {
    if (b < bids.front()) return 0.0;
    if (b >= bids.back()) return 1.0;
    std::size_t i = 0;
    while (i + 1 < bids.size() && bids[i + 1] <= b) ++i;
    double vstar = values[i];
    if (bids[i + 1] > bids[i])
        vstar += (values[i + 1] - values[i]) * (b - bids[i]) / (bids[i + 1] - bids[i]);
    return F.cdf(vstar);
}

}  // namespace

TEST_CASE("piecewise linear bid cdfs evaluate, sample, and integrate") {
    const PiecewiseLinearCdf uni({0.0, 0.5, 1.0}, {0.0, 0.5, 1.0});
    CHECK(uni(0.25) == doctest::Approx(0.25));
    CHECK(uni(-1.0) == doctest::Approx(0.0));
    CHECK(uni(2.0) == doctest::Approx(1.0));
    CHECK(uni.atom_at_origin() == doctest::Approx(0.0));
    CHECK(uni.sample(0.3) == doctest::Approx(0.3).epsilon(1e-12));

    // atom of 0.3 at the origin, then uniform density 0.7 (same knot grid)
    const PiecewiseLinearCdf atom({0.0, 0.5, 1.0}, {0.3, 0.65, 1.0});
    CHECK(atom(0.0) == doctest::Approx(0.3));
    CHECK(atom.atom_at_origin() == doctest::Approx(0.3));
    CHECK(atom.sample(0.15) == doctest::Approx(0.0));
    CHECK(atom.sample(0.65) == doctest::Approx(0.5).epsilon(1e-12));

    // E max of independent uniforms: n/(n+1)
    CHECK(expected_max({uni}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(expected_max({uni, uni}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(expected_max({uni, uni, uni}) == doctest::Approx(0.75).epsilon(1e-12));
    // with the atom: int_0^1 1 - t*(0.3 + 0.7 t) dt = 1 - 0.15 - 7/30
    CHECK(expected_max({uni, atom}) == doctest::Approx(1.0 - 0.15 - 7.0 / 30.0).epsilon(1e-12));
}

TEST_CASE("feasibility caps follow the cost function") {
    DynAuctionConfig cfg = DynAuctionConfig::uniform_symmetric(2, 1);
    CHECK(cfg.feasible_cap(0.0) == doctest::Approx(0.0));
    CHECK(cfg.feasible_cap(0.4) == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(cfg.feasible_cap(3.0) == doctest::Approx(cfg.bid_max));

    cfg.cost = [](double, double b) { return 2.0 * b; };
    CHECK(cfg.feasible_cap(0.5) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(cfg.feasible_cap(4.0) == doctest::Approx(cfg.bid_max));
}

TEST_CASE("single period with slack budgets reproduces the static auction") {
    const auto cfg = DynAuctionConfig::uniform_symmetric(2, 1);
    const auto table = value_iteration(cfg);
    REQUIRE(table.fixed_point_converged);

    // terminal row is exactly the (zero) terminal payoff
    for (double v : table.V[0].back()) CHECK(v == 0.0);

    const double step = (cfg.s_max) / (cfg.budget_points - 1);
    CHECK(table.value0(0, cfg.initial_budget) == doctest::Approx(1.0 / 6.0).epsilon(2.0 * step));
    CHECK(std::abs(table.value0(0, cfg.initial_budget) - 1.0 / 6.0) < 1e-4);
    CHECK(expected_revenue_flow(cfg, table) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

    // equilibrium policy is b = v/2 wherever the cap is slack
    for (double v : {0.1, 0.3, 0.5, 0.8, 1.0})
        CHECK(table.policy_bid(0, 0, v, cfg.initial_budget) == doctest::Approx(v / 2.0).epsilon(2e-3));

    // beliefs regenerate from the committed policy (sup-norm consistency)
    const auto& belief = table.beliefs[0][1];
    const int M = cfg.value_nodes;
    std::vector<double> vg(static_cast<std::size_t>(M)), bids(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        vg[static_cast<std::size_t>(i)] = static_cast<double>(i) / (M - 1);
        bids[static_cast<std::size_t>(i)] =
            table.policy_bid(1, 0, vg[static_cast<std::size_t>(i)], cfg.initial_budget);
    }
    double sup = 0.0;
    for (std::size_t k = 0; k < belief.knots().size(); ++k) {
        const double b = belief.knots()[k];
        sup = std::max(sup, std::abs(belief.values()[k] -
                                     regenerated_bid_cdf(vg, bids, cfg.value_cdf(0, 1), b)));
    }
    CHECK(sup < 1e-5);

    // and matches the closed form G(b) = min(2b, 1) at solver accuracy
    CHECK(belief(0.2) == doctest::Approx(0.4).epsilon(5e-3));
    CHECK(belief(0.45) == doctest::Approx(0.9).epsilon(5e-3));
}

TEST_CASE("values grow with budget and horizon") {
    const auto cfg1 = DynAuctionConfig::uniform_symmetric(2, 1);
    const auto cfg3 = DynAuctionConfig::uniform_symmetric(2, 3);
    const auto t1 = value_iteration(cfg1);
    const auto t3 = value_iteration(cfg3);
    REQUIRE(t3.fixed_point_converged);

    for (int j = 0; j < 2; ++j)
        for (std::size_t t = 0; t < t3.V[static_cast<std::size_t>(j)].size(); ++t) {
            const auto& row = t3.V[static_cast<std::size_t>(j)][t];
            for (std::size_t s = 1; s < row.size(); ++s) CHECK(row[s] >= row[s - 1] - 1e-12);
        }

    const double v1 = t1.value0(0, cfg1.initial_budget);
    const double v3 = t3.value0(0, cfg3.initial_budget);
    CHECK(v3 >= v1 - 1e-9);
    // slack budgets decouple the periods: three copies of the static game
    CHECK(v3 == doctest::Approx(3.0 * (1.0 / 6.0)).epsilon(5e-4));
    CHECK(expected_revenue_flow(cfg3, t3) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("binding budgets stay feasible and depress revenue") {
    auto cfg = DynAuctionConfig::uniform_symmetric(2, 2);
    cfg.initial_budget = 0.3;
    const auto table = value_iteration(cfg);

    if (!table.fixed_point_converged) CHECK(table.fixed_point_residual >= cfg.fp_tol);

    // every tabulated bid respects the cap at its own budget level
    for (int j = 0; j < 2; ++j)
        for (int t = 0; t < 2; ++t)
            for (std::size_t s = 0; s < table.budget_grid.size(); ++s) {
                const double cap = cfg.feasible_cap(table.budget_grid[s]);
                const auto& row =
                    table.policy[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)][s];
                for (double b : row) CHECK(b <= cap + 1e-9);
            }

    // value rows stay monotone in budget under the committed beliefs
    for (int j = 0; j < 2; ++j)
        for (std::size_t t = 0; t < table.V[static_cast<std::size_t>(j)].size(); ++t) {
            const auto& row = table.V[static_cast<std::size_t>(j)][t];
            for (std::size_t s = 1; s < row.size(); ++s) CHECK(row[s] >= row[s - 1] - 1e-12);
        }

    // capped bids cannot sustain the unconstrained revenue flow
    const auto slack_cfg = DynAuctionConfig::uniform_symmetric(2, 2);
    const auto slack = value_iteration(slack_cfg);
    CHECK(expected_revenue_flow(cfg, table) < expected_revenue_flow(slack_cfg, slack));
}

TEST_CASE("exogenous beliefs are taken as given") {
    const auto cfg = DynAuctionConfig::uniform_symmetric(2, 1);
    // opponents bid uniformly on [0, 1]: best response b = v/2, payoff v^2/4
    std::vector<double> knots, vals;
    for (int i = 0; i < cfg.bid_points; ++i) {
        knots.push_back(cfg.bid_max * i / (cfg.bid_points - 1));
        vals.push_back(knots.back());
    }
    const PiecewiseLinearCdf flat(knots, vals);
    const std::vector<std::vector<PiecewiseLinearCdf>> exo = {{flat, flat}};
    const auto table = value_iteration(cfg, BeliefMode::Exogenous, &exo);

    CHECK(table.value0(0, cfg.initial_budget) == doctest::Approx(1.0 / 12.0).epsilon(1e-3));
    for (double v : {0.2, 0.6, 1.0})
        CHECK(table.policy_bid(0, 0, v, cfg.initial_budget) == doctest::Approx(v / 2.0).epsilon(2e-3));
    // stored beliefs are the supplied ones
    CHECK(table.beliefs[0][0](0.37) == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("simulated play matches the programmed values") {
    const auto cfg = DynAuctionConfig::uniform_symmetric(2, 1);
    const auto table = value_iteration(cfg);
    const auto st = simulate_play(cfg, table, 6000, 42ULL);

    CHECK(st.episodes == 6000);
    CHECK(std::abs(st.revenue_mean - expected_revenue_flow(cfg, table)) <= st.revenue_ci);
    for (int j = 0; j < 2; ++j)
        CHECK(std::abs(st.bidder_payoff_mean[static_cast<std::size_t>(j)] -
                       table.value0(j, cfg.initial_budget)) <=
              st.bidder_payoff_ci[static_cast<std::size_t>(j)]);

    // deterministic replay
    const auto again = simulate_play(cfg, table, 6000, 42ULL);
    CHECK(again.revenue_mean == st.revenue_mean);
}

TEST_CASE("revenue gap of heterogeneous values scales quadratically") {
    const auto base = DynAuctionConfig::uniform_symmetric(2, 1);
    const auto res = revenue_bound_experiment(base, {0.1, 0.2, 0.4}, 2000, 7ULL);

    CHECK(res.base_flow == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    REQUIRE(res.rows.size() == 3);
    for (const auto& row : res.rows) {
        CHECK(row.valid);
        CHECK(row.flow_gap > 0.0);
        CHECK(row.sim_gap <= row.flow_gap + 3.0 * row.sim_ci);
    }
    CHECK(res.rows[1].flow_gap / res.rows[0].flow_gap == doctest::Approx(4.0).epsilon(0.1));
    CHECK(res.rows[2].flow_gap / res.rows[1].flow_gap == doctest::Approx(4.0).epsilon(0.1));
    CHECK(res.flow_slope == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("infeasible heterogeneity is skipped with a diagnostic") {
    const auto base = DynAuctionConfig::uniform_symmetric(2, 1);
    const auto res = revenue_bound_experiment(base, {0.1, 2.5}, 0, 7ULL);
    REQUIRE(res.rows.size() == 2);
    CHECK(res.rows[0].valid);
    CHECK_FALSE(res.rows[1].valid);
    CHECK_FALSE(res.rows[1].note.empty());
}

TEST_CASE("gap shrinks like the squared heterogeneity across player counts") {
    const auto rows = scaling_experiment({2, 3, 4}, 0.5, 1.0, 1);
    REQUIRE(rows.size() == 3);
    double lo = 1e300, hi = 0.0;
    for (const auto& row : rows) {
        CHECK(row.eps == doctest::Approx(0.5 / row.n));
        CHECK(row.flow_gap > 0.0);
        const double r = row.flow_gap * row.n * row.n;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    // proportional to 1/n^2 within a factor 2 around one constant
    const double c = std::sqrt(lo * hi);
    CHECK(hi <= 2.0 * c);
    CHECK(lo >= 0.5 * c);
    // gaps themselves decrease with n
    CHECK(rows[1].flow_gap < rows[0].flow_gap);
    CHECK(rows[2].flow_gap < rows[1].flow_gap);
}
