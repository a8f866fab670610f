#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mf/approx.hpp"
#include "mf/auction.hpp"
#include "mf/cdf.hpp"
#include "mf/collocation.hpp"
#include "mf/dyn_auction.hpp"
#include "mf/queue_sim.hpp"
#include "mf/queueing.hpp"
#include "mf/revenue.hpp"
#include "mf/rng.hpp"
#include "mf/shooting.hpp"
#include "mf/util.hpp"

// Acceptance gate for the whole stack: twelve numbered end-to-end checks with
// pinned tolerances, one PASS/FAIL line each, exit 0 only if every one holds.

namespace fs = std::filesystem;
using namespace mf;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
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

// 1. On payoffs quadratic in the empirical mean and mean square the
// second-order bound has zero slack; the finite-difference coefficients are
// exact for any step, so |gap - bound| should sit at roundoff.
Outcome crit_quadratic_exact() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto g = substream(1001, static_cast<std::uint64_t>(trial));
        const int n = 2 + trial % 7;
        const auto coef = [&g] { return -2.0 + 4.0 * uniform01(g); };
        const double A = coef(), B = coef(), C = coef(), D = coef();
        PayoffSpec p;
        p.n = n;
        p.a_low = -2.0;
        p.a_high = 3.0;
        p.evaluate = [A, B, C, D](const Profile& a) {
            double s = 0.0, sq = 0.0;
            for (double x : a) {
                s += x;
                sq += x * x;
            }
            const double m = s / static_cast<double>(a.size());
            return A * m * m + B * sq / static_cast<double>(a.size()) + C * m + D;
        };
        Profile act(static_cast<std::size_t>(n));
        for (double& x : act) x = uniform01(g);
        const auto rep = error_bound_static(p, ActionProfile::from_actions(act), 0.5);
        worst = std::max(worst, std::abs(rep.gap - rep.bound));
    }
    const double ms = ms_since(t0);
    Outcome o;
    o.pass = worst <= 1e-9 && ms < 1000.0;
    o.detail = "max |gap-bound| " + num(worst) + " (limit 1e-9), " + num(ms) + " ms (limit 1000)";
    return o;
}

// 2. Product payoff, n = 2, profile (1, (1-e)^2): the gap has the closed form
// e^4/4 + (1-e)e^2 and the bound collapses to e^2 (1 - e/2)^2 <= e^2.
Outcome crit_product_worked_example() {
    double worst_gap_err = 0.0, worst_bound_ratio = 0.0;
    for (double eps : {0.1, 0.01}) {
        auto p = product_spec(2);
        const double a2 = (1.0 - eps) * (1.0 - eps);
        const auto rep = error_bound_static(p, ActionProfile::from_actions({1.0, a2}));
        const double exact = eps * eps * eps * eps / 4.0 + (1.0 - eps) * eps * eps;
        worst_gap_err = std::max(worst_gap_err, std::abs(rep.gap - exact));
        worst_bound_ratio = std::max(worst_bound_ratio, rep.bound / (eps * eps));
    }
    Outcome o;
    o.pass = worst_gap_err <= 1e-12 && worst_bound_ratio <= 1.0;
    o.detail = "max |gap-closed form| " + num(worst_gap_err) + " (limit 1e-12), max bound/eps^2 " +
               num(worst_bound_ratio) + " (limit 1)";
    return o;
}

// 3. Smooth payoffs, pattern (m+e, m-e, m): the heterogeneity gap decays like
// e^2, so the log-log slope over e in [1e-3, 1e-1] should be 2.
Outcome crit_smooth_eps2() {
    PayoffSpec exp_spec;
    exp_spec.n = 3;
    exp_spec.a_low = 0.0;
    exp_spec.a_high = 1.0;
    exp_spec.evaluate = [](const Profile& a) {
        double sq = 0.0;
        for (double x : a) sq += x * x;
        return std::exp(sq / static_cast<double>(a.size()));
    };
    double lo = 10.0, hi = 0.0;
    for (const auto& p : {exp_spec, product_spec(3)}) {
        std::vector<double> epss, gaps;
        for (double eps = 1e-3; eps < 1.1e-1; eps *= std::sqrt(10.0)) {
            const Profile a = {0.5 + eps, 0.5 - eps, 0.5};
            gaps.push_back(error_bound_static(p, ActionProfile::from_actions(a)).gap);
            epss.push_back(eps);
        }
        const double s = loglog_slope(epss, gaps);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    Outcome o;
    o.pass = lo >= 1.9 && hi <= 2.1;
    o.detail = "slopes [" + num(lo) + ", " + num(hi) + "] (limit 2 +- 0.1)";
    return o;
}

// 4. Closed-form M/M/2 metrics at lambda = 5, mu = 3 against the tabulated
// rounded values, each within 1%.
Outcome crit_erlang_table() {
    const auto t0 = Clock::now();
    const auto q = QueueModel::make(5.0, {3.0, 3.0});
    const double got[5] = {q.rho, p_empty_mmn(q.n, q.rho), erlang_c(q.n, q.rho),
                           mean_queue_len_mmn(q.n, q.rho), mean_system_len_mmn(q.n, q.rho)};
    const double ms = ms_since(t0);
    const double want[5] = {0.830, 0.091, 0.760, 3.800, 5.500};
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) worst = std::max(worst, std::abs(got[i] / want[i] - 1.0));
    Outcome o;
    o.pass = worst < 0.01 && ms < 1.0;
    o.detail = "max rel err " + num(worst) + " (limit 0.01), " + num(ms) + " ms (limit 1)";
    return o;
}

// 5. Simulated M/M/2: per-replication 95% intervals (rep mean +- 1.96 sd,
// sd recovered from the across-replication halfwidth) should cover the five
// closed-form metrics in at least 90% of the metric-replication pairs.
Outcome crit_sim_coverage() {
    const auto t0 = Clock::now();
    const auto q = QueueModel::make(5.0, {3.0, 3.0});
    const double truth[5] = {q.rho, p_empty_mmn(q.n, q.rho), erlang_c(q.n, q.rho),
                             mean_queue_len_mmn(q.n, q.rho), mean_system_len_mmn(q.n, q.rho)};
    SimOptions opt;
    opt.threads = 4;
    const int reps = 20;
    const auto r = simulate_mmn(q, 1e5, reps, 7, opt);
    const MetricStat* ms[5] = {&r.utilization, &r.p_empty, &r.p_wait, &r.mean_queue_len,
                               &r.mean_system_len};
    int cover = 0, total = 0;
    for (int m = 0; m < 5; ++m) {
        const double sd = ms[m]->ci_halfwidth * std::sqrt(static_cast<double>(reps)) / 1.96;
        for (double rep : ms[m]->per_rep) {
            cover += truth[m] >= rep - 1.96 * sd && truth[m] <= rep + 1.96 * sd;
            ++total;
        }
    }
    const double elapsed = ms_since(t0);
    Outcome o;
    o.pass = total == 100 && cover >= 90 && elapsed < 60000.0;
    o.detail = "coverage " + std::to_string(cover) + "/" + std::to_string(total) +
               " (limit >= 90), " + num(elapsed / 1000.0) + " s (limit 60)";
    return o;
}

// 6. Heterogeneous service rates mu = (3-e, 3+e) at lambda = 3: the matched
// seed (common random numbers) waiting-time gap from the symmetric system
// decays like e^2.
Outcome crit_queue_eps2() {
    const double eps_list[3] = {0.1, 0.2, 0.4};
    const double horizons[3] = {8e5, 2e5, 1e5};
    SimOptions opt;
    opt.threads = 4;
    std::vector<double> epss, gaps;
    for (int i = 0; i < 3; ++i) {
        const auto sym = simulate_mmn(QueueModel::make(3.0, {3.0, 3.0}), horizons[i], 20, 99, opt);
        const auto het = simulate_mmn(QueueModel::make(3.0, {3.0 - eps_list[i], 3.0 + eps_list[i]}),
                                      horizons[i], 20, 99, opt);
        epss.push_back(eps_list[i]);
        gaps.push_back(std::abs(het.mean_wait.mean - sym.mean_wait.mean));
    }
    const double slope = loglog_slope(epss, gaps);
    Outcome o;
    o.pass = std::abs(slope - 2.0) <= 0.3;
    o.detail = "slope " + num(slope) + " (limit 2 +- 0.3)";
    return o;
}

// 7. Symmetric uniform pair: both solvers recover the closed form v(b) = 2b,
// and the degree-1 collocation objective vanishes at the exact coefficients.
Outcome crit_uniform_closed_form() {
    const auto t0 = Clock::now();
    const auto vm = ValuationModel::make({make_uniform_cdf(), make_uniform_cdf()});
    double sup = 0.0;
    for (const auto& sol : {solve_shooting(vm), solve_collocation(vm)}) {
        for (std::size_t i = 0; i < sol.grid.size(); ++i)
            for (const auto& curve : sol.curves)
                sup = std::max(sup, std::abs(curve[i] - 2.0 * sol.grid[i]));
    }
    CollocationConfig cfg;
    cfg.K = 1;
    const double obj = collocation_objective(vm, cfg, {0.5, -0.5, 2.0, -0.5, 2.0});
    const double elapsed = ms_since(t0);
    Outcome o;
    o.pass = sup < 1e-3 && obj < 1e-12 && elapsed < 10000.0;
    o.detail = "sup |v-2b| " + num(sup) + " (limit 1e-3), exact-seed objective " + num(obj) +
               " (limit 1e-12), " + num(elapsed / 1000.0) + " s (limit 10)";
    return o;
}

// 8. Power-law pair F1 = v^7, F2 = v^8: clean boundaries, the weak bidder's
// inverse curve dominates on the interior, the mean curve separation over the
// top 5% of the bid range sits within a factor 2 of (1/64)(7/8)^14, and the
// two solvers agree.
Outcome crit_power_pair() {
    const auto vm = ValuationModel::make({make_power_cdf(7.0), make_power_cdf(8.0)});
    const auto sh = solve_shooting(vm);
    const auto co = solve_collocation(vm);
    const double anchor = std::pow(7.0 / 8.0, 14.0) / 64.0;
    bool ok = sh.converged && co.converged && sh.boundary_defect < 1e-3 &&
              co.boundary_defect < 1e-3;
    double ratio_lo = 1e9, ratio_hi = 0.0, min_order = 0.0, cross = 0.0;
    for (const auto& sol : {sh, co}) {
        for (std::size_t i = 1; i + 1 < sol.grid.size(); ++i)
            min_order = std::min(min_order, sol.curves[1][i] - sol.curves[0][i]);
        double acc = 0.0;
        const int K = 400;
        for (int k = 0; k <= K; ++k) {
            const double b = sol.b_high * (0.95 + 0.05 * k / K);
            acc += sol.value_at(1, b) - sol.value_at(0, b);
        }
        const double ratio = acc / ((K + 1) * anchor);
        ratio_lo = std::min(ratio_lo, ratio);
        ratio_hi = std::max(ratio_hi, ratio);
    }
    const double b_common = std::min(sh.b_high, co.b_high);
    for (int k = 0; k <= 200; ++k) {
        const double b = b_common * k / 200.0;
        for (int j = 0; j < 2; ++j)
            cross = std::max(cross, std::abs(sh.value_at(j, b) - co.value_at(j, b)));
    }
    ok = ok && min_order >= -1e-9 && ratio_lo >= 0.5 && ratio_hi <= 2.0 && cross <= 5e-3;
    Outcome o;
    o.pass = ok;
    o.detail = "defects " + num(sh.boundary_defect) + "/" + num(co.boundary_defect) +
               " (limit 1e-3), top-gap ratio [" + num(ratio_lo) + ", " + num(ratio_hi) +
               "] (limit [0.5, 2]), cross sup " + num(cross) + " (limit 5e-3)";
    return o;
}

// 9. Spiteful symmetric bidding: the linear strategy (n-1)/(n-alpha) v zeroes
// the equilibrium ODE, and Monte-Carlo revenue at 1e6 samples matches the
// closed forms 1/3, 2/3, 1/2 within 3 standard errors.
Outcome crit_spiteful() {
    const auto t0 = Clock::now();
    double res_max = 0.0;
    const std::pair<int, double> ode_cases[4] = {{2, 0.0}, {2, 1.0}, {3, 0.0}, {2, 0.5}};
    for (const auto& [n, alpha] : ode_cases)
        for (int k = 0; k < 64; ++k)
            res_max = std::max(res_max,
                               std::abs(spiteful_ode_residual(n, alpha, (k + 1) / 64.0)));
    const std::pair<int, double> rev_cases[3] = {{2, 0.0}, {2, 1.0}, {3, 0.0}};
    double worst_sigmas = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto [n, alpha] = rev_cases[c];
        const double slope = (n - 1.0) / (n - alpha);
        auto g = substream(555, static_cast<std::uint64_t>(c));
        const int N = 1000000;
        double sum = 0.0, sumsq = 0.0;
        for (int s = 0; s < N; ++s) {
            double vmax = 0.0;
            for (int j = 0; j < n; ++j) vmax = std::max(vmax, uniform01(g));
            const double rev = slope * vmax;
            sum += rev;
            sumsq += rev * rev;
        }
        const double mean = sum / N;
        const double se = std::sqrt((sumsq / N - mean * mean) / (N - 1));
        worst_sigmas = std::max(worst_sigmas, std::abs(mean - spiteful_revenue(n, alpha)) / se);
    }
    const double elapsed = ms_since(t0);
    Outcome o;
    o.pass = res_max < 1e-12 && worst_sigmas <= 3.0 && elapsed < 30000.0;
    o.detail = "ODE residual " + num(res_max) + " (limit 1e-12), worst MC deviation " +
               num(worst_sigmas) + " se (limit 3), " + num(elapsed / 1000.0) + " s (limit 30)";
    return o;
}

// 10. Antisymmetric cubic CDF pair: the seller-revenue gap from the symmetric
// value scales like eps^2.
Outcome crit_revenue_eps2() {
    const auto res = revenue_perturbation_experiment({0.05, 0.1, 0.2, 0.4}, 20260815ULL);
    bool all_valid = true;
    for (const auto& row : res.rows) all_valid = all_valid && row.valid;
    Outcome o;
    o.pass = all_valid && std::abs(res.slope - 2.0) <= 0.3;
    o.detail = "slope " + num(res.slope) + " (limit 2 +- 0.3), rows valid " +
               (all_valid ? "yes" : "no");
    return o;
}

// 11. Dynamic auction block: exact terminal values, the single-period
// symmetric uniform value 1/6 on the budget grid, simulated revenue consistent
// with 1/3, the heterogeneity revenue gap scaling like eps^2, and the gap
// tracking 1/n^(2 alpha) when heterogeneity shrinks as delta0/n^alpha.
Outcome crit_dyn_auction() {
    const auto t0 = Clock::now();
    const auto cfg = DynAuctionConfig::uniform_symmetric(2, 1);
    const auto table = value_iteration(cfg);
    double terminal_max = 0.0;
    for (const auto& vj : table.V)
        for (double v : vj.back()) terminal_max = std::max(terminal_max, std::abs(v));
    const double grid_res = cfg.s_max / (cfg.budget_points - 1);
    double v0_err = 0.0;
    for (int j = 0; j < 2; ++j)
        v0_err = std::max(v0_err, std::abs(table.value0(j, cfg.initial_budget) - 1.0 / 6.0));
    const auto play = simulate_play(cfg, table, 6000, 42);
    const double rev_err = std::abs(play.revenue_mean - 1.0 / 3.0);
    const auto pert = revenue_bound_experiment(cfg, {0.1, 0.2, 0.4}, 2000, 7);
    bool pert_valid = true;
    for (const auto& row : pert.rows) pert_valid = pert_valid && row.valid;
    const auto scaling = scaling_experiment({2, 3, 4}, 0.5, 1.0, 1);
    double r_lo = 1e300, r_hi = 0.0;
    for (const auto& row : scaling) {
        const double r = row.flow_gap * row.n * row.n;
        r_lo = std::min(r_lo, r);
        r_hi = std::max(r_hi, r);
    }
    const double band = r_hi / r_lo;  // all n fit [C/2, 2C] for some C iff <= 4
    const double elapsed = ms_since(t0);
    Outcome o;
    o.pass = terminal_max == 0.0 && v0_err <= 2.0 * grid_res && rev_err <= play.revenue_ci &&
             pert_valid && std::abs(pert.flow_slope - 2.0) <= 0.4 && band <= 4.0 &&
             elapsed < 300000.0;
    o.detail = "terminal " + num(terminal_max) + ", |V0-1/6| " + num(v0_err) + " (limit " +
               num(2.0 * grid_res) + "), |rev-1/3| " + num(rev_err) + " (ci " +
               num(play.revenue_ci) + "), slope " + num(pert.flow_slope) +
               " (limit 2 +- 0.4), scaling spread " + num(band) + " (limit 4), " +
               num(elapsed / 1000.0) + " s (limit 300)";
    return o;
}

// 12. CLI determinism: repeated runs with one seed produce byte-identical
// artifact sets across subcommands that exercise every RNG path.
Outcome crit_cli_determinism() {
    const fs::path root =
        fs::temp_directory_path() / ("mf_accept_" + std::to_string(std::rand()));
    fs::create_directories(root);
    const struct {
        const char* sub;
        const char* cfg;
        const char* seed;
    } runs[3] = {
        {"queue-sim",
         R"({"lambda":5.0,"mu":[3.0,3.0],"horizon":400.0,"replications":3,"path_points":25})",
         "11"},
        {"auction-spite", R"({"n":2,"alphas":[0.0,0.5,1.0],"mc_samples":20000})", "5"},
        {"dyn-auction", R"({"n":2,"horizon":1,"episodes":400})", "42"},
    };
    int files_compared = 0;
    bool ok = true;
    std::string why;
    for (int i = 0; i < 3 && ok; ++i) {
        const fs::path cfg_path = root / (std::string(runs[i].sub) + ".json");
        std::ofstream(cfg_path) << runs[i].cfg;
        fs::path out[2] = {root / (std::to_string(i) + "a"), root / (std::to_string(i) + "b")};
        for (const auto& dir : out) {
            fs::create_directories(dir);
            const std::string cmd = std::string(MF_CLI_PATH) + " " + runs[i].sub + " --config " +
                                    cfg_path.string() + " --seed " + runs[i].seed + " --out " +
                                    dir.string() + " >/dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            if (status < 0 || WEXITSTATUS(status) != 0) {
                ok = false;
                why = std::string(runs[i].sub) + " exited nonzero";
            }
        }
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(out[0])) names.push_back(e.path().filename());
        std::sort(names.begin(), names.end());
        for (const auto& name : names) {
            const auto slurp = [](const fs::path& p) {
                std::ostringstream os;
                os << std::ifstream(p, std::ios::binary).rdbuf();
                return os.str();
            };
            if (!fs::exists(out[1] / name) || slurp(out[0] / name) != slurp(out[1] / name)) {
                ok = false;
                why = std::string(runs[i].sub) + "/" + name + " differs";
            }
            ++files_compared;
        }
        if (ok && names.empty()) {
            ok = false;
            why = std::string(runs[i].sub) + " wrote no artifacts";
        }
    }
    std::error_code ec;
    fs::remove_all(root, ec);
    Outcome o;
    o.pass = ok;
    o.detail = ok ? std::to_string(files_compared) + " artifacts byte-identical across reruns"
                  : why;
    return o;
}

}  // namespace

int main() {
    const struct {
        const char* name;
        Outcome (*fn)();
    } criteria[12] = {
        {"quadratic payoffs: bound exactly equals gap", crit_quadratic_exact},
        {"product payoff worked example", crit_product_worked_example},
        {"smooth payoff gap scales as eps^2", crit_smooth_eps2},
        {"closed-form M/M/2 metrics", crit_erlang_table},
        {"simulation intervals cover closed forms", crit_sim_coverage},
        {"heterogeneous waiting-time gap is O(eps^2)", crit_queue_eps2},
        {"uniform auction closed form, both solvers", crit_uniform_closed_form},
        {"power-law pair benchmark", crit_power_pair},
        {"spiteful bidding closed forms", crit_spiteful},
        {"cubic revenue perturbation is O(eps^2)", crit_revenue_eps2},
        {"dynamic auction values and scaling", crit_dyn_auction},
        {"CLI byte-identical determinism", crit_cli_determinism},
    };
    int failures = 0;
    for (int i = 0; i < 12; ++i) {
        const auto o = criteria[i].fn();
        if (!o.pass) ++failures;
        std::printf("[%s] %2d %-44s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("acceptance: %d/12 passed\n", 12 - failures);
    return failures == 0 ? 0 : 1;
}
