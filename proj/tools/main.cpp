// mfield: batch CLI over the mean-field approximation library. Every run
// reads one JSON config, writes artifacts atomically into an output
// directory, and finishes with a manifest recording the config hash, seed and
// per-artifact content hashes. Identical config + seed must produce
// byte-identical artifacts, so nothing time- or pointer-dependent may reach
// an output file; wall time goes to stderr only.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mf/approx.hpp"
#include "mf/auction.hpp"
#include "mf/cdf.hpp"
#include "mf/collocation.hpp"
#include "mf/dyn_auction.hpp"
#include "mf/games.hpp"
#include "mf/queue_sim.hpp"
#include "mf/queueing.hpp"
#include "mf/revenue.hpp"
#include "mf/rng.hpp"
#include "mf/shooting.hpp"
#include "mf/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown after best-iterate artifacts are already on disk.
struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
    return buf;
}

// 9 significant digits, '.' decimal separator, no locale surprises.
std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        fs::create_directories(dir_);
        const fs::path tmp = dir_ / (name + ".tmp");
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) throw std::runtime_error("cannot open " + tmp.string());
            f << content;
            if (!f.flush()) throw std::runtime_error("write failed: " + tmp.string());
        }
        fs::rename(tmp, dir_ / name);
        hashes_.emplace_back(name, hex64(fnv1a64(content)));
        std::cerr << "[mfield] wrote " << (dir_ / name).string() << "\n";
    }

    const std::vector<std::pair<std::string, std::string>>& hashes() const { return hashes_; }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> hashes_;
};

struct RunContext {
    std::string subcommand;
    json config;
    std::string config_bytes;
    std::uint64_t seed = 0;
    std::string format = "csv";  // csv | json, for record/table artifacts
    int threads = 1;
    ArtifactWriter writer;
};

// ---- config field access with field-level diagnostics ----

const json& need(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
    return *it;
}

double need_num(const json& j, const char* key) {
    const json& v = need(j, key);
    if (!v.is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

int need_int(const json& j, const char* key) {
    const json& v = need(j, key);
    if (!v.is_number_integer())
        throw ValidationError(std::string("field '") + key + "' must be an integer");
    return v.get<int>();
}

double opt_num(const json& j, const char* key, double dflt) {
    const auto it = j.find(key);
    if (it == j.end()) return dflt;
    if (!it->is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
    return it->get<double>();
}

int opt_int(const json& j, const char* key, int dflt) {
    const auto it = j.find(key);
    if (it == j.end()) return dflt;
    if (!it->is_number_integer())
        throw ValidationError(std::string("field '") + key + "' must be an integer");
    return it->get<int>();
}

std::string opt_str(const json& j, const char* key, const std::string& dflt) {
    const auto it = j.find(key);
    if (it == j.end()) return dflt;
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::vector<double> need_num_vector(const json& j, const char* key) {
    const json& v = need(j, key);
    if (!v.is_array() || v.empty())
        throw ValidationError(std::string("field '") + key + "' must be a non-empty array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number())
            throw ValidationError(std::string("field '") + key + "' must hold numbers only");
        out.push_back(e.get<double>());
    }
    return out;
}

// ---- shared model builders ----

mf::PayoffSpec payoff_from_config(const json& j) {
    const std::string family = opt_str(j, "payoff", "");
    if (family.empty()) throw ValidationError("missing field 'payoff'");
    const int n = need_int(j, "n");
    if (n < 2) throw ValidationError("field 'n' must be >= 2");

    mf::PayoffSpec p;
    p.n = n;
    p.a_low = opt_num(j, "a_low", 0.0);
    p.a_high = opt_num(j, "a_high", 1.0);
    if (!(p.a_low < p.a_high)) throw ValidationError("need a_low < a_high");

    if (family == "quadratic") {
        // c2*mean^2 + c_sq*(mean of squares) + c1*mean + c0; the bound is
        // exactly tight on this family (gap = c_sq/n * sum (a_j - mean)^2)
        const double c2 = opt_num(j, "c2", 1.0);
        const double csq = opt_num(j, "c_sq", 0.0);
        const double c1 = opt_num(j, "c1", 0.0);
        const double c0 = opt_num(j, "c0", 0.0);
        p.evaluate = [c2, csq, c1, c0, n](const mf::Profile& a) {
            double m = 0.0, s = 0.0;
            for (double x : a) {
                m += x;
                s += x * x;
            }
            m /= n;
            return (c2 * m + c1) * m + csq * s / n + c0;
        };
    } else if (family == "exp-mean-square") {
        p.evaluate = [n](const mf::Profile& a) {
            double s = 0.0;
            for (double x : a) s += x * x;
            return std::exp(s / n);
        };
    } else if (family == "product") {
        p.evaluate = [](const mf::Profile& a) {
            double r = 1.0;
            for (double x : a) r *= x;
            return r;
        };
    } else if (family == "mean-power") {
        const double e = need_num(j, "exponent");
        p.evaluate = [e, n](const mf::Profile& a) {
            double m = 0.0;
            for (double x : a) m += x;
            return std::pow(m / n, e);
        };
    } else {
        throw ValidationError("field 'payoff': unknown family '" + family + "'");
    }
    return p;
}

mf::CdfPtr cdf_from_config(const json& j) {
    if (!j.is_object()) throw ValidationError("field 'cdfs' must hold objects");
    const std::string family = opt_str(j, "family", "");
    try {
        if (family == "uniform")
            return mf::make_uniform_cdf(opt_num(j, "v_low", 0.0), opt_num(j, "v_high", 1.0));
        if (family == "power")
            return mf::make_power_cdf(need_num(j, "exponent"), opt_num(j, "v_high", 1.0));
        if (family == "perturbed-cubic")
            return mf::make_perturbed_cubic_cdf(need_num(j, "eps"), need_int(j, "sign"));
        if (family == "tabulated")
            return mf::make_tabulated_cdf(need_num_vector(j, "v"), need_num_vector(j, "F"));
    } catch (const std::domain_error& e) {
        throw ValidationError(std::string("field 'cdfs': ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("field 'cdfs': ") + e.what());
    }
    throw ValidationError("field 'cdfs': unknown family '" + family + "'");
}

// ---- record/table serialization ----

using Record = std::vector<std::pair<std::string, json>>;

std::string record_csv(const RunContext& ctx, const Record& rec,
                       const std::vector<std::string>& comments = {}) {
    std::ostringstream out;
    out << "# seed " << ctx.seed << "\n";
    for (const auto& c : comments) out << "# " << c << "\n";
    out << "key,value\n";
    for (const auto& [k, v] : rec) {
        out << k << ',';
        if (v.is_number_float())
            out << fmt9(v.get<double>());
        else if (v.is_string())
            out << csv_field(v.get<std::string>());
        else
            out << v.dump();
        out << '\n';
    }
    return out.str();
}

std::string record_json(const RunContext& ctx, const Record& rec) {
    json obj;
    obj["seed"] = ctx.seed;
    for (const auto& [k, v] : rec) obj[k] = v;
    return obj.dump(2) + "\n";
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
    std::vector<std::string> comments;
};

std::string table_csv(const RunContext& ctx, const Table& t) {
    std::ostringstream out;
    out << "# seed " << ctx.seed << "\n";
    for (const auto& c : t.comments) out << "# " << c << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            const json& v = row[i];
            if (v.is_number_float())
                out << fmt9(v.get<double>());
            else if (v.is_string())
                out << csv_field(v.get<std::string>());
            else
                out << v.dump();
        }
        out << '\n';
    }
    return out.str();
}

std::string table_json(const RunContext& ctx, const Table& t) {
    json obj;
    obj["seed"] = ctx.seed;
    for (const auto& c : t.comments) {
        const auto eq = c.find(" = ");
        if (eq != std::string::npos) {
            try {
                obj[c.substr(0, eq)] = std::stod(c.substr(eq + 3));
                continue;
            } catch (const std::exception&) {
            }
        }
        obj["notes"].push_back(c);
    }
    json rows = json::array();
    for (const auto& row : t.rows) {
        json r;
        for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = row[i];
        rows.push_back(std::move(r));
    }
    obj["rows"] = std::move(rows);
    return obj.dump(2) + "\n";
}

void emit_record(RunContext& ctx, const std::string& stem, const Record& rec,
                 const std::vector<std::string>& comments = {}) {
    if (ctx.format == "json")
        ctx.writer.write(stem + ".json", record_json(ctx, rec));
    else
        ctx.writer.write(stem + ".csv", record_csv(ctx, rec, comments));
}

void emit_table(RunContext& ctx, const std::string& stem, const Table& t) {
    if (ctx.format == "json")
        ctx.writer.write(stem + ".json", table_json(ctx, t));
    else
        ctx.writer.write(stem + ".csv", table_csv(ctx, t));
}

// ---- subcommands ----

void run_approx(RunContext& ctx) {
    const mf::PayoffSpec p = payoff_from_config(ctx.config);
    const double h = opt_num(ctx.config, "h", 0.0);

    if (ctx.config.contains("trajectory")) {
        const json& traj = ctx.config["trajectory"];
        if (!traj.is_array() || traj.empty())
            throw ValidationError("field 'trajectory' must be a non-empty array of profiles");
        std::vector<mf::Profile> periods;
        for (const auto& row : traj) {
            if (!row.is_array() || static_cast<int>(row.size()) != p.n)
                throw ValidationError("field 'trajectory': each period needs n actions");
            periods.push_back(row.get<mf::Profile>());
        }
        const auto tp = mf::TrajectoryProfile::from_actions(periods);
        const auto rep = mf::error_bound_dynamic(p, tp, h);
        emit_record(ctx, "approx",
                    {{"payoff", ctx.config["payoff"]},
                     {"n", p.n},
                     {"horizon", rep.horizon},
                     {"l2_deviation", rep.l2_deviation},
                     {"delta_sup", rep.delta_sup},
                     {"bound", rep.bound},
                     {"gap", rep.gap}});
        return;
    }

    const auto actions = need_num_vector(ctx.config, "actions");
    if (static_cast<int>(actions.size()) != p.n)
        throw ValidationError("field 'actions' must hold exactly n values");
    const auto prof = mf::ActionProfile::from_actions(actions);
    const auto rep = mf::error_bound_static(p, prof, h);
    emit_record(ctx, "approx",
                {{"payoff", ctx.config["payoff"]},
                 {"n", rep.n},
                 {"mean", prof.mean},
                 {"deviation_sq", prof.deviation_sq},
                 {"epsilon", rep.epsilon},
                 {"delta", rep.delta},
                 {"bound", rep.bound},
                 {"gap", rep.gap},
                 {"rbar_second", rep.rbar_second},
                 {"d2_own", rep.d2_own}});
}

void run_games(RunContext& ctx) {
    const std::string check = opt_str(ctx.config, "check", "nash");
    const mf::PayoffSpec p = payoff_from_config(ctx.config);

    if (check == "nash" || check == "strong-nash") {
        const auto profile = need_num_vector(ctx.config, "profile");
        if (static_cast<int>(profile.size()) != p.n)
            throw ValidationError("field 'profile' must hold exactly n values");
        const int grid = opt_int(ctx.config, "grid_points", 101);
        const mf::NashReport rep = check == "nash" ? mf::verify_nash(p, profile, grid)
                                                   : mf::verify_strong_nash(p, profile, grid);
        emit_record(ctx, "games",
                    {{"check", check},
                     {"pass", rep.pass},
                     {"best_improvement", rep.best_improvement},
                     {"player", rep.player},
                     {"deviation", rep.deviation}});
    } else if (check == "ess") {
        const double a_star = need_num(ctx.config, "a_star");
        const auto rep =
            mf::verify_ess(p, a_star, opt_int(ctx.config, "invader_grid", 101),
                           opt_int(ctx.config, "epsilon_grid", 20),
                           opt_num(ctx.config, "eps_max", 0.5));
        emit_record(ctx, "games",
                    {{"check", check},
                     {"pass", rep.pass},
                     {"worst_invader", rep.worst_invader},
                     {"worst_margin", rep.worst_margin}});
    } else {
        throw ValidationError("field 'check' must be nash, strong-nash or ess");
    }
}

mf::QueueModel queue_from_config(const json& j) {
    const double lambda = need_num(j, "lambda");
    std::vector<double> mu;
    const json& muj = need(j, "mu");
    if (muj.is_number()) {
        const int n = need_int(j, "n");
        if (n < 1) throw ValidationError("field 'n' must be >= 1");
        mu.assign(static_cast<std::size_t>(n), muj.get<double>());
    } else {
        mu = need_num_vector(j, "mu");
        if (j.contains("n") && need_int(j, "n") != static_cast<int>(mu.size()))
            throw ValidationError("field 'n' disagrees with the length of 'mu'");
    }
    try {
        return mf::QueueModel::make(lambda, std::move(mu));
    } catch (const std::domain_error& e) {
        throw ValidationError(e.what());
    }
}

Record queue_expected_record(const mf::QueueModel& q) {
    const double C = mf::erlang_c(q.n, q.rho);
    return {{"utilization", q.rho},
            {"p_wait", C},
            {"p_empty", mf::p_empty_mmn(q.n, q.rho)},
            {"mean_queue_len", mf::mean_queue_len_mmn(q.n, q.rho)},
            {"mean_system_len", mf::mean_system_len_mmn(q.n, q.rho)},
            {"mean_wait", mf::waiting_time_heterogeneous(q).approximation}};
}

void run_queue(RunContext& ctx) {
    const mf::QueueModel q = queue_from_config(ctx.config);
    Table t;
    t.columns = {"metric", "expected"};
    for (const auto& [k, v] : queue_expected_record(q)) t.rows.push_back({k, v});
    if (!q.symmetric()) {
        const auto het = mf::waiting_time_heterogeneous(q);
        t.comments.push_back("heterogeneous rates: symmetric values at the mean rate, error O(eps^2)");
        t.comments.push_back("epsilon = " + fmt9(het.epsilon));
        if (!het.note.empty()) t.comments.push_back(het.note);
    }
    emit_table(ctx, "queue", t);
}

void run_queue_sim(RunContext& ctx) {
    const mf::QueueModel q = queue_from_config(ctx.config);
    const double horizon = need_num(ctx.config, "horizon");
    const int reps = need_int(ctx.config, "replications");
    if (horizon <= 0.0) throw ValidationError("field 'horizon' must be > 0");
    if (reps < 1) throw ValidationError("field 'replications' must be >= 1");

    mf::SimOptions opt;
    opt.threads = ctx.threads;
    opt.warmup_fraction = opt_num(ctx.config, "warmup_fraction", opt.warmup_fraction);
    opt.path_points = opt_int(ctx.config, "path_points", 0);
    const std::string policy = opt_str(ctx.config, "policy", "random");
    if (policy == "random")
        opt.policy = mf::IdlePolicy::RandomUniform;
    else if (policy == "lowest-index")
        opt.policy = mf::IdlePolicy::LowestIndex;
    else if (policy == "fastest-rate")
        opt.policy = mf::IdlePolicy::FastestRate;
    else
        throw ValidationError("field 'policy' must be random, lowest-index or fastest-rate");

    std::cerr << "[mfield] simulating " << reps << " replications, horizon " << horizon << "\n";
    const mf::SimResult res = mf::simulate_mmn(q, horizon, reps, ctx.seed, opt);

    const Record expected = queue_expected_record(q);
    const mf::MetricStat* observed[] = {&res.utilization,    &res.p_wait,
                                        &res.p_empty,        &res.mean_queue_len,
                                        &res.mean_system_len, &res.mean_wait};
    const char* names[] = {"utilization", "p_wait", "p_empty", "mean_queue_len",
                           "mean_system_len", "mean_wait"};
    Table t;
    t.columns = {"metric", "expected", "observed", "ci_halfwidth"};
    t.comments.push_back("replications = " + std::to_string(res.replications));
    t.comments.push_back("horizon = " + fmt9(res.horizon));
    if (!q.symmetric())
        t.comments.push_back("expected column is the symmetric mean-rate value, error O(eps^2)");
    for (int i = 0; i < 6; ++i) {
        double exp_val = 0.0;
        for (const auto& [k, v] : expected)
            if (k == names[i]) exp_val = v.get<double>();
        t.rows.push_back({names[i], exp_val, observed[i]->mean, observed[i]->ci_halfwidth});
    }
    emit_table(ctx, "queue_sim", t);

    if (opt.path_points > 0) {
        Table path;
        path.columns = {"time", "queue_len"};
        for (const auto& [time, len] : res.sample_path) path.rows.push_back({time, len});
        ctx.writer.write("path.csv", table_csv(ctx, path));
    }
}

mf::ValuationModel valuation_from_config(const json& j) {
    const json& cdfs = need(j, "cdfs");
    if (!cdfs.is_array() || cdfs.size() < 2)
        throw ValidationError("field 'cdfs' must hold at least two distributions");
    std::vector<mf::CdfPtr> fams;
    for (const auto& c : cdfs) fams.push_back(cdf_from_config(c));
    std::vector<double> alpha;
    if (j.contains("alpha")) {
        alpha = need_num_vector(j, "alpha");
        for (double a : alpha)
            if (a != 0.0)
                throw ValidationError(
                    "field 'alpha': the solvers cover spite-free models; use auction-spite");
    }
    if (j.contains("n") && need_int(j, "n") != static_cast<int>(fams.size()))
        throw ValidationError("field 'n' disagrees with the length of 'cdfs'");
    try {
        mf::ValuationModel vm = mf::ValuationModel::make(std::move(fams), std::move(alpha));
        if (j.contains("support")) {
            const auto s = need_num_vector(j, "support");
            if (s.size() != 2 || std::abs(s[0] - vm.v_low) > 1e-12 ||
                std::abs(s[1] - vm.v_high) > 1e-12)
                throw ValidationError("field 'support' disagrees with the distribution supports");
        }
        return vm;
    } catch (const std::domain_error& e) {
        throw ValidationError(e.what());
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
}

void run_auction_solve(RunContext& ctx) {
    const mf::ValuationModel vm = valuation_from_config(ctx.config);
    const std::string method = opt_str(ctx.config, "method", "collocation");

    mf::InverseBidSolution sol;
    std::cerr << "[mfield] solving inverse-bid system by " << method << "\n";
    if (method == "collocation") {
        mf::CollocationConfig cc;
        cc.K = opt_int(ctx.config, "K", cc.K);
        cc.T = opt_int(ctx.config, "T", cc.T);
        cc.tol = opt_num(ctx.config, "tol", cc.tol);
        cc.max_iter = opt_int(ctx.config, "max_iter", cc.max_iter);
        sol = mf::solve_collocation(vm, cc);
    } else if (method == "shooting") {
        mf::ShootingConfig sc;
        sc.rel_tol = opt_num(ctx.config, "tol", sc.rel_tol);
        sc.output_points = opt_int(ctx.config, "output_points", sc.output_points);
        sol = mf::solve_shooting(vm, sc);
    } else {
        throw ValidationError("field 'method' must be shooting or collocation");
    }

    Table curves;
    curves.columns = {"b"};
    for (int j = 0; j < vm.n; ++j) curves.columns.push_back("v_" + std::to_string(j + 1));
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        std::vector<json> row = {sol.grid[i]};
        for (int j = 0; j < vm.n; ++j) row.push_back(sol.curves[static_cast<std::size_t>(j)][i]);
        curves.rows.push_back(std::move(row));
    }
    ctx.writer.write("curves.csv", table_csv(ctx, curves));

    const int mc = opt_int(ctx.config, "mc_samples", 100000);
    if (mc < 1) throw ValidationError("field 'mc_samples' must be >= 1");
    const auto rev = mf::seller_revenue(vm, sol, mc, ctx.seed);
    const double sym = mf::symmetric_revenue_quadrature(*vm.mean_cdf, vm.n);
    emit_record(ctx, "summary",
                {{"method", sol.method},
                 {"converged", sol.converged},
                 {"b_low", sol.b_low},
                 {"b_high", sol.b_high},
                 {"residual", sol.residual},
                 {"boundary_defect", sol.boundary_defect},
                 {"objective", sol.objective},
                 {"iterations", sol.iterations},
                 {"epsilon", vm.epsilon},
                 {"epsilon_sq", vm.epsilon * vm.epsilon},
                 {"revenue_flow", rev.flow},
                 {"revenue_mc", rev.mc},
                 {"revenue_mc_se", rev.mc_se},
                 {"symmetric_revenue_mean_cdf", sym},
                 {"revenue_gap_vs_mean", std::abs(rev.flow - sym)}});

    if (!sol.converged)
        throw SolverFailure("solver did not converge (residual " + fmt9(sol.residual) +
                            ", boundary defect " + fmt9(sol.boundary_defect) + ")");
}

void run_auction_spite(RunContext& ctx) {
    const int n = need_int(ctx.config, "n");
    if (n < 2) throw ValidationError("field 'n' must be >= 2");
    std::vector<double> alphas;
    if (ctx.config.contains("alphas"))
        alphas = need_num_vector(ctx.config, "alphas");
    else
        alphas.push_back(need_num(ctx.config, "alpha"));
    for (double a : alphas)
        if (a < 0.0 || a > 1.0) throw ValidationError("field 'alphas' must lie in [0, 1]");
    const int mc = opt_int(ctx.config, "mc_samples", 200000);
    if (mc < 1) throw ValidationError("field 'mc_samples' must be >= 1");

    Table t;
    t.columns = {"alpha",      "bid_slope", "revenue",
                 "revenue_mc", "mc_se",     "ode_residual_max"};
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        const double a = alphas[k];
        const double slope = static_cast<double>(n - 1) / (n - a);
        double resid = 0.0;
        for (int i = 1; i <= 64; ++i)
            resid = std::max(resid, std::abs(mf::spiteful_ode_residual(n, a, i / 64.0)));
        // E[max_j b_j] = slope * E[max of n uniforms], estimated per alpha on
        // its own substream so rows are order-independent
        auto g = mf::substream(ctx.seed, k);
        double sum = 0.0, sumsq = 0.0;
        for (int s = 0; s < mc; ++s) {
            double vmax = 0.0;
            for (int j = 0; j < n; ++j) vmax = std::max(vmax, mf::uniform01(g));
            const double r = slope * vmax;
            sum += r;
            sumsq += r * r;
        }
        const double mean = sum / mc;
        const double se = std::sqrt(std::max(0.0, sumsq / mc - mean * mean) / mc);
        t.rows.push_back(
            {a, slope, mf::spiteful_revenue(n, a), mean, se, resid});
    }
    emit_table(ctx, "spite", t);
}

void run_auction_perturb(RunContext& ctx) {
    const auto eps_list = need_num_vector(ctx.config, "eps_list");
    mf::CollocationConfig cc;
    cc.K = opt_int(ctx.config, "K", cc.K);
    cc.T = opt_int(ctx.config, "T", cc.T);
    cc.tol = opt_num(ctx.config, "tol", cc.tol);
    std::cerr << "[mfield] running revenue perturbation over " << eps_list.size() << " levels\n";
    const auto res = mf::revenue_perturbation_experiment(eps_list, ctx.seed, cc);

    Table t;
    t.columns = {"eps", "model_eps", "revenue", "gap", "valid", "note"};
    t.comments.push_back("base_revenue = " + fmt9(res.base_revenue));
    t.comments.push_back("loglog_slope = " + fmt9(res.slope));
    int valid = 0;
    for (const auto& row : res.rows) {
        valid += row.valid ? 1 : 0;
        t.rows.push_back({row.eps, row.model_eps, row.revenue, row.gap, row.valid, row.note});
    }
    emit_table(ctx, "perturb", t);
    if (valid == 0) throw SolverFailure("no perturbation level produced a converged solution");
}

mf::DynAuctionConfig dyn_from_config(const json& j) {
    const int n = opt_int(j, "n", 2);
    const int horizon = opt_int(j, "horizon", 1);
    if (n < 2) throw ValidationError("field 'n' must be >= 2");
    if (horizon < 1) throw ValidationError("field 'horizon' must be >= 1");
    mf::DynAuctionConfig cfg = mf::DynAuctionConfig::uniform_symmetric(n, horizon);
    cfg.s_max = opt_num(j, "s_max", cfg.s_max);
    cfg.initial_budget = opt_num(j, "initial_budget", cfg.s_max);
    cfg.budget_points = opt_int(j, "budget_points", cfg.budget_points);
    cfg.bid_points = opt_int(j, "bid_points", cfg.bid_points);
    cfg.value_nodes = opt_int(j, "value_nodes", cfg.value_nodes);
    cfg.fp_damping = opt_num(j, "fp_damping", cfg.fp_damping);
    cfg.fp_tol = opt_num(j, "fp_tol", cfg.fp_tol);
    cfg.fp_max_rounds = opt_int(j, "fp_max_rounds", cfg.fp_max_rounds);
    if (cfg.initial_budget < 0.0 || cfg.initial_budget > cfg.s_max)
        throw ValidationError("field 'initial_budget' must lie in [0, s_max]");
    if (j.contains("eps")) {
        try {
            cfg = mf::perturb_config(cfg, need_num(j, "eps"));
        } catch (const std::exception& e) {
            throw ValidationError(std::string("field 'eps': ") + e.what());
        }
    }
    return cfg;
}

void run_dyn_auction(RunContext& ctx) {
    const mf::DynAuctionConfig cfg = dyn_from_config(ctx.config);
    std::cerr << "[mfield] value iteration: n=" << cfg.n << " horizon=" << cfg.horizon << "\n";
    const mf::ValueTable table = mf::value_iteration(cfg);

    Record rec = {{"n", cfg.n},
                  {"horizon", cfg.horizon},
                  {"initial_budget", cfg.initial_budget},
                  {"flow_revenue", mf::expected_revenue_flow(cfg, table)},
                  {"fixed_point_converged", table.fixed_point_converged},
                  {"fixed_point_residual", table.fixed_point_residual},
                  {"fixed_point_rounds", table.fixed_point_rounds}};
    for (int j = 0; j < cfg.n; ++j)
        rec.emplace_back("value0_" + std::to_string(j + 1),
                         table.value0(j, cfg.initial_budget));

    const int episodes = opt_int(ctx.config, "episodes", 0);
    if (episodes > 0) {
        std::cerr << "[mfield] simulating " << episodes << " episodes\n";
        const auto st = mf::simulate_play(cfg, table, episodes, ctx.seed);
        rec.emplace_back("sim_revenue", st.revenue_mean);
        rec.emplace_back("sim_revenue_ci", st.revenue_ci);
        rec.emplace_back("episodes", st.episodes);
    }
    emit_record(ctx, "dyn_summary", rec);

    // policy curves at the initial budget, one block per period and bidder
    Table pol;
    pol.columns = {"t", "j", "v", "bid"};
    const auto& vg = table.value_grid;
    for (int t = 0; t < cfg.horizon; ++t)
        for (int j = 0; j < cfg.n; ++j)
            for (double v : vg)
                pol.rows.push_back({t, j + 1, v, table.policy_bid(j, t, v, cfg.initial_budget)});
    ctx.writer.write("dyn_policy.csv", table_csv(ctx, pol));

    if (!table.fixed_point_converged)
        throw SolverFailure("belief fixed point stalled at residual " +
                            fmt9(table.fixed_point_residual));
}

void run_dyn_perturb(RunContext& ctx) {
    const auto eps_list = need_num_vector(ctx.config, "eps_list");
    const int episodes = opt_int(ctx.config, "episodes", 0);
    mf::DynAuctionConfig base =
        mf::DynAuctionConfig::uniform_symmetric(opt_int(ctx.config, "n", 2),
                                                opt_int(ctx.config, "horizon", 1));
    std::cerr << "[mfield] dynamic revenue perturbation over " << eps_list.size()
              << " levels\n";
    const auto res = mf::revenue_bound_experiment(base, eps_list, episodes, ctx.seed);

    Table t;
    t.columns = {"eps", "flow_gap", "sim_gap", "sim_ci", "valid", "note"};
    t.comments.push_back("base_flow = " + fmt9(res.base_flow));
    t.comments.push_back("flow_slope = " + fmt9(res.flow_slope));
    if (episodes > 0) t.comments.push_back("sim_slope = " + fmt9(res.sim_slope));
    int valid = 0;
    for (const auto& row : res.rows) {
        valid += row.valid ? 1 : 0;
        t.rows.push_back({row.eps, row.flow_gap, row.sim_gap, row.sim_ci, row.valid, row.note});
    }
    emit_table(ctx, "dyn_perturb", t);

    if (ctx.config.contains("scaling")) {
        const json& sj = ctx.config["scaling"];
        std::vector<int> ns;
        for (double v : need_num_vector(sj, "ns")) ns.push_back(static_cast<int>(v));
        const auto rows = mf::scaling_experiment(ns, opt_num(sj, "delta0", 0.5),
                                                 opt_num(sj, "alpha", 1.0),
                                                 opt_int(sj, "horizon", 1));
        Table st;
        st.columns = {"n", "eps", "flow_gap"};
        for (const auto& r : rows) st.rows.push_back({r.n, r.eps, r.flow_gap});
        emit_table(ctx, "scaling", st);
    }
    if (valid == 0) throw SolverFailure("no perturbation level reached the belief fixed point");
}

void write_manifest(RunContext& ctx) {
    json m;
    m["subcommand"] = ctx.subcommand;
    m["config_hash"] = hex64(fnv1a64(ctx.config_bytes));
    m["seed"] = ctx.seed;
    m["format"] = ctx.format;
    m["threads"] = ctx.threads;
    m["versions"] = {{"mfield", kVersion}};
    // wall time is reported on stderr; a fixed value here keeps reruns
    // byte-identical, which the determinism contract requires
    m["wall_time_ms"] = 0;
    json arts;
    for (const auto& [name, hash] : ctx.writer.hashes()) arts[name] = hash;
    m["artifacts"] = std::move(arts);
    ctx.writer.write("manifest.json", m.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mean-field approximation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string format = "csv";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;

    const std::vector<std::tuple<std::string, std::string, std::function<void(RunContext&)>>>
        dispatch = {
            {"approx", "second-order error bound for a payoff at an action profile", run_approx},
            {"games", "equilibrium checks (Nash, strong Nash, ESS) on a symmetric payoff",
             run_games},
            {"queue", "closed-form M/M/n metrics and the heterogeneous approximation", run_queue},
            {"queue-sim", "discrete-event M/M/n simulation with confidence intervals",
             run_queue_sim},
            {"auction-solve", "asymmetric first-price inverse bid curves and revenue",
             run_auction_solve},
            {"auction-spite", "spiteful symmetric bidding closed forms with MC checks",
             run_auction_spite},
            {"auction-perturb", "revenue gap vs heterogeneity for a cubic CDF family",
             run_auction_perturb},
            {"dyn-auction", "budget-constrained dynamic auction value iteration", run_dyn_auction},
            {"dyn-perturb", "dynamic revenue gap scaling in heterogeneity and player count",
             run_dyn_perturb}};

    for (const auto& [name, blurb, fn] : dispatch) {
        CLI::App* sub = app.add_subcommand(name, blurb);
        sub->add_option("--config", config_path, "JSON config path")->required();
        sub->add_option("--out", out_dir, "output directory (default: $MF_OUT_DIR or .)");
        sub->add_option("--seed", seed, "RNG seed, overrides the config value")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_option("--format", format, "csv | json")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--threads", threads, "worker threads for simulations")
            ->check(CLI::PositiveNumber);
    }

    CLI11_PARSE(app, argc, argv);
    const auto t0 = std::chrono::steady_clock::now();

    CLI::App* picked = app.get_subcommands().front();
    const std::string name = picked->get_name();

    if (out_dir.empty()) {
        const char* env = std::getenv("MF_OUT_DIR");
        out_dir = env && *env ? env : ".";
    }

    RunContext ctx{name, {}, {}, 0, format, threads, ArtifactWriter(out_dir)};
    try {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw ValidationError("cannot read config file: " + config_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        ctx.config_bytes = buf.str();
        try {
            ctx.config = json::parse(ctx.config_bytes);
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("config does not parse: ") + e.what());
        }
        if (!ctx.config.is_object()) throw ValidationError("config must be a JSON object");

        ctx.seed = seed_given ? seed : static_cast<std::uint64_t>(opt_num(ctx.config, "seed", 0));

        for (const auto& [sub, blurb, fn] : dispatch)
            if (sub == name) fn(ctx);
        write_manifest(ctx);
    } catch (const ValidationError& e) {
        std::cerr << "[mfield] config error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const SolverFailure& e) {
        write_manifest(ctx);
        std::cerr << "[mfield] non-convergence: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        std::cerr << "[mfield] error: " << e.what() << "\n";
        return kExitValidation;
    }

    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    std::cerr << "[mfield] " << name << " completed in " << ms << " ms\n";
    return 0;
}
