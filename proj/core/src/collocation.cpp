#include "mf/collocation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace mf {

namespace {

// Unknown layout: x = [bbar, mu_{0,0..K}, mu_{1,0..K}, ..., mu_{n-1,0..K}].

struct PolyEval {
    double value;
    double slope;
};

PolyEval eval_curve(const std::vector<double>& x, int j, int K, double b) {
    const double bbar = x[0];
    const double* mu = x.data() + 1 + static_cast<std::size_t>(j) * (K + 1);
    const double u = bbar - b;
    double val = 0.0, slo = 0.0, upow = 1.0;
    for (int k = 0; k <= K; ++k) {
        val += mu[k] * upow;
        if (k >= 1) slo += k * mu[k] * (k == 1 ? 1.0 : std::pow(u, k - 1));
        upow *= u;
    }
    return {bbar - val, slo};  // v = bbar - sum mu u^k; dv/db = sum k mu u^{k-1}
}

void residuals(const ValuationModel& vm, const CollocationConfig& cfg,
               const std::vector<double>& x, Eigen::VectorXd& r, bool* clipped) {
    const int n = vm.n;
    const int K = cfg.K;
    const int T = cfg.T;
    const double bbar = x[0];
    const double sqT = std::sqrt(static_cast<double>(T));
    r.resize(static_cast<Eigen::Index>(T) * n + 2 * n);
    Eigen::Index row = 0;

    std::vector<double> v(static_cast<std::size_t>(n)), s(static_cast<std::size_t>(n)),
        F(static_cast<std::size_t>(n)), f(static_cast<std::size_t>(n));
    for (int t = 0; t < T; ++t) {
        const double b = bbar + (static_cast<double>(t) / T) * (vm.v_low - bbar);
        for (int j = 0; j < n; ++j) {
            const PolyEval pe = eval_curve(x, j, K, b);
            v[static_cast<std::size_t>(j)] = pe.value;
            s[static_cast<std::size_t>(j)] = pe.slope;
            // Evaluate F and f at the nearest in-support point: the families
            // hard-cut the density outside the support and that cliff would
            // stall the line search whenever a curve overshoots by an ulp.
            const double ve = std::clamp(pe.value, vm.v_low + 1e-9 * (vm.v_high - vm.v_low),
                                         vm.v_high);
            double Fj = vm.cdfs[static_cast<std::size_t>(j)]->cdf(ve);
            if (Fj <= 1e-300) {
                Fj = 1e-300;  // degenerate CDF at the eval point; flagged
                if (clipped) *clipped = true;
            }
            F[static_cast<std::size_t>(j)] = Fj;
            f[static_cast<std::size_t>(j)] = vm.cdfs[static_cast<std::size_t>(j)]->pdf(ve);
        }
        for (int j = 0; j < n; ++j) {
            double sum = 0.0;
            for (int k = 0; k < n; ++k)
                if (k != j)
                    sum += f[static_cast<std::size_t>(k)] / F[static_cast<std::size_t>(k)] *
                           s[static_cast<std::size_t>(k)];
            r[row++] = 1.0 + (b - v[static_cast<std::size_t>(j)]) * sum;
        }
    }
    for (int j = 0; j < n; ++j)
        r[row++] = sqT * (eval_curve(x, j, K, bbar).value - vm.v_high);
    for (int j = 0; j < n; ++j)
        r[row++] = sqT * (eval_curve(x, j, K, vm.v_low).value - vm.v_low);
}

}  // namespace

double collocation_objective(const ValuationModel& vm, const CollocationConfig& cfg,
                             const std::vector<double>& coeffs) {
    Eigen::VectorXd r;
    residuals(vm, cfg, coeffs, r, nullptr);
    return r.squaredNorm();
}

std::vector<double> collocation_seed(const ValuationModel& vm, const CollocationConfig& cfg) {
    // Fit the symmetric closed form of the mean CDF: sample (b(v_i), v_i) and
    // solve the linear Vandermonde system for the mu coefficients.
    const Cdf& mean = *vm.mean_cdf;
    const double bbar0 = symmetric_bid(mean, vm.n, vm.v_high);
    const int samples = std::max(4 * (cfg.K + 1), 48);
    std::vector<double> bs, vs;
    for (int i = 1; i <= samples; ++i) {
        const double v = vm.v_low + (vm.v_high - vm.v_low) * i / samples;
        bs.push_back(symmetric_bid(mean, vm.n, v));
        vs.push_back(v);
    }
    Eigen::MatrixXd A(samples, cfg.K + 1);
    Eigen::VectorXd y(samples);
    for (int i = 0; i < samples; ++i) {
        const double u = bbar0 - bs[static_cast<std::size_t>(i)];
        double upow = 1.0;
        for (int k = 0; k <= cfg.K; ++k) {
            A(i, k) = upow;
            upow *= u;
        }
        y(i) = bbar0 - vs[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd mu = A.colPivHouseholderQr().solve(y);
    std::vector<double> x(1 + static_cast<std::size_t>(vm.n) * (cfg.K + 1));
    x[0] = bbar0;
    for (int j = 0; j < vm.n; ++j)
        for (int k = 0; k <= cfg.K; ++k)
            x[1 + static_cast<std::size_t>(j) * (cfg.K + 1) + static_cast<std::size_t>(k)] =
                mu(k);
    return x;
}

InverseBidSolution solve_collocation(const ValuationModel& vm, const CollocationConfig& cfg) {
    if (cfg.K < 1) throw std::invalid_argument("solve_collocation: K >= 1");
    if (cfg.T < cfg.K + 2) throw std::invalid_argument("solve_collocation: T >= K+2");
    const int n = vm.n;
    const std::size_t dim = 1 + static_cast<std::size_t>(n) * (cfg.K + 1);

    std::vector<double> x = cfg.init.empty() ? collocation_seed(vm, cfg) : cfg.init;
    if (x.size() != dim) throw std::invalid_argument("solve_collocation: bad init size");

    Eigen::VectorXd r;
    bool clipped = false;
    residuals(vm, cfg, x, r, &clipped);
    double obj = r.squaredNorm();

    int iter = 0;
    bool stalled = false;
    for (; iter < cfg.max_iter && obj > cfg.tol && !stalled; ++iter) {
        // Forward-difference Jacobian, then a QR least-squares Gauss-Newton
        // step with halving damping.
        Eigen::MatrixXd J(r.size(), static_cast<Eigen::Index>(dim));
        Eigen::VectorXd rp;
        for (std::size_t i = 0; i < dim; ++i) {
            const double h = 1e-7 * std::max(1.0, std::abs(x[i]));
            std::vector<double> xp = x;
            xp[i] += h;
            residuals(vm, cfg, xp, rp, nullptr);
            J.col(static_cast<Eigen::Index>(i)) = (rp - r) / h;
        }
        const Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
        double lam = 1.0;
        bool improved = false;
        for (int halves = 0; halves < 30; ++halves, lam *= 0.5) {
            std::vector<double> xt = x;
            for (std::size_t i = 0; i < dim; ++i) xt[i] += lam * step[static_cast<Eigen::Index>(i)];
            if (xt[0] <= vm.v_low || xt[0] > vm.v_high) continue;  // keep bbar sane
            residuals(vm, cfg, xt, rp, nullptr);
            const double obj_t = rp.squaredNorm();
            if (obj_t < obj) {
                x = std::move(xt);
                r = rp;
                obj = obj_t;
                improved = true;
                break;
            }
        }
        if (!improved || step.norm() * lam < cfg.step_tol) stalled = true;
    }

    clipped = false;
    residuals(vm, cfg, x, r, &clipped);
    obj = r.squaredNorm();

    InverseBidSolution sol;
    sol.method = "collocation";
    sol.b_low = vm.v_low;
    sol.b_high = x[0];
    sol.objective = obj;
    sol.iterations = iter;

    // Dense sampled curves for downstream consumers.
    const int m = 513;
    sol.grid.assign(m, 0.0);
    sol.curves.assign(static_cast<std::size_t>(n), std::vector<double>(m, 0.0));
    for (int i = 0; i < m; ++i) {
        const double b = vm.v_low + (x[0] - vm.v_low) * i / (m - 1);
        sol.grid[static_cast<std::size_t>(i)] = b;
        for (int j = 0; j < n; ++j)
            sol.curves[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                eval_curve(x, j, cfg.K, b).value;
    }

    // Interior first-order-condition defect on the collocation grid (the
    // boundary rows are reported separately).
    double worst = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(cfg.T) * n; ++i)
        worst = std::max(worst, std::abs(r[i]));
    sol.residual = worst;
    sol.boundary_defect = 0.0;
    for (int j = 0; j < n; ++j) {
        sol.boundary_defect = std::max(
            sol.boundary_defect, std::abs(eval_curve(x, j, cfg.K, vm.v_low).value - vm.v_low));
        sol.boundary_defect = std::max(
            sol.boundary_defect, std::abs(eval_curve(x, j, cfg.K, x[0]).value - vm.v_high));
    }
    // Converged when the objective bottomed out, or when the solution is good
    // by the measures downstream code consumes (the raw objective scales with
    // T*n and penalizes fine grids).
    sol.converged =
        !clipped &&
        (obj <= std::max(cfg.tol, 1e-6) || (sol.boundary_defect <= 1e-3 && sol.residual <= 1e-2));
    return sol;
}

}  // namespace mf
