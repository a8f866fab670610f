#include "mf/auction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mf/rng.hpp"

namespace mf {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return ys[i] + t * (ys[i + 1] - ys[i]);
}

}  // namespace

double InverseBidSolution::value_at(int j, double b) const {
    return interp(grid, curves[static_cast<std::size_t>(j)], b);
}

double InverseBidSolution::bid_at(int j, double v) const {
    // curves are monotone in b, so invert by searching the value axis
    const auto& c = curves[static_cast<std::size_t>(j)];
    return interp(c, grid, v);
}

double symmetric_bid(const Cdf& F, int n, double v) {
    if (n < 2) throw std::domain_error("symmetric_bid: n >= 2");
    if (v < F.v_low() || v > F.v_high())
        throw std::domain_error("symmetric_bid: value outside support");
    if (v == F.v_low()) return v;
    const double Fv = F.cdf(v);
    if (Fv <= 0.0)
        throw std::domain_error("symmetric_bid: F(v) = 0 above v_low (degenerate support)");
    const auto integrand = [&](double x) { return std::pow(F.cdf(x), n - 1); };
    const double I =
        gauss_kronrod<double, 31>::integrate(integrand, F.v_low(), v, 12, 1e-12);
    return v - I / std::pow(Fv, n - 1);
}

double spiteful_symmetric_bid(int n, double alpha, double v) {
    if (n < 2) throw std::domain_error("spiteful_symmetric_bid: n >= 2");
    if (alpha >= n) throw std::domain_error("spiteful_symmetric_bid: alpha < n required");
    if (v < 0.0 || v > 1.0) throw std::domain_error("spiteful_symmetric_bid: v in [0,1]");
    return (n - 1) / (n - alpha) * v;
}

double spiteful_ode_residual(int n, double alpha, double v) {
    const double bprime = (n - 1) / (n - alpha);  // closed form is linear in v
    const double b = bprime * v;
    return b - v * (1.0 - (1.0 - alpha) / (n - 1) * bprime);
}

double spiteful_revenue(int n, double alpha) {
    if (n < 2) throw std::domain_error("spiteful_revenue: n >= 2");
    return static_cast<double>(n) * (n - 1) / ((n - alpha) * (n + 1));
}

std::vector<double> ode_rhs(const ValuationModel& vm, double b, const std::vector<double>& v) {
    if (static_cast<int>(v.size()) != vm.n) throw std::invalid_argument("ode_rhs: size mismatch");
    double sum_inv = 0.0;
    for (double vj : v) {
        if (vj <= b) throw std::domain_error("ode_rhs: v_j <= b hits the singularity");
        sum_inv += 1.0 / (vj - b);
    }
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double f = vm.cdfs[j]->pdf(v[j]);
        if (!(f > 0.0)) throw std::domain_error("ode_rhs: vanishing density f_j(v_j)");
        const double F = vm.cdfs[j]->cdf(v[j]);
        out[j] = F / f * (sum_inv / (vm.n - 1) - 1.0 / (v[j] - b));
    }
    return out;
}

double solution_residual(const ValuationModel& vm, const InverseBidSolution& sol) {
    // Recomputes the first-order-condition defect from the sampled curves with
    // centred slopes; used as an implementation-independent diagnostic.
    const std::size_t m = sol.grid.size();
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double b = sol.grid[i];
        bool usable = true;
        std::vector<double> slope(sol.curves.size()), F(sol.curves.size()),
            f(sol.curves.size());
        for (std::size_t j = 0; j < sol.curves.size(); ++j) {
            slope[j] = (sol.curves[j][i + 1] - sol.curves[j][i - 1]) /
                       (sol.grid[i + 1] - sol.grid[i - 1]);
            F[j] = vm.cdfs[j]->cdf(sol.curves[j][i]);
            f[j] = vm.cdfs[j]->pdf(sol.curves[j][i]);
            if (F[j] < 1e-6) usable = false;  // bottom-of-support guard
        }
        if (!usable) continue;
        for (std::size_t j = 0; j < sol.curves.size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < sol.curves.size(); ++k)
                if (k != j) s += f[k] / F[k] * slope[k];
            worst = std::max(worst, std::abs(1.0 + (b - sol.curves[j][i]) * s));
        }
    }
    return worst;
}

RevenueEstimate seller_revenue(const ValuationModel& vm, const InverseBidSolution& sol,
                               int mc_samples, std::uint64_t seed) {
    if (mc_samples < 1) throw std::invalid_argument("seller_revenue: mc_samples >= 1");
    RevenueEstimate out;

    std::mt19937_64 g = substream(seed, 0);
    double s1 = 0.0, s2 = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
        double best = sol.b_low;
        for (int j = 0; j < vm.n; ++j) {
            const double v = vm.cdfs[static_cast<std::size_t>(j)]->quantile(uniform01(g));
            best = std::max(best, sol.bid_at(j, v));
        }
        s1 += best;
        s2 += best * best;
    }
    out.mc = s1 / mc_samples;
    const double var = std::max(0.0, s2 / mc_samples - out.mc * out.mc);
    out.mc_se = std::sqrt(var / mc_samples);

    // Flow route: E[max bid] = b_low + int (1 - prod_j F_j(v_j(b))) db.
    // Composite 3-point Gauss per grid cell; the curves are piecewise linear,
    // so the integrand is smooth inside each cell.
    double flow = sol.b_low;
    for (std::size_t i = 0; i + 1 < sol.grid.size(); ++i) {
        const double a = sol.grid[i], b = sol.grid[i + 1];
        const auto tail = [&](double x) {
            double prod = 1.0;
            for (int j = 0; j < vm.n; ++j)
                prod *= vm.cdfs[static_cast<std::size_t>(j)]->cdf(sol.value_at(j, x));
            return 1.0 - prod;
        };
        flow += gauss<double, 3>::integrate(tail, a, b);
    }
    out.flow = flow;
    return out;
}

double symmetric_revenue_quadrature(const Cdf& F, int n) {
    const auto integrand = [&](double v) {
        return symmetric_bid(F, n, v) * n * std::pow(F.cdf(v), n - 1) * F.pdf(v);
    };
    return gauss_kronrod<double, 31>::integrate(integrand, F.v_low(), F.v_high(), 10, 1e-10);
}

}  // namespace mf
