#include "mf/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mf {

QueueModel QueueModel::make(double lambda, std::vector<double> mu) {
    if (mu.empty()) throw std::domain_error("QueueModel: need at least one server");
    // lambda == 0 is admitted so the simulator's no-traffic sanity case works;
    // the analytic ops still require rho > 0.
    if (lambda < 0) throw std::domain_error("QueueModel: lambda must be nonnegative");
    QueueModel q;
    q.n = static_cast<int>(mu.size());
    q.lambda = lambda;
    q.mu = std::move(mu);
    double s = 0.0;
    for (double m : q.mu) {
        if (!(m > 0)) throw std::domain_error("QueueModel: service rates must be positive");
        s += m;
    }
    q.mbar = s / q.n;
    q.rho = lambda / (q.n * q.mbar);
    if (q.rho >= 1.0) throw std::domain_error("QueueModel: unstable, need lambda < sum(mu)");
    for (double m : q.mu) q.epsilon = std::max(q.epsilon, std::abs(m - q.mbar));
    return q;
}

double erlang_c(int n, double rho) {
    if (n < 1) throw std::domain_error("erlang_c: n >= 1");
    if (!(rho > 0.0) || rho >= 1.0) throw std::domain_error("erlang_c: need 0 < rho < 1");
    // Erlang-B by the stable recurrence B(k) = a*B(k-1)/(k + a*B(k-1)) with
    // offered load a = n*rho, then C = B / (1 - rho*(1 - B)).
    const double a = n * rho;
    double b = 1.0;
    for (int k = 1; k <= n; ++k) b = a * b / (k + a * b);
    return b / (1.0 - rho * (1.0 - b));
}

double p_empty_mmn(int n, double rho) {
    // P0 = [ sum_{k<n} a^k/k! + a^n/(n!(1-rho)) ]^{-1}, via incremental terms.
    const double a = n * rho;
    double term = 1.0;  // a^k / k!
    double sum = 1.0;
    for (int k = 1; k < n; ++k) {
        term *= a / k;
        sum += term;
    }
    term *= a / n;
    sum += term / (1.0 - rho);
    return 1.0 / sum;
}

double mean_queue_len_mmn(int n, double rho) {
    return erlang_c(n, rho) * rho / (1.0 - rho);
}

double mean_system_len_mmn(int n, double rho) {
    return mean_queue_len_mmn(n, rho) + n * rho;
}

double waiting_time_symmetric(const QueueModel& q) {
    if (!q.symmetric())
        throw std::domain_error(
            "waiting_time_symmetric: heterogeneous rates, use waiting_time_heterogeneous");
    if (q.rho == 0.0) return 0.0;  // nobody arrives, nobody waits
    return erlang_c(q.n, q.rho) / (q.n * q.mbar - q.lambda);
}

HeterogeneousWt waiting_time_heterogeneous(const QueueModel& q) {
    HeterogeneousWt out;
    QueueModel sym = q;
    sym.mu.assign(static_cast<std::size_t>(q.n), q.mbar);
    sym.epsilon = 0.0;
    out.approximation = waiting_time_symmetric(sym);
    out.epsilon = q.epsilon;
    out.note = "symmetric value at mean rate; error is O(epsilon^2), validated by simulation";
    double total_mu = 0.0;
    for (double m : q.mu) total_mu += m;
    if (q.lambda > 0.9 * total_mu)
        out.note += "; WARNING: load above 0.9*sum(mu), second-order regime may not hold";
    return out;
}

}  // namespace mf
