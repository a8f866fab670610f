#pragma once

#include <string>
#include <vector>

// M/M/n waiting-time machinery: Erlang-C, the symmetric closed form
// WT = C / (n*mbar - lambda), and the second-order heterogeneous
// approximation (symmetric value + O(eps^2) error, validated by simulation).

namespace mf {

struct QueueModel {
    int n = 1;
    double lambda = 0.0;
    std::vector<double> mu;  // per-server service rates
    double mbar = 0.0;       // mean service rate
    double rho = 0.0;        // lambda / (n * mbar)
    double epsilon = 0.0;    // max_i |mu_i - mbar|

    // Throws std::domain_error unless 0 < rho < 1 and all rates positive.
    static QueueModel make(double lambda, std::vector<double> mu);
    bool symmetric() const { return epsilon == 0.0; }
};

struct HeterogeneousWt {
    double approximation = 0.0;  // symmetric WT at mbar
    double epsilon = 0.0;
    std::string note;            // records the O(eps^2) caveat / load warning
};

// Probability an arrival finds all n servers busy, via the Erlang-B term
// recurrence (no explicit factorials).
double erlang_c(int n, double rho);

// Closed-form queueing metrics for the symmetric system.
double waiting_time_symmetric(const QueueModel& q);      // Wq = C/(n*mbar - lambda)
double p_empty_mmn(int n, double rho);                   // P(system empty)
double mean_queue_len_mmn(int n, double rho);            // Lq = C*rho/(1-rho)
double mean_system_len_mmn(int n, double rho);           // L = Lq + n*rho

// Symmetric value at mbar plus the heterogeneity gap; the true heterogeneous
// WT has no closed form, so the quality statement is only WT = approx + O(eps^2).
HeterogeneousWt waiting_time_heterogeneous(const QueueModel& q);

}  // namespace mf
