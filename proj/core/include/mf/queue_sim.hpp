#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mf/queueing.hpp"

// Discrete-event M/M/n oracle: single FIFO queue, per-server exponential
// services, exponential arrivals. Serves as the ground-truth check for the
// heterogeneous waiting-time approximation.

namespace mf {

enum class IdlePolicy {
    RandomUniform,  // pick uniformly among idle servers (default)
    LowestIndex,
    FastestRate,
};

struct SimOptions {
    IdlePolicy policy = IdlePolicy::RandomUniform;
    double warmup_fraction = 0.1;  // discarded prefix of each replication
    int threads = 1;               // replications run in parallel, merged in order
    int path_points = 0;           // >0: sample (t, queue length) from replication 0
};

struct MetricStat {
    double mean = 0.0;
    double ci_halfwidth = 0.0;      // 95%, normal approximation over replications
    std::vector<double> per_rep;    // replication means, in replication order

    bool contains(double v) const {
        return v >= mean - ci_halfwidth && v <= mean + ci_halfwidth;
    }
};

struct SimResult {
    MetricStat utilization;      // busy-server time fraction, expected rho
    MetricStat p_empty;          // time fraction with an empty system
    MetricStat p_wait;           // fraction of arrivals finding all servers busy
    MetricStat mean_queue_len;   // time-average Lq
    MetricStat mean_system_len;  // time-average L
    MetricStat mean_wait;        // per-customer delay until service start, Wq
    int replications = 0;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::pair<double, double>> sample_path;  // (time, queue length)
};

// Replication r uses substreams derived from (seed, r) only, so runs with
// different service rates but equal seeds consume identical arrival, work and
// tie-break draws: the common-random-numbers coupling used by the
// heterogeneity experiments. Fixed seed implies bit-identical output.
SimResult simulate_mmn(const QueueModel& q, double horizon, int replications,
                       std::uint64_t seed, const SimOptions& opt = {});

}  // namespace mf
