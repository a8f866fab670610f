#include "mf/queue_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <thread>

#include "mf/rng.hpp"

namespace mf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RepStats {
    double utilization = 0, p_empty = 0, p_wait = 0, lq = 0, l = 0, wq = 0;
};

struct Customer {
    double arrival;
    double work;  // unit-mean exponential; duration = work / mu(server)
};

// One replication. Exactly one arrival draw, one work draw and one tie draw
// are consumed per customer, in arrival order, so replications with equal
// (seed, rep) but different service rates stay draw-for-draw coupled.
RepStats run_replication(const QueueModel& q, double horizon, std::uint64_t seed, int rep,
                         const SimOptions& opt,
                         std::vector<std::pair<double, double>>* path) {
    const std::size_t n = static_cast<std::size_t>(q.n);
    std::mt19937_64 arrivals = substream(seed, 3 * static_cast<std::uint64_t>(rep) + 1);
    std::mt19937_64 works = substream(seed, 3 * static_cast<std::uint64_t>(rep) + 2);
    std::mt19937_64 ties = substream(seed, 3 * static_cast<std::uint64_t>(rep) + 3);

    const double warmup = opt.warmup_fraction * horizon;
    const double window = horizon - warmup;

    std::vector<double> done(n, kInf);       // per-server completion times
    std::vector<bool> busy(n, false);
    std::deque<Customer> fifo;

    double t = 0.0;
    double next_arrival = q.lambda > 0 ? exponential(arrivals, q.lambda) : kInf;

    double area_q = 0, area_sys = 0, area_busy = 0, time_empty = 0;
    long arrivals_seen = 0, arrivals_blocked = 0;
    double wait_sum = 0;
    long wait_count = 0;

    std::size_t path_next = 0;
    const auto record_path_until = [&](double t_new, std::size_t qlen) {
        if (!path) return;
        const std::size_t pts = static_cast<std::size_t>(opt.path_points);
        while (path_next < pts) {
            const double tp = horizon * static_cast<double>(path_next) /
                              static_cast<double>(pts - 1);
            if (tp >= t_new) break;
            path->emplace_back(tp, static_cast<double>(qlen));
            ++path_next;
        }
    };

    const auto integrate_to = [&](double t_new) {
        const double lo = std::max(t, warmup);
        const double hi = std::min(t_new, horizon);
        record_path_until(t_new, fifo.size());
        if (hi > lo) {
            const double dt = hi - lo;
            std::size_t nbusy = 0;
            for (bool b : busy) nbusy += b ? 1u : 0u;
            area_q += dt * static_cast<double>(fifo.size());
            area_sys += dt * (static_cast<double>(fifo.size()) + static_cast<double>(nbusy));
            area_busy += dt * static_cast<double>(nbusy);
            if (nbusy == 0 && fifo.empty()) time_empty += dt;
        }
        t = t_new;
    };

    const auto start_service = [&](std::size_t server, const Customer& c) {
        busy[server] = true;
        done[server] = t + c.work / q.mu[server];
        if (c.arrival >= warmup) {
            wait_sum += t - c.arrival;
            ++wait_count;
        }
    };

    while (true) {
        std::size_t next_server = n;
        double next_done = kInf;
        for (std::size_t i = 0; i < n; ++i)
            if (done[i] < next_done) {
                next_done = done[i];
                next_server = i;
            }
        const double t_next = std::min(next_arrival, next_done);
        if (t_next > horizon) {
            integrate_to(horizon);
            record_path_until(horizon + 1.0, fifo.size());
            break;
        }
        integrate_to(t_next);

        if (next_arrival <= next_done) {
            // Arrival: consume all three draws unconditionally to keep the
            // streams aligned across coupled runs.
            Customer c{t, exponential(works, 1.0)};
            const double tie = uniform01(ties);
            next_arrival = t + exponential(arrivals, q.lambda);

            std::vector<std::size_t> idle;
            for (std::size_t i = 0; i < n; ++i)
                if (!busy[i]) idle.push_back(i);
            if (t >= warmup) {
                ++arrivals_seen;
                if (idle.empty()) ++arrivals_blocked;
            }
            if (idle.empty()) {
                fifo.push_back(c);
            } else {
                std::size_t pick = idle.front();
                switch (opt.policy) {
                    case IdlePolicy::RandomUniform:
                        pick = idle[std::min(idle.size() - 1,
                                             static_cast<std::size_t>(tie * idle.size()))];
                        break;
                    case IdlePolicy::LowestIndex:
                        pick = idle.front();
                        break;
                    case IdlePolicy::FastestRate: {
                        double best = -1.0;
                        for (std::size_t i : idle)
                            if (q.mu[i] > best) {
                                best = q.mu[i];
                                pick = i;
                            }
                        break;
                    }
                }
                start_service(pick, c);
            }
        } else {
            busy[next_server] = false;
            done[next_server] = kInf;
            if (!fifo.empty()) {
                const Customer c = fifo.front();
                fifo.pop_front();
                start_service(next_server, c);
            }
        }
    }

    RepStats s;
    if (window > 0) {
        s.utilization = area_busy / (window * q.n);
        s.p_empty = time_empty / window;
        s.lq = area_q / window;
        s.l = area_sys / window;
    }
    s.p_wait = arrivals_seen > 0
                   ? static_cast<double>(arrivals_blocked) / static_cast<double>(arrivals_seen)
                   : 0.0;
    s.wq = wait_count > 0 ? wait_sum / static_cast<double>(wait_count) : 0.0;
    return s;
}

MetricStat summarize(std::vector<double> per_rep) {
    MetricStat m;
    m.per_rep = std::move(per_rep);
    const std::size_t r = m.per_rep.size();
    for (double v : m.per_rep) m.mean += v;
    m.mean /= static_cast<double>(r);
    if (r > 1) {
        double ss = 0;
        for (double v : m.per_rep) ss += (v - m.mean) * (v - m.mean);
        const double sd = std::sqrt(ss / static_cast<double>(r - 1));
        m.ci_halfwidth = 1.959963984540054 * sd / std::sqrt(static_cast<double>(r));
    }
    return m;
}

}  // namespace

SimResult simulate_mmn(const QueueModel& q, double horizon, int replications,
                       std::uint64_t seed, const SimOptions& opt) {
    if (!(horizon > 0)) throw std::invalid_argument("simulate_mmn: horizon > 0");
    if (replications < 1) throw std::invalid_argument("simulate_mmn: replications >= 1");
    if (opt.warmup_fraction < 0 || opt.warmup_fraction >= 1)
        throw std::invalid_argument("simulate_mmn: warmup_fraction in [0,1)");

    std::vector<RepStats> stats(static_cast<std::size_t>(replications));
    std::vector<std::pair<double, double>> path;

    const int threads = std::max(1, std::min(opt.threads, replications));
    if (threads == 1) {
        for (int r = 0; r < replications; ++r)
            stats[static_cast<std::size_t>(r)] =
                run_replication(q, horizon, seed, r, opt,
                                (r == 0 && opt.path_points > 1) ? &path : nullptr);
    } else {
        // Static partition; results land by index, so the merge order (and
        // therefore the output) is independent of scheduling.
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w]() {
                for (int r = w; r < replications; r += threads)
                    stats[static_cast<std::size_t>(r)] =
                        run_replication(q, horizon, seed, r, opt,
                                        (r == 0 && opt.path_points > 1) ? &path : nullptr);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::vector<double> util, pe, pw, lq, l, wq;
    for (const RepStats& s : stats) {
        util.push_back(s.utilization);
        pe.push_back(s.p_empty);
        pw.push_back(s.p_wait);
        lq.push_back(s.lq);
        l.push_back(s.l);
        wq.push_back(s.wq);
    }
    SimResult out;
    out.utilization = summarize(std::move(util));
    out.p_empty = summarize(std::move(pe));
    out.p_wait = summarize(std::move(pw));
    out.mean_queue_len = summarize(std::move(lq));
    out.mean_system_len = summarize(std::move(l));
    out.mean_wait = summarize(std::move(wq));
    out.replications = replications;
    out.horizon = horizon;
    out.seed = seed;
    out.sample_path = std::move(path);
    return out;
}

}  // namespace mf
