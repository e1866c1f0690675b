#include "aoi/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

namespace aoi {

double t_quantile_95(int dof) {
    if (dof < 1) throw std::invalid_argument("t_quantile_95: need at least one degree of freedom");
    boost::math::students_t dist(dof);
    return boost::math::quantile(boost::math::complement(dist, 0.025));
}

namespace {

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
        engine_.seed(seq);
    }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

struct BatchAccumulator {
    std::vector<double> aoi, power;
    void finish(SimStats& st, double total_aoi, double total_power, std::uint64_t n) const {
        st.aoi_mean = total_aoi / static_cast<double>(n);
        st.power_mean = total_power / static_cast<double>(n);
        const auto b = static_cast<int>(aoi.size());
        if (b < 2) return;
        auto half_width = [&](const std::vector<double>& v) {
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= b;
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            return t_quantile_95(b - 1) * std::sqrt(ss / (b - 1) / b);
        };
        st.aoi_ci = half_width(aoi);
        st.power_ci = half_width(power);
    }
};

}  // namespace

SimStats simulate(const ValidatedModel& model, const Policy& policy, const SimOptions& options) {
    if (options.slots < 1) throw std::invalid_argument("simulate: need at least one slot");
    if (options.batches < 1) throw std::invalid_argument("simulate: need at least one batch");
    if (!(options.warmup_fraction >= 0.0 && options.warmup_fraction < 1.0))
        throw std::invalid_argument("simulate: warm-up fraction must lie in [0, 1)");
    const auto& ch = model.channel;
    const int S = model.config.max_rate;
    const int W = ch.states;
    if (policy.rate_cap() != S || policy.channel_states() != W)
        throw std::invalid_argument("simulate: policy does not match the model dimensions");

    const auto& sp = policy.space();
    const int order = sp.order();
    const double lambda = model.config.lambda;

    std::vector<double> channel_cdf;
    double acc = ch.alpha_outage;
    for (int w = 0; w < W; ++w) channel_cdf.push_back(acc += ch.alpha[w]);

    Rng rng(options.seed);
    SimStats st;
    st.seed = options.seed;
    st.channel_counts.assign(W + 1, 0);
    if (options.count_transitions) st.visits.assign(sp.size(), 0);

    const auto warmup = static_cast<std::uint64_t>(std::floor(options.warmup_fraction * options.slots));
    const std::uint64_t measured = options.slots - warmup;
    const auto batches = static_cast<std::uint64_t>(std::min<std::uint64_t>(options.batches, measured));
    const std::uint64_t batch_len = measured / batches;
    BatchAccumulator batch;
    double batch_aoi = 0.0, batch_power = 0.0, total_aoi = 0.0, total_power = 0.0;
    std::uint64_t in_batch = 0;

    std::deque<std::int64_t> queue;  // birth slots, oldest first
    std::int64_t last_delivered = -1;
    SystemState state;
    state.buffer.assign(S, -1);

    std::optional<std::size_t> prev_index;
    int prev_action = 0;

    if (options.trace) *options.trace << "slot,a,c,s,q,A_r\n";

    for (std::uint64_t slot = 0; slot < options.slots; ++slot) {
        const auto n = static_cast<std::int64_t>(slot);
        const bool arrival = rng.uniform() < lambda;
        if (arrival) {
            if (queue.size() >= options.max_queue)
                throw std::runtime_error("simulate: queue exceeded " + std::to_string(options.max_queue) +
                                         " packets; the policy is not stable");
            queue.push_back(n);
        }
        const int k = static_cast<int>(std::min<std::size_t>(queue.size(), static_cast<std::size_t>(S)));
        for (int r = 1; r <= S; ++r)
            state.buffer[S - r] = r <= k ? static_cast<int>(n - queue[r - 1]) : -1;
        state.receiver_aoi = static_cast<int>(n - last_delivered);

        std::optional<std::size_t> index;
        if (options.count_transitions || state.receiver_aoi < order) index = sp.index_of(state);
        if (options.count_transitions) {
            if (prev_index && index && slot > warmup)
                ++st.transitions[*prev_index * (S + 1) + prev_action][*index];
            if (index && slot >= warmup) ++st.visits[*index];
        }

        const double u = rng.uniform();
        int omega = 0;
        while (omega < W && u >= channel_cdf[omega]) ++omega;
        if (omega >= W) omega = W - 1;  // rounding at the top of the cdf
        const bool outage = u < ch.alpha_outage;

        int action = 0;
        if (!outage && k > 0) {
            if (state.receiver_aoi >= order) {
                action = k;
            } else {
                if (!index) throw std::logic_error("simulate: visited state " + to_string(state) + " is not in the policy space");
                const auto dist = policy.distribution(*index, omega);
                double v = rng.uniform(), cum = 0.0;
                action = 0;
                for (int s = 0; s <= S; ++s) {
                    cum += dist[s];
                    if (v < cum) {
                        action = s;
                        break;
                    }
                    if (s == S) action = policy.max_feasible_rate(*index);
                }
                if (action > k) throw std::logic_error("simulate: policy chose an infeasible rate");
            }
        }

        if (options.trace)
            *options.trace << slot << ',' << (arrival ? 1 : 0) << ',' << (outage ? 0 : omega + 1) << ',' << action
                           << ',' << queue.size() << ',' << state.receiver_aoi << '\n';

        if (slot >= warmup) {
            const double p = action > 0 ? model.power(omega, action) : 0.0;
            batch_aoi += state.receiver_aoi;
            batch_power += p;
            total_aoi += state.receiver_aoi;
            total_power += p;
            ++st.channel_counts[outage ? W : omega];
            if (++in_batch == batch_len && batch.aoi.size() < batches) {
                batch.aoi.push_back(batch_aoi / static_cast<double>(batch_len));
                batch.power.push_back(batch_power / static_cast<double>(batch_len));
                batch_aoi = batch_power = 0.0;
                in_batch = 0;
            }
        }

        if (action > 0) {
            last_delivered = queue[action - 1];
            queue.erase(queue.begin(), queue.begin() + action);
        }
        prev_index = index;
        prev_action = action;
    }

    st.slots = measured;
    batch.finish(st, total_aoi, total_power, measured);
    return st;
}

SimStats replicate(const ValidatedModel& model, const Policy& policy, int reps, std::uint64_t base_seed,
                   SimOptions options, unsigned threads) {
    if (reps < 1) throw std::invalid_argument("replicate: need at least one replication");
    if (reps == 1) {
        options.seed = base_seed;
        return simulate(model, policy, options);
    }
    options.trace = nullptr;
    std::vector<SimStats> runs(reps);
    std::vector<std::exception_ptr> errors(reps);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < reps; i = next++) {
            SimOptions o = options;
            o.seed = base_seed + static_cast<std::uint64_t>(i);
            try {
                runs[i] = simulate(model, policy, o);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(reps));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    SimStats out;
    out.seed = base_seed;
    out.replications = reps;
    out.channel_counts.assign(runs.front().channel_counts.size(), 0);
    std::vector<double> a, p;
    for (const auto& r : runs) {
        out.slots += r.slots;
        a.push_back(r.aoi_mean);
        p.push_back(r.power_mean);
        for (std::size_t w = 0; w < r.channel_counts.size(); ++w) out.channel_counts[w] += r.channel_counts[w];
        if (!r.visits.empty()) {
            out.visits.resize(r.visits.size(), 0);
            for (std::size_t i = 0; i < r.visits.size(); ++i) out.visits[i] += r.visits[i];
        }
        for (const auto& [key, row] : r.transitions)
            for (const auto& [target, c] : row) out.transitions[key][target] += c;
    }
    auto mean_ci = [&](const std::vector<double>& v, double& mean, double& ci) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= reps;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        ci = t_quantile_95(reps - 1) * std::sqrt(ss / (reps - 1) / reps);
    };
    mean_ci(a, out.aoi_mean, out.aoi_ci);
    mean_ci(p, out.power_mean, out.power_ci);
    return out;
}

}  // namespace aoi
