#include "aoi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace aoi {

std::vector<ExactSuccessor> brute_case3(const SystemState& from, int rate, const Rational& lambda) {
    const int S = from.rate_cap();
    if (S < 1 || !is_valid_state(from)) throw std::invalid_argument("brute_case3: invalid state " + to_string(from));
    if (buffer_occupancy(from) < S) throw std::invalid_argument("brute_case3: " + to_string(from) + " is not a full-buffer state");
    if (rate < 0 || rate > S) throw std::invalid_argument("brute_case3: rate out of range");
    if (lambda < 0 || lambda > 1) throw std::invalid_argument("brute_case3: lambda outside [0, 1]");
    const int hidden = from.oldest(S);  // slots newer than the S-th oldest packet
    if (hidden > brute_case3_max_age)
        throw std::invalid_argument("brute_case3: A_S = " + std::to_string(hidden) + " exceeds " +
                                    std::to_string(brute_case3_max_age));

    std::vector<int> visible;  // oldest first
    for (int k = 1; k <= S; ++k) visible.push_back(from.oldest(k));
    const int receiver = rate >= 1 ? visible[rate - 1] + 1 : from.receiver_aoi + 1;
    const Rational stay = 1 - lambda;

    std::map<std::vector<int>, Rational> merged;  // key: buffer newest first, then receiver
    for (std::uint32_t mask = 0; mask < (1u << hidden); ++mask) {
        // Queue after service, oldest first, with ages after the slot boundary.
        std::vector<int> queue;
        for (int k = rate; k < S; ++k) queue.push_back(visible[k] + 1);
        Rational p = 1;
        for (int age = hidden - 1; age >= 0; --age) {
            if (mask & (1u << age)) {
                queue.push_back(age + 1);
                p *= lambda;
            } else {
                p *= stay;
            }
        }
        for (int arrival = 0; arrival <= 1; ++arrival) {
            const Rational q = p * (arrival ? lambda : stay);
            if (q == 0) continue;
            std::vector<int> key(S, -1);
            std::vector<int> all = queue;
            if (arrival) all.push_back(0);
            for (int k = 1; k <= S && k <= static_cast<int>(all.size()); ++k) key[S - k] = all[k - 1];
            key.push_back(receiver);
            merged[key] += q;
        }
    }

    std::vector<ExactSuccessor> out;
    for (auto& [key, prob] : merged) {
        SystemState s;
        s.buffer.assign(key.begin(), key.end() - 1);
        s.receiver_aoi = key.back();
        out.push_back({std::move(s), prob});
    }
    return out;
}

namespace {

Eigen::MatrixXd dense_chain(const Policy& policy, const TransitionKernel& kernel, const ChannelModel& channel) {
    require_no_outage(channel, "exact_eval_policy");
    const auto& sp = kernel.space();
    if (policy.space().order() != sp.order() || policy.rate_cap() != sp.rate_cap() ||
        policy.channel_states() != channel.states)
        throw std::invalid_argument("exact_eval_policy: policy does not match kernel/channel dimensions");
    const auto n = static_cast<Eigen::Index>(sp.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < sp.size(); ++i) {
        for (int s = 0; s <= sp.rate_cap(); ++s) {
            double w = 0.0;
            for (int o = 0; o < channel.states; ++o) w += channel.alpha[o] * policy.prob(i, o, s);
            if (w == 0.0) continue;
            const auto* row = kernel.row(i, s);
            if (!row) throw std::invalid_argument("exact_eval_policy: mass on a disallowed action");
            for (const auto& t : row->transitions) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t.target)) += w * t.prob;
        }
    }
    return p;
}

}  // namespace

std::vector<double> exact_stationary(const Policy& policy, const TransitionKernel& kernel,
                                     const ChannelModel& channel) {
    const Eigen::MatrixXd p = dense_chain(policy, kernel, channel);
    const auto n = p.rows();
    Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[n - 1] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-12);
    if (lu.rank() < n) throw ReducibleChainError("exact_eval_policy: balance system is singular");
    const Eigen::VectorXd x = lu.solve(rhs);
    std::vector<double> pi(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) pi[static_cast<std::size_t>(i)] = std::max(x[i], 0.0);
    double total = 0.0;
    for (double v : pi) total += v;
    for (double& v : pi) v /= total;
    return pi;
}

Performance exact_eval_policy(const Policy& policy, const TransitionKernel& kernel, const ChannelModel& channel,
                              const PowerTable& power) {
    const auto pi = exact_stationary(policy, kernel, channel);
    const auto& sp = kernel.space();
    Performance out;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        out.aoi += pi[i] * aoi_coefficient(sp, i, kernel.lambda());
        for (int o = 0; o < channel.states; ++o)
            for (int s = 1; s <= sp.rate_cap(); ++s) out.power += pi[i] * channel.alpha[o] * policy.prob(i, o, s) * power(o, s);
    }
    return out;
}

ScatterResult random_policy_scatter(const TransitionKernel& kernel, const ChannelModel& channel,
                                    const PowerTable& power, double power_cap, int count, std::uint64_t seed) {
    if (count < 0) throw std::invalid_argument("random_policy_scatter: negative count");
    const auto& sp = kernel.space();
    if (sp.size() > scatter_max_states)
        throw std::invalid_argument("random_policy_scatter: " + std::to_string(sp.size()) +
                                    " states exceed the oracle limit of " + std::to_string(scatter_max_states));
    ScatterResult out;
    std::mt19937_64 rng(seed);
    auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };

    for (int id = 0; id < count; ++id) {
        const bool dirichlet = id % 2 == 0;
        Policy policy(kernel.space_ptr(), channel.states);
        for (std::size_t i = 0; i < sp.size(); ++i) {
            if (policy.is_forced(i)) continue;
            const int kmax = policy.max_feasible_rate(i);
            for (int o = 0; o < channel.states; ++o) {
                std::vector<double> f(sp.rate_cap() + 1, 0.0);
                if (dirichlet) {
                    double total = 0.0;
                    for (int s = 0; s <= kmax; ++s) total += f[s] = -std::log(uniform());
                    for (double& v : f) v /= total;
                } else {
                    f[std::min(kmax, static_cast<int>(uniform() * (kmax + 1)))] = 1.0;
                }
                policy.set_distribution(i, o, f);
            }
        }
        try {
            const auto perf = exact_eval_policy(policy, kernel, channel, power);
            out.samples.push_back({id, dirichlet ? "dirichlet" : "deterministic", perf.aoi, perf.power,
                                   perf.power <= power_cap + 1e-12});
        } catch (const ReducibleChainError&) {
            ++out.rejected;
        }
    }

    std::vector<std::size_t> order(out.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = out.samples[a];
        const auto& y = out.samples[b];
        return x.power != y.power ? x.power < y.power : x.aoi < y.aoi;
    });
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : order) {
        if (out.samples[i].aoi < best) {
            best = out.samples[i].aoi;
            out.frontier.push_back(i);
        }
    }
    return out;
}

ValueIterationResult value_iteration(const TransitionKernel& kernel, const ChannelModel& channel,
                                     const PowerTable& power, double mu, const ValueIterationOptions& options) {
    require_no_outage(channel, "value_iteration");
    if (!(mu >= 0.0)) throw std::invalid_argument("value_iteration: multiplier must be non-negative");
    const double tau = options.aperiodicity;
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("value_iteration: aperiodicity must lie in (0, 1]");
    const auto& sp = kernel.space();
    const std::size_t n = sp.size();
    const int W = channel.states;

    std::vector<double> cost(n);
    for (std::size_t i = 0; i < n; ++i) cost[i] = aoi_coefficient(sp, i, kernel.lambda());

    std::vector<double> h(n, 0.0), th(n, 0.0);
    std::vector<std::vector<int>> choice(n, std::vector<int>(W, 0));
    ValueIterationResult out;
    const std::size_t ref = 0;
    for (int it = 1; it <= options.max_iterations; ++it) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < n; ++i) {
            const auto rows = kernel.rows(i);
            double v = cost[i];
            for (int o = 0; o < W; ++o) {
                double best = std::numeric_limits<double>::infinity();
                int arg = rows.front().action;
                for (const auto& row : rows) {
                    double q = mu * power(o, row.action) + (1.0 - tau) * h[i];
                    for (const auto& t : row.transitions) q += tau * t.prob * h[t.target];
                    if (q < best - 1e-13) {
                        best = q;
                        arg = row.action;
                    }
                }
                v += channel.alpha[o] * best;
                choice[i][o] = arg;
            }
            th[i] = v;
            lo = std::min(lo, v - h[i]);
            hi = std::max(hi, v - h[i]);
        }
        out.iterations = it;
        out.span = hi - lo;
        const double offset = th[ref];
        for (std::size_t i = 0; i < n; ++i) h[i] = th[i] - offset;
        if (out.span < options.tolerance * std::max(1.0, std::abs(lo))) {
            out.gain = 0.5 * (lo + hi);
            out.converged = true;
            break;
        }
    }
    if (!out.converged) {
        std::ostringstream os;
        os << "value_iteration: span still " << out.span << " after " << options.max_iterations << " sweeps";
        throw std::runtime_error(os.str());
    }

    Policy greedy(kernel.space_ptr(), W);
    for (std::size_t i = 0; i < n; ++i) {
        if (greedy.is_forced(i)) continue;
        for (int o = 0; o < W; ++o) greedy.set_deterministic(i, o, choice[i][o]);
    }
    out.policy = std::move(greedy);
    return out;
}

LagrangianBound lagrangian_dual(const TransitionKernel& kernel, const ChannelModel& channel,
                                const PowerTable& power, double power_cap, double mu_tolerance) {
    auto dual = [&](double mu) { return value_iteration(kernel, channel, power, mu).gain - mu * power_cap; };
    auto greedy_power = [&](double mu) {
        const auto vi = value_iteration(kernel, channel, power, mu);
        return exact_eval_policy(*vi.policy, kernel, channel, power).power;
    };

    LagrangianBound out;
    double hi = 1.0;
    while (greedy_power(hi) > power_cap + 1e-12) {
        hi *= 2.0;
        if (hi > 1e6) {
            out.feasible = false;
            out.mu = hi;
            out.value = std::numeric_limits<double>::infinity();
            return out;
        }
    }
    double lo = 0.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = dual(x1), f2 = dual(x2);
    while (hi - lo > mu_tolerance * std::max(1.0, hi)) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = dual(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = dual(x1);
        }
    }
    out.mu = 0.5 * (lo + hi);
    out.value = std::max({f1, f2, dual(0.0)});
    return out;
}

}  // namespace aoi
