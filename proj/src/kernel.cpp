#include "aoi/kernel.hpp"

#include <cmath>
#include <functional>
#include <string>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace aoi {

namespace {

/// Visible ages oldest first: (A_1, A_2, ..., A_K).
std::vector<int> visible_oldest_first(const SystemState& s) {
    std::vector<int> v;
    for (auto it = s.buffer.rbegin(); it != s.buffer.rend() && *it >= 0; ++it) v.push_back(*it);
    return v;
}

SystemState make_state(const std::vector<int>& oldest_first, int rate_cap, int receiver) {
    SystemState s{std::vector<int>(rate_cap, -1), receiver};
    for (std::size_t k = 0; k < oldest_first.size(); ++k) s.buffer[rate_cap - 1 - k] = oldest_first[k];
    return s;
}

void check_rate(const SystemState& from, int rate, const char* who) {
    const int k = std::min(buffer_occupancy(from), from.rate_cap());
    if (rate < 0 || rate > k) {
        throw std::invalid_argument(std::string(who) + ": rate " + std::to_string(rate) +
                                    " is infeasible at " + to_string(from));
    }
}

/// Walks the hidden slots from the oldest (age slots - 1) towards age 0 and
/// reports each arrangement of the first `want` hidden packets found.
void visit_hidden_oldest(int slots, int want, double lambda,
                         const std::function<void(const std::vector<int>&, double)>& visit) {
    std::vector<int> picked;
    std::function<void(int, double)> walk = [&](int age, double prob) {
        if (static_cast<int>(picked.size()) == want || age < 0) {
            visit(picked, prob);
            return;
        }
        if (lambda > 0.0) {
            picked.push_back(age);
            walk(age - 1, prob * lambda);
            picked.pop_back();
        }
        if (lambda < 1.0) walk(age - 1, prob * (1.0 - lambda));
    };
    walk(slots - 1, 1.0);
}

/// Generic one-slot law shared by all three cases.
std::vector<Successor> transition_law(const SystemState& from, int rate, double lambda) {
    const int cap = from.rate_cap();
    const auto vis = visible_oldest_first(from);
    const int k = static_cast<int>(vis.size());
    const int receiver = rate >= 1 ? vis[rate - 1] + 1 : from.receiver_aoi + 1;

    std::vector<int> survivors;
    for (int i = rate; i < k; ++i) survivors.push_back(vis[i] + 1);

    std::vector<Successor> out;
    auto emit = [&](std::vector<int> oldest_first, double prob) {
        if (prob == 0.0) return;
        const int room = cap - static_cast<int>(oldest_first.size());
        if (room == 0) {
            out.push_back({make_state(oldest_first, cap, receiver), prob});
            return;
        }
        // The next slot's arrival is visible because ranks are still free.
        if (lambda < 1.0) out.push_back({make_state(oldest_first, cap, receiver), prob * (1.0 - lambda)});
        if (lambda > 0.0) {
            oldest_first.push_back(0);
            out.push_back({make_state(oldest_first, cap, receiver), prob * lambda});
        }
    };

    if (k < cap) {
        emit(survivors, 1.0);
        return out;
    }
    // Full visible buffer: up to `rate` hidden packets move into the visible ranks.
    visit_hidden_oldest(vis.back(), rate, lambda, [&](const std::vector<int>& hidden, double prob) {
        auto next = survivors;
        for (int age : hidden) next.push_back(age + 1);
        emit(std::move(next), prob);
    });
    return out;
}

}  // namespace

std::vector<int> feasible_actions(const SystemState& state, int rate_cap) {
    const int k = std::min(buffer_occupancy(state), rate_cap);
    std::vector<int> actions(k + 1);
    for (int s = 0; s <= k; ++s) actions[s] = s;
    return actions;
}

std::vector<Successor> transitions_case1(const SystemState& from, double lambda) {
    if (buffer_occupancy(from) != 0)
        throw std::invalid_argument("transitions_case1: buffer of " + to_string(from) + " is not empty");
    return transition_law(from, 0, lambda);
}

std::vector<Successor> transitions_case2(const SystemState& from, int rate, double lambda) {
    const int k = buffer_occupancy(from);
    if (k < 1 || k >= from.rate_cap())
        throw std::invalid_argument("transitions_case2: need 1 <= K < S at " + to_string(from));
    check_rate(from, rate, "transitions_case2");
    return transition_law(from, rate, lambda);
}

std::vector<Successor> transitions_case3(const SystemState& from, int rate, double lambda) {
    if (buffer_occupancy(from) != from.rate_cap())
        throw std::invalid_argument("transitions_case3: buffer of " + to_string(from) + " is not full");
    check_rate(from, rate, "transitions_case3");
    return transition_law(from, rate, lambda);
}

std::vector<Successor> transitions(const SystemState& from, int rate, double lambda) {
    check_rate(from, rate, "transitions");
    return transition_law(from, rate, lambda);
}

// ---------------------------------------------------------------------------

TransitionKernel::TransitionKernel(std::shared_ptr<const StateSpace> space, double lambda)
    : space_(std::move(space)), lambda_(lambda) {
    if (!space_) throw std::invalid_argument("build_kernel: null state space");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("build_kernel: lambda outside [0, 1]");

    const auto& sp = *space_;
    const int cap = sp.rate_cap();
    rows_.resize(sp.size());
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const auto& st = sp.state_at(i);
        const int kmax = std::min(sp.occupancy(i), cap);
        std::vector<int> actions;
        if (sp.kind(i) == StateKind::tail_empty) actions = {0};
        else if (sp.kind(i) == StateKind::tail_one) actions = {1};
        else if (sp.level(i) >= sp.order()) actions = {kmax};
        else actions = feasible_actions(st, cap);

        for (int a : actions) {
            ActionRow row{i, a, {}};
            for (const auto& succ : transition_law(st, a, lambda)) {
                const auto target = sp.index_of(succ.state);
                if (!target) {
                    throw std::logic_error("build_kernel: successor " + to_string(succ.state) + " of " +
                                           to_string(st) + " lies outside the truncated space");
                }
                bool merged = false;
                for (auto& t : row.transitions) {
                    if (t.target == *target) {
                        t.prob += succ.prob;
                        merged = true;
                    }
                }
                if (!merged) row.transitions.push_back({*target, succ.prob});
            }
            rows_[i].push_back(std::move(row));
        }
    }
}

const ActionRow* TransitionKernel::row(std::size_t state, int action) const {
    for (const auto& r : rows_.at(state))
        if (r.action == action) return &r;
    return nullptr;
}

std::size_t TransitionKernel::row_count() const noexcept {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
}

std::size_t TransitionKernel::nonzeros() const noexcept {
    std::size_t n = 0;
    for (const auto& rs : rows_)
        for (const auto& r : rs) n += r.transitions.size();
    return n;
}

void TransitionKernel::corrupt_row_for_testing(std::size_t state, int action, double factor) {
    for (auto& r : rows_.at(state)) {
        if (r.action == action && !r.transitions.empty()) {
            r.transitions.front().prob *= factor;
            return;
        }
    }
    throw std::invalid_argument("corrupt_row_for_testing: no such row");
}

// ---------------------------------------------------------------------------

void require_no_outage(const ChannelModel& channel, const char* where) {
    if (channel.alpha_outage > 0.0) {
        throw std::invalid_argument(std::string(where) +
                                    ": channel outage (delta > 0) is only supported by the simulator; "
                                    "the truncated chain needs every forced transmission to happen");
    }
}

PolicyChain policy_chain(const TransitionKernel& kernel, const Policy& policy, const ChannelModel& channel) {
    require_no_outage(channel, "policy_chain");
    const auto& sp = kernel.space();
    if (policy.space().order() != sp.order() || policy.rate_cap() != sp.rate_cap() ||
        policy.channel_states() != channel.states) {
        throw std::invalid_argument("policy_chain: policy does not match kernel/channel dimensions");
    }
    PolicyChain chain;
    chain.size = sp.size();
    chain.rows.resize(sp.size());
    for (std::size_t i = 0; i < sp.size(); ++i) {
        auto& out = chain.rows[i];
        for (const auto& row : kernel.rows(i)) {
            const double w = policy.aggregated(i, row.action, channel);
            if (w == 0.0) continue;
            for (const auto& t : row.transitions) {
                bool merged = false;
                for (auto& o : out) {
                    if (o.target == t.target) {
                        o.prob += w * t.prob;
                        merged = true;
                        break;
                    }
                }
                if (!merged) out.push_back({t.target, w * t.prob});
            }
        }
        double mass = 0.0;
        for (int s = 0; s <= policy.rate_cap(); ++s) {
            const double w = policy.aggregated(i, s, channel);
            if (w > 1e-12 && !kernel.row(i, s)) {
                throw std::invalid_argument("policy_chain: policy puts mass on action " + std::to_string(s) +
                                            " which the kernel does not allow at " + to_string(sp.state_at(i)));
            }
            mass += w;
        }
        if (std::abs(mass - 1.0) > 1e-9)
            throw std::invalid_argument("policy_chain: policy is not a distribution at state " + std::to_string(i));
    }
    return chain;
}

std::size_t closed_class_count(const PolicyChain& chain) {
    // Iterative Tarjan SCC.
    const std::size_t n = chain.size;
    constexpr std::size_t unset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, unset), low(n, 0), comp(n, unset);
    std::vector<char> on_stack(n, 0);
    std::vector<std::size_t> stack;
    std::size_t counter = 0, components = 0;

    struct Frame {
        std::size_t v;
        std::size_t edge;
    };
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unset) continue;
        std::vector<Frame> call{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            auto& f = call.back();
            const auto& edges = chain.rows[f.v];
            if (f.edge < edges.size()) {
                const auto& e = edges[f.edge++];
                if (e.prob <= 0.0) continue;
                const std::size_t w = e.target;
                if (index[w] == unset) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const std::size_t v = f.v;
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = components;
                } while (w != v);
                ++components;
            }
        }
    }
    std::vector<char> leaves(components, 0);
    for (std::size_t v = 0; v < n; ++v)
        for (const auto& e : chain.rows[v])
            if (e.prob > 0.0 && comp[e.target] != comp[v]) leaves[comp[v]] = 1;
    std::size_t closed = 0;
    for (char c : leaves) closed += (c == 0);
    return closed;
}

std::vector<double> stationary_distribution(const TransitionKernel& kernel, const Policy& policy,
                                            const ChannelModel& channel) {
    const auto chain = policy_chain(kernel, policy, channel);
    const std::size_t n = chain.size;
    if (const auto closed = closed_class_count(chain); closed != 1) {
        throw ReducibleChainError("stationary_distribution: chain has " + std::to_string(closed) +
                                  " closed classes");
    }

    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    using SpMat = Eigen::SparseMatrix<double>;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(kernel.nonzeros() + 2 * n);
    const auto last = static_cast<int>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& t : chain.rows[i]) {
            if (static_cast<int>(t.target) == last) continue;
            trip.emplace_back(static_cast<int>(t.target), static_cast<int>(i), t.prob);
        }
        if (static_cast<int>(i) != last) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -1.0);
        trip.emplace_back(last, static_cast<int>(i), 1.0);
    }
    SpMat a(static_cast<int>(n), static_cast<int>(n));
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw ReducibleChainError("stationary_distribution: singular balance system (" + lu.lastErrorMessage() + ")");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<int>(n));
    rhs[last] = 1.0;
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite())
        throw ReducibleChainError("stationary_distribution: solve failed");

    std::vector<double> pi(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pi[i] = x[static_cast<int>(i)] < 0.0 && x[static_cast<int>(i)] > -1e-12 ? 0.0 : x[static_cast<int>(i)];
        if (pi[i] < 0.0) throw std::runtime_error("stationary_distribution: negative probability in solve");
        total += pi[i];
    }
    for (double& p : pi) p /= total;

    // Residual check of pi P = pi.
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& t : chain.rows[i]) next[t.target] += pi[i] * t.prob;
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(next[i] - pi[i]));
    if (residual > 1e-10)
        throw std::runtime_error("stationary_distribution: residual " + std::to_string(residual) + " above 1e-10");
    return pi;
}

}  // namespace aoi
