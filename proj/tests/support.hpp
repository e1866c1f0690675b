#pragma once

// Shared fixtures and independent reference computations for the test suites.

#include <cmath>
#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <unordered_map>
#include <unistd.h>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "aoi/kernel.hpp"
#include "aoi/lp.hpp"
#include "aoi/model.hpp"
#include "aoi/policy.hpp"

namespace aoi::test {

/// One channel state and an explicit power table (row 0 = silence).
inline ValidatedModel unit_model(double lambda, int S = 1, std::vector<double> powers = {0.0, 1.0}) {
    SystemConfig cfg;
    cfg.lambda = lambda;
    cfg.max_rate = S;
    cfg.channel.states = 1;
    if (static_cast<int>(powers.size()) != S + 1) {
        powers.assign(1, 0.0);
        for (int s = 1; s <= S; ++s) powers.push_back(std::pow(2.0, s) - 1.0);
    }
    cfg.power_table = std::vector<std::vector<double>>{powers};
    return validate_config(cfg);
}

/// Shannon-inversion model on the default physical parameters.
inline ValidatedModel shannon_model(double lambda, int S, int W) {
    SystemConfig cfg;
    cfg.lambda = lambda;
    cfg.max_rate = S;
    cfg.channel.states = W;
    return validate_config(cfg);
}

inline std::shared_ptr<const StateSpace> space(int order, int S) {
    return std::make_shared<const StateSpace>(order, S);
}

/// A policy with Dirichlet(1) action distributions on every free (state, omega).
inline Policy random_policy(std::shared_ptr<const StateSpace> sp, int W, std::uint64_t seed) {
    Policy p(sp, W);
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> ex(1.0);
    for (std::size_t i = 0; i < sp->size(); ++i) {
        if (p.is_forced(i)) continue;
        const int k = p.max_feasible_rate(i);
        for (int w = 0; w < W; ++w) {
            std::vector<double> f(sp->rate_cap() + 1, 0.0);
            double sum = 0.0;
            for (int s = 0; s <= k; ++s) sum += f[s] = ex(rng);
            for (int s = 0; s <= k; ++s) f[s] /= sum;
            p.set_distribution(i, w, f);
        }
    }
    return p;
}

/// Dense null-space solve of pi (P - I) = 0, sum pi = 1.
inline std::vector<double> dense_stationary(const std::vector<std::vector<std::pair<std::size_t, double>>>& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, i) -= 1.0;
        for (const auto& [j, p] : rows[i]) A(static_cast<Eigen::Index>(j), i) += p;
    }
    A.row(n).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b(n) = 1.0;
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
    return {x.data(), x.data() + n};
}

/// Chain on the full (untruncated) state set with receiver-AoI clamped at
/// `cap`, built by exploring from the empty state. States with receiver-AoI
/// below the policy's order follow the policy; everything else follows the
/// semi-threshold rule.
struct HardTruncation {
    std::vector<SystemState> states;
    std::vector<double> pi;
    std::vector<double> power_per_state;  // expected power in that state
    double aoi = 0.0;
    double power = 0.0;
};

inline HardTruncation hard_truncation(const Policy& policy, const ChannelModel& channel, const PowerTable& power,
                                      double lambda, int cap) {
    const auto& sp = policy.space();
    const int S = sp.rate_cap();
    const int W = channel.states;
    HardTruncation h;
    std::unordered_map<SystemState, std::size_t, SystemStateHash> index;
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;
    auto intern = [&](const SystemState& s) {
        auto [it, fresh] = index.emplace(s, h.states.size());
        if (fresh) {
            h.states.push_back(s);
            rows.emplace_back();
        }
        return it->second;
    };
    SystemState start;
    start.buffer.assign(S, -1);
    intern(start);
    for (std::size_t i = 0; i < h.states.size(); ++i) {
        const SystemState st = h.states[i];
        const int k = std::min(buffer_occupancy(st), S);
        // Aggregated action law and expected power.
        std::vector<double> act(S + 1, 0.0);
        double pw = 0.0;
        if (k == 0) {
            act[0] = 1.0;
        } else if (st.receiver_aoi >= sp.order()) {
            act[k] = 1.0;
            for (int w = 0; w < W; ++w) pw += channel.alpha[w] * power(w, k);
        } else {
            const auto idx = sp.index_of(st);
            if (!idx) throw std::logic_error("hard truncation: state outside the policy space");
            for (int w = 0; w < W; ++w)
                for (int s = 0; s <= S; ++s) {
                    act[s] += channel.alpha[w] * policy.prob(*idx, w, s);
                    pw += channel.alpha[w] * policy.prob(*idx, w, s) * power(w, s);
                }
        }
        h.power_per_state.push_back(pw);
        std::vector<std::pair<std::size_t, double>> row;
        for (int s = 0; s <= k; ++s) {
            if (act[s] == 0.0) continue;
            for (auto succ : transitions(st, s, lambda)) {
                if (succ.prob == 0.0) continue;
                succ.state.receiver_aoi = std::min(succ.state.receiver_aoi, cap);
                row.emplace_back(intern(succ.state), act[s] * succ.prob);
            }
        }
        rows[i] = std::move(row);
    }
    h.pi = dense_stationary(rows);
    for (std::size_t i = 0; i < h.states.size(); ++i) {
        h.aoi += h.pi[i] * h.states[i].receiver_aoi;
        h.power += h.pi[i] * h.power_per_state[i];
    }
    return h;
}

/// Total-variation distance after folding the hard truncation onto the aggregate-tail space.
inline double tail_tv_distance(const HardTruncation& h, const StateSpace& sp, const std::vector<double>& pi) {
    std::vector<double> folded(sp.size(), 0.0);
    for (std::size_t i = 0; i < h.states.size(); ++i) {
        const auto idx = sp.index_of(h.states[i]);
        if (!idx) throw std::logic_error("hard truncation reached a state the tail space cannot hold");
        folded[*idx] += h.pi[i];
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < sp.size(); ++i) tv += std::abs(folded[i] - pi[i]);
    return 0.5 * tv;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("aoi-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace aoi::test
