#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "aoi/kernel.hpp"
#include "aoi/lp.hpp"
#include "aoi/model.hpp"
#include "aoi/policy.hpp"

namespace aoi {

using Rational = boost::multiprecision::cpp_rational;

struct ExactSuccessor {
    SystemState state;
    Rational prob;
};

inline constexpr int brute_case3_max_age = 14;

/// Exhaustive one-slot transition law for a full visible buffer: every subset
/// of the A_S hidden slots times the next-slot arrival, in exact arithmetic.
/// Successors are merged and sorted by state.
std::vector<ExactSuccessor> brute_case3(const SystemState& from, int rate, const Rational& lambda);

/// Dense direct solve of pi P = pi, independent of the sparse path.
Performance exact_eval_policy(const Policy& policy, const TransitionKernel& kernel, const ChannelModel& channel,
                              const PowerTable& power);
std::vector<double> exact_stationary(const Policy& policy, const TransitionKernel& kernel,
                                     const ChannelModel& channel);

struct PolicySample {
    int id = 0;
    std::string kind;  // "dirichlet" or "deterministic"
    double aoi = 0.0;
    double power = 0.0;
    bool feasible = false;
};

struct ScatterResult {
    std::vector<PolicySample> samples;
    /// Indices into `samples` of the lower-left Pareto frontier, by increasing power.
    std::vector<std::size_t> frontier;
    /// Draws whose chain had several closed classes and were skipped.
    int rejected = 0;
};

inline constexpr std::size_t scatter_max_states = 400;

/// `count` random policies on the kernel's space: even ids draw Dirichlet(1)
/// action distributions per (state, omega), odd ids draw a uniformly random
/// deterministic action table. Each is evaluated exactly.
ScatterResult random_policy_scatter(const TransitionKernel& kernel, const ChannelModel& channel,
                                    const PowerTable& power, double power_cap, int count, std::uint64_t seed);

struct ValueIterationResult {
    double gain = 0.0;  // optimal average of AoI + mu * power
    int iterations = 0;
    double span = 0.0;
    bool converged = false;
    std::optional<Policy> policy;  // greedy, deterministic per (state, omega)
};

struct ValueIterationOptions {
    /// Stop once span(T h - h) < tolerance * max(1, |gain|).
    double tolerance = 1e-9;
    int max_iterations = 2'000'000;
    double aperiodicity = 0.5;  // P -> tau P + (1 - tau) I
};

/// Relative value iteration for the average-cost MDP on the truncated space
/// with per-slot cost receiver-AoI + mu * power.
ValueIterationResult value_iteration(const TransitionKernel& kernel, const ChannelModel& channel,
                                     const PowerTable& power, double mu = 0.0,
                                     const ValueIterationOptions& options = {});

/// Unconstrained minimum AoI (mu = 0).
inline ValueIterationResult value_iteration_unconstrained(const TransitionKernel& kernel,
                                                          const ChannelModel& channel, const PowerTable& power,
                                                          const ValueIterationOptions& options = {}) {
    return value_iteration(kernel, channel, power, 0.0, options);
}

struct LagrangianBound {
    double value = 0.0;  // max over mu of g(mu) - mu P_c
    double mu = 0.0;
    bool feasible = true;
};

/// Dual of the power-constrained problem by golden-section search over mu.
LagrangianBound lagrangian_dual(const TransitionKernel& kernel, const ChannelModel& channel,
                                const PowerTable& power, double power_cap, double mu_tolerance = 1e-9);

}  // namespace aoi
