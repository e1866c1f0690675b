#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/policy.hpp"
#include "aoi/statespace.hpp"

namespace aoi {

/// Successor of a one-slot transition before it is mapped onto a state space.
struct Successor {
    SystemState state;
    double prob = 0.0;
};

/// {0, ..., min(K, S)}; {0} for an empty buffer.
std::vector<int> feasible_actions(const SystemState& state, int rate_cap);

/// Empty buffer: the next slot's arrival decides everything.
std::vector<Successor> transitions_case1(const SystemState& from, double lambda);

/// 1 <= K < S packets, all visible. Serving s >= 1 packets sets the
/// receiver-AoI to A_s + 1.
std::vector<Successor> transitions_case2(const SystemState& from, int rate, double lambda);

/// Full visible buffer (K >= S). The A_S slots newer than the S-th oldest packet
/// each hold a hidden packet independently with probability lambda; only the
/// `rate` oldest of them can become visible, so the marginal over those is
/// enumerated directly instead of over all 2^{A_S} patterns.
std::vector<Successor> transitions_case3(const SystemState& from, int rate, double lambda);

/// Dispatches on the buffer occupancy.
std::vector<Successor> transitions(const SystemState& from, int rate, double lambda);

struct Transition {
    std::size_t target = 0;
    double prob = 0.0;
};

struct ActionRow {
    std::size_t source = 0;
    int action = 0;
    std::vector<Transition> transitions;
};

/// Finite semi-threshold chain on a truncated StateSpace. Regular states below
/// the order carry one row per feasible action; at the order, non-empty states
/// only carry the forced max-rate row. Successors above the truncation land on
/// the two aggregate tail states.
class TransitionKernel {
public:
    TransitionKernel(std::shared_ptr<const StateSpace> space, double lambda);

    const StateSpace& space() const noexcept { return *space_; }
    const std::shared_ptr<const StateSpace>& space_ptr() const noexcept { return space_; }
    double lambda() const noexcept { return lambda_; }

    std::span<const ActionRow> rows(std::size_t state) const { return rows_.at(state); }
    /// nullptr when the action is not allowed at `state`.
    const ActionRow* row(std::size_t state, int action) const;
    std::size_t row_count() const noexcept;
    std::size_t nonzeros() const noexcept;

    /// Test hook for fault injection: scales one transition probability.
    void corrupt_row_for_testing(std::size_t state, int action, double factor);

private:
    std::shared_ptr<const StateSpace> space_;
    double lambda_;
    std::vector<std::vector<ActionRow>> rows_;
};

inline TransitionKernel build_kernel(std::shared_ptr<const StateSpace> space, double lambda) {
    return TransitionKernel(std::move(space), lambda);
}

/// The aggregated transition matrix under a policy, as (row, col, value) triplets.
struct PolicyChain {
    std::size_t size = 0;
    std::vector<std::vector<Transition>> rows;
};

PolicyChain policy_chain(const TransitionKernel& kernel, const Policy& policy, const ChannelModel& channel);

class ReducibleChainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stationary distribution of the policy-induced chain by a sparse direct solve.
/// Throws ReducibleChainError if the chain has more than one closed class.
std::vector<double> stationary_distribution(const TransitionKernel& kernel, const Policy& policy,
                                            const ChannelModel& channel);

/// Number of closed communicating classes of a chain.
std::size_t closed_class_count(const PolicyChain& chain);

/// Channel outage forces silence even where the semi-threshold rule requires a
/// transmission, which the finite aggregate-tail chain cannot represent.
void require_no_outage(const ChannelModel& channel, const char* where);

}  // namespace aoi
