#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/statespace.hpp"

namespace aoi {

/// Randomized semi-threshold scheduling policy f_T^{omega,s} over a truncated space.
///
/// Storage is dense: one probability vector of length S + 1 per (state, channel
/// state). Regular states at receiver-AoI >= M with a non-empty buffer, and both
/// tails, always carry the forced action (max feasible rate; silence when empty).
class Policy {
public:
    /// Starts from the default rule: max feasible rate everywhere.
    Policy(std::shared_ptr<const StateSpace> space, int channel_states);

    static Policy always_transmit(std::shared_ptr<const StateSpace> space, int channel_states);
    /// Silent wherever allowed; only the forced semi-threshold transmissions remain.
    static Policy never_transmit(std::shared_ptr<const StateSpace> space, int channel_states);
    /// Deterministic: max rate once receiver-AoI reaches `threshold`, silent below.
    static Policy threshold(std::shared_ptr<const StateSpace> space, int channel_states, int threshold);

    const StateSpace& space() const noexcept { return *space_; }
    const std::shared_ptr<const StateSpace>& space_ptr() const noexcept { return space_; }
    int order() const noexcept { return space_->order(); }
    int channel_states() const noexcept { return channel_states_; }
    int rate_cap() const noexcept { return space_->rate_cap(); }

    std::span<const double> distribution(std::size_t state, int omega) const;
    double prob(std::size_t state, int omega, int rate) const { return distribution(state, omega)[rate]; }

    /// Overwrites one (state, omega) distribution. Rejects forced states,
    /// infeasible rates, and vectors that are not probability distributions.
    void set_distribution(std::size_t state, int omega, std::span<const double> probs);
    void set_deterministic(std::size_t state, int omega, int rate);

    /// f_T^s = sum_omega alpha_omega f_T^{omega,s}, the outage mass folded into s = 0.
    double aggregated(std::size_t state, int rate, const ChannelModel& channel) const;

    /// True when the state's action is fixed by the semi-threshold rule or the tail rows.
    bool is_forced(std::size_t state) const noexcept;
    /// Largest feasible rate min(K, S); 0 for an empty buffer.
    int max_feasible_rate(std::size_t state) const noexcept;

    /// Empty when every invariant holds.
    std::vector<std::string> check(double tol = 1e-9) const;

private:
    std::size_t offset(std::size_t state, int omega) const {
        return (state * channel_states_ + static_cast<std::size_t>(omega)) * (rate_cap() + 1);
    }

    std::shared_ptr<const StateSpace> space_;
    int channel_states_;
    std::vector<double> f_;
};

}  // namespace aoi
