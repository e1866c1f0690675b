#include "aoi/policy.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aoi {

Policy::Policy(std::shared_ptr<const StateSpace> space, int channel_states)
    : space_(std::move(space)), channel_states_(channel_states) {
    if (!space_) throw std::invalid_argument("Policy: null state space");
    if (channel_states_ < 1) throw std::invalid_argument("Policy: need at least one channel state");
    f_.assign(space_->size() * channel_states_ * (rate_cap() + 1), 0.0);
    for (std::size_t i = 0; i < space_->size(); ++i)
        for (int w = 0; w < channel_states_; ++w) f_[offset(i, w) + max_feasible_rate(i)] = 1.0;
}

Policy Policy::always_transmit(std::shared_ptr<const StateSpace> space, int channel_states) {
    return Policy(std::move(space), channel_states);
}

Policy Policy::never_transmit(std::shared_ptr<const StateSpace> space, int channel_states) {
    return threshold(std::move(space), channel_states, std::numeric_limits<int>::max());
}

Policy Policy::threshold(std::shared_ptr<const StateSpace> space, int channel_states, int threshold) {
    Policy p(std::move(space), channel_states);
    for (std::size_t i = 0; i < p.space().size(); ++i) {
        if (p.is_forced(i) || p.space().level(i) >= threshold) continue;
        for (int w = 0; w < channel_states; ++w) p.set_deterministic(i, w, 0);
    }
    return p;
}

int Policy::max_feasible_rate(std::size_t state) const noexcept {
    return std::min(space_->occupancy(state), rate_cap());
}

bool Policy::is_forced(std::size_t state) const noexcept {
    if (space_->kind(state) != StateKind::regular) return true;
    if (space_->occupancy(state) == 0) return true;
    return space_->level(state) >= space_->order();
}

std::span<const double> Policy::distribution(std::size_t state, int omega) const {
    if (state >= space_->size() || omega < 0 || omega >= channel_states_)
        throw std::out_of_range("Policy::distribution: index out of range");
    return {f_.data() + offset(state, omega), static_cast<std::size_t>(rate_cap() + 1)};
}

void Policy::set_distribution(std::size_t state, int omega, std::span<const double> probs) {
    if (state >= space_->size() || omega < 0 || omega >= channel_states_)
        throw std::out_of_range("Policy::set_distribution: index out of range");
    if (probs.size() != static_cast<std::size_t>(rate_cap() + 1))
        throw std::invalid_argument("Policy::set_distribution: expected S + 1 probabilities");
    if (is_forced(state))
        throw std::invalid_argument("Policy::set_distribution: state " + to_string(space_->state_at(state)) +
                                    " has a forced action");
    double total = 0.0;
    for (std::size_t s = 0; s < probs.size(); ++s) {
        if (!(probs[s] >= 0.0)) throw std::invalid_argument("Policy::set_distribution: negative probability");
        if (static_cast<int>(s) > max_feasible_rate(state) && probs[s] != 0.0)
            throw std::invalid_argument("Policy::set_distribution: mass on an infeasible rate");
        total += probs[s];
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("Policy::set_distribution: probabilities do not sum to 1");
    std::copy(probs.begin(), probs.end(), f_.begin() + static_cast<std::ptrdiff_t>(offset(state, omega)));
}

void Policy::set_deterministic(std::size_t state, int omega, int rate) {
    std::vector<double> probs(rate_cap() + 1, 0.0);
    probs.at(rate) = 1.0;
    set_distribution(state, omega, probs);
}

double Policy::aggregated(std::size_t state, int rate, const ChannelModel& channel) const {
    double v = rate == 0 ? channel.alpha_outage : 0.0;
    for (int w = 0; w < channel_states_; ++w) v += channel.alpha[w] * prob(state, w, rate);
    return v;
}

std::vector<std::string> Policy::check(double tol) const {
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < space_->size(); ++i) {
        const int kmax = max_feasible_rate(i);
        for (int w = 0; w < channel_states_; ++w) {
            const auto d = distribution(i, w);
            double total = 0.0;
            for (int s = 0; s <= rate_cap(); ++s) {
                total += d[s];
                if (d[s] < -tol || (s > kmax && std::abs(d[s]) > tol)) {
                    std::ostringstream os;
                    os << "state " << i << " omega " << w << ": invalid mass " << d[s] << " on rate " << s;
                    problems.push_back(os.str());
                }
            }
            if (std::abs(total - 1.0) > tol) {
                std::ostringstream os;
                os << "state " << i << " omega " << w << ": probabilities sum to " << total;
                problems.push_back(os.str());
            }
            if (is_forced(i) && std::abs(d[kmax] - 1.0) > tol) {
                std::ostringstream os;
                os << "state " << i << " omega " << w << ": forced action " << kmax << " not taken";
                problems.push_back(os.str());
            }
        }
    }
    return problems;
}

}  // namespace aoi
