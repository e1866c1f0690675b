#include "aoi/statespace.hpp"

#include <sstream>
#include <stdexcept>

namespace aoi {

std::string to_string(const SystemState& state) {
    std::ostringstream os;
    os << '(';
    for (int a : state.buffer) os << a << ',';
    os << state.receiver_aoi << ')';
    return os.str();
}

std::size_t SystemStateHash::operator()(const SystemState& s) const noexcept {
    std::size_t h = static_cast<std::size_t>(s.receiver_aoi) * 0x9E3779B97F4A7C15ull;
    for (int a : s.buffer) {
        h ^= static_cast<std::size_t>(a + 1) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    }
    return h;
}

int buffer_occupancy(const SystemState& state) {
    int k = 0;
    for (int a : state.buffer) k += (a >= 0);
    return k;
}

bool is_valid_state(std::span<const int> ages) {
    if (ages.size() < 2) return false;
    const auto buffer = ages.first(ages.size() - 1);
    const int receiver = ages.back();
    if (receiver < 0) return false;
    bool seen_packet = false;
    int prev = -1;
    for (int a : buffer) {
        if (a < -1) return false;
        if (a == -1) {
            if (seen_packet) return false;  // placeholder right of a real age
            continue;
        }
        if (seen_packet && a <= prev) return false;
        seen_packet = true;
        prev = a;
    }
    if (seen_packet && prev >= receiver) return false;
    if (receiver == 0 && seen_packet) return false;
    return true;
}

bool is_valid_state(const SystemState& state) {
    std::vector<int> flat(state.buffer);
    flat.push_back(state.receiver_aoi);
    return is_valid_state(std::span<const int>(flat));
}

std::vector<SystemState> enumerate_level(int receiver_aoi, int rate_cap) {
    if (receiver_aoi < 0 || rate_cap < 1)
        throw std::invalid_argument("enumerate_level: receiver-AoI must be >= 0 and rate cap >= 1");

    if (rate_cap == 1) {
        std::vector<SystemState> level;
        level.reserve(receiver_aoi + 1);
        for (int a = -1; a < receiver_aoi; ++a) level.push_back({{a}, receiver_aoi});
        return level;
    }
    if (receiver_aoi == 0) return {{std::vector<int>(rate_cap, -1), 0}};

    std::vector<SystemState> level = enumerate_level(receiver_aoi - 1, rate_cap);
    for (auto& s : level) s.receiver_aoi += 1;
    for (auto& s : enumerate_level(receiver_aoi - 1, rate_cap - 1)) {
        SystemState ext;
        ext.buffer = std::move(s.buffer);
        ext.buffer.push_back(s.receiver_aoi);
        ext.receiver_aoi = receiver_aoi;
        level.push_back(std::move(ext));
    }
    return level;
}

StateSpace::StateSpace(int order, int rate_cap, std::size_t max_states)
    : order_(order), rate_cap_(rate_cap) {
    if (order < 1) throw std::invalid_argument("build_space: order must be >= 1");
    if (rate_cap < 1) throw std::invalid_argument("build_space: rate cap must be >= 1");

    // Level sizes via the recursion first, so the guard fires before allocating.
    std::vector<std::vector<std::size_t>> sizes(order + 1, std::vector<std::size_t>(rate_cap + 1, 0));
    std::size_t total = 2;
    for (int r = 0; r <= order; ++r) {
        for (int s = 1; s <= rate_cap; ++s) {
            if (s == 1) sizes[r][s] = r + 1;
            else if (r == 0) sizes[r][s] = 1;
            else sizes[r][s] = sizes[r - 1][s] + sizes[r - 1][s - 1];
        }
        total += sizes[r][rate_cap];
        if (total > max_states)
            throw std::length_error("build_space: state count exceeds " + std::to_string(max_states));
    }

    states_.reserve(total);
    level_offsets_.reserve(order + 2);
    for (int r = 0; r <= order; ++r) {
        level_offsets_.push_back(states_.size());
        for (auto& s : enumerate_level(r, rate_cap)) {
            levels_.push_back(r);
            states_.push_back(std::move(s));
        }
    }
    level_offsets_.push_back(states_.size());

    SystemState empty{std::vector<int>(rate_cap, -1), order + 1};
    SystemState one = empty;
    one.buffer.back() = 0;
    states_.push_back(empty);
    states_.push_back(one);
    levels_.push_back(order + 1);
    levels_.push_back(order + 1);

    occupancy_.reserve(states_.size());
    index_.reserve(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) {
        occupancy_.push_back(buffer_occupancy(states_[i]));
        if (i < regular_count()) index_.emplace(states_[i], i);
    }
}

StateKind StateSpace::kind(std::size_t index) const noexcept {
    if (index == tail_empty()) return StateKind::tail_empty;
    if (index == tail_one()) return StateKind::tail_one;
    return StateKind::regular;
}

std::optional<std::size_t> StateSpace::index_of(const SystemState& state) const {
    if (state.rate_cap() != rate_cap_) return std::nullopt;
    if (state.receiver_aoi <= order_) {
        auto it = index_.find(state);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    const int k = buffer_occupancy(state);
    if (k == 0) return tail_empty();
    if (k == 1 && state.buffer.back() == 0) return tail_one();
    return std::nullopt;
}

}  // namespace aoi
