#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace aoi {

/// System-AoI-vector (A_S, ..., A_1, A_r).
///
/// `buffer` is ordered newest first, so buffer.back() is the oldest packet A_1
/// and buffer.front() is A_S. Entry -1 marks an empty rank.
struct SystemState {
    std::vector<int> buffer;
    int receiver_aoi = 0;

    int rate_cap() const noexcept { return static_cast<int>(buffer.size()); }
    /// Age of the k-th oldest packet (k = 1 is the oldest), -1 when absent.
    int oldest(int k) const { return buffer[buffer.size() - static_cast<std::size_t>(k)]; }

    friend bool operator==(const SystemState&, const SystemState&) = default;
};

std::string to_string(const SystemState& state);

struct SystemStateHash {
    std::size_t operator()(const SystemState& s) const noexcept;
};

/// Count of non-placeholder buffer entries. K = S means "at least S packets".
int buffer_occupancy(const SystemState& state);

bool is_valid_state(std::span<const int> ages_then_receiver);
bool is_valid_state(const SystemState& state);

/// The ordered level set for receiver-AoI `receiver_aoi`, built by the
/// level recursion: shifted level (A_r - 1, S) followed by level (A_r - 1, S - 1)
/// extended with a packet of age A_r - 1.
std::vector<SystemState> enumerate_level(int receiver_aoi, int rate_cap);

enum class StateKind { regular, tail_empty, tail_one };

/// Truncated state space of order M: levels 0..M in level order, then the
/// two aggregate tail states that absorb receiver-AoI above M.
class StateSpace {
public:
    static constexpr std::size_t default_max_states = 2'000'000;

    StateSpace(int order, int rate_cap, std::size_t max_states = default_max_states);

    int order() const noexcept { return order_; }
    int rate_cap() const noexcept { return rate_cap_; }
    std::size_t size() const noexcept { return states_.size(); }
    std::size_t regular_count() const noexcept { return states_.size() - 2; }

    std::size_t tail_empty() const noexcept { return states_.size() - 2; }
    std::size_t tail_one() const noexcept { return states_.size() - 1; }
    StateKind kind(std::size_t index) const noexcept;

    /// For tails this is the entry representative with receiver-AoI M + 1.
    const SystemState& state_at(std::size_t index) const { return states_.at(index); }
    int level(std::size_t index) const noexcept { return levels_[index]; }
    int occupancy(std::size_t index) const noexcept { return occupancy_[index]; }

    /// First index and size of a regular level.
    std::size_t level_begin(int level) const { return level_offsets_.at(level); }
    std::size_t level_size(int level) const {
        return level_offsets_.at(level + 1) - level_offsets_.at(level);
    }

    /// Regular states map to themselves; empty or single-fresh-packet states
    /// above the truncation map to the tails; anything else is absent.
    std::optional<std::size_t> index_of(const SystemState& state) const;

private:
    int order_;
    int rate_cap_;
    std::vector<SystemState> states_;
    std::vector<int> levels_;
    std::vector<int> occupancy_;
    std::vector<std::size_t> level_offsets_;
    std::unordered_map<SystemState, std::size_t, SystemStateHash> index_;
};

inline StateSpace build_space(int order, int rate_cap) { return StateSpace(order, rate_cap); }

}  // namespace aoi
