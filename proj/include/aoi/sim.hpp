#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <vector>

#include "aoi/model.hpp"
#include "aoi/policy.hpp"

namespace aoi {

struct SimOptions {
    std::uint64_t slots = 1'000'000;
    std::uint64_t seed = 1;
    double warmup_fraction = 0.01;
    int batches = 50;
    /// Record (state, action) -> next-state counts on the policy's state space.
    bool count_transitions = false;
    /// Per-slot trace rows `slot,a,c,s,q,A_r` when non-null.
    std::ostream* trace = nullptr;
    std::size_t max_queue = 1'000'000;
};

struct SimStats {
    std::uint64_t seed = 0;
    std::uint64_t slots = 0;  // measured slots, after warm-up
    int replications = 1;
    double aoi_mean = 0.0;
    double aoi_ci = 0.0;  // 95% half-width
    double power_mean = 0.0;
    double power_ci = 0.0;

    /// Index W counts outage slots.
    std::vector<std::uint64_t> channel_counts;
    /// Visits per state index of the policy's space (tails aggregated).
    std::vector<std::uint64_t> visits;
    /// key = state * (S + 1) + action, value = target index -> count.
    std::map<std::size_t, std::map<std::size_t, std::uint64_t>> transitions;
};

/// Slot-by-slot simulation of the physical queue under `policy`. Every queued
/// packet's age is tracked; the policy sees the S oldest ages and the
/// receiver-AoI after the slot's arrival and before transmission, which is also
/// when the receiver-AoI is sampled. Receiver-AoI >= M with a non-empty buffer
/// triggers the forced max-rate transmission unless the channel is in outage.
SimStats simulate(const ValidatedModel& model, const Policy& policy, const SimOptions& options);

/// `reps` independent runs with seeds base_seed + i, run concurrently. The
/// pooled CI is the between-replication t interval; reps = 1 returns simulate.
SimStats replicate(const ValidatedModel& model, const Policy& policy, int reps, std::uint64_t base_seed,
                   SimOptions options, unsigned threads = 0);

/// Two-sided 95% Student-t quantile with `dof` degrees of freedom.
double t_quantile_95(int dof);

}  // namespace aoi
