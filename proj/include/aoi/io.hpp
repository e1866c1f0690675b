#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/kernel.hpp"
#include "aoi/lp.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/oracle.hpp"
#include "aoi/policy.hpp"
#include "aoi/sim.hpp"
#include "aoi/statespace.hpp"

namespace aoi {

/// Shortest round-trip decimal form, so identical inputs give identical bytes.
std::string format_number(double v);

/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// `state,A_S,...,A_1,A_r,omega,action,prob`, one row per feasible action; omega is 1-based.
std::string policy_csv(const Policy& policy);
/// Rebuilds a policy from policy_csv output. S comes from the header and M
/// from the tail rows (receiver-AoI M + 1).
Policy read_policy_csv(const std::filesystem::path& path, int channel_states);

/// `state_index,omega,action,x,pi,f`.
std::string solution_csv(const LpProblem& problem, const OccupationSolution& solution, const Policy& policy);

/// `index,level,A_S,...,A_1,receiver_aoi`.
std::string states_csv(const StateSpace& space);
/// `src_index,action,dst_index,prob`.
std::string kernel_csv(const TransitionKernel& kernel);

struct SweepRow {
    double lambda = 0.0;
    TradeoffPoint point;
};
/// `lambda,P_c,status,A_star,P_achieved,M_star`.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// `seed,slots,aoi_mean,aoi_ci,power_mean,power_ci`.
std::string stats_csv(const std::vector<SimStats>& stats);

/// `sample_id,kind,A,P,feasible`.
std::string scatter_csv(const ScatterResult& scatter);

/// Run manifest: config snapshot, tool version, timestamps, seeds, outputs, status.
class Manifest {
public:
    Manifest(std::string command, const nlohmann::json& config);
    void add_output(const std::filesystem::path& path);
    void add_seed(std::uint64_t seed);
    void set(const std::string& key, nlohmann::json value);
    void write(const std::filesystem::path& dir, const std::string& status);

private:
    nlohmann::json doc_;
};

inline constexpr const char* tool_version = "1.0.0";

}  // namespace aoi
