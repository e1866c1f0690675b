#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "aoi/kernel.hpp"
#include "aoi/model.hpp"
#include "aoi/policy.hpp"
#include "aoi/simplex.hpp"
#include "aoi/statespace.hpp"

namespace aoi {

/// Mean receiver-AoI carried by one unit of stationary mass at `index`.
/// Regular states contribute their level. Inside either tail the receiver-AoI
/// above M is geometric with continuation probability 1 - lambda, starting at
/// M + 1, so both tails weigh M + 1/lambda.
double aoi_coefficient(const StateSpace& space, std::size_t index, double lambda);

enum class LpObjective { aoi, power };

struct LpOptions {
    LpObjective objective = LpObjective::aoi;
    /// Average power budget in watts; +inf drops the power row.
    double power_cap = std::numeric_limits<double>::infinity();
    /// Optional AoI budget, used for the lexicographic min-power solve.
    double aoi_cap = std::numeric_limits<double>::infinity();
};

/// One LP column. Free states get one column per (omega, action); states whose
/// action is fixed (empty buffer, receiver-AoI >= M, tails) get a single column
/// with omega = -1 that carries pi directly.
struct LpVariable {
    std::size_t state = 0;
    int omega = -1;
    int action = 0;
};

struct LpProblem {
    std::shared_ptr<const StateSpace> space;
    double lambda = 0.0;
    int channel_states = 1;
    LpOptions options;

    LinearProgram program;
    std::vector<LpVariable> variables;
    std::vector<std::vector<int>> state_columns;
    std::vector<double> pi_weight;   // contribution of each column to pi of its state
    std::vector<double> power_coef;  // contribution of each column to P
    std::vector<double> aoi_coef;    // per state

    int normalization_row = -1;
    int power_row = -1;
    int aoi_row = -1;
};

/// Occupation-measure LP on the kernel's truncated space.
///
/// x_T^{omega,s} = pi_T f_T^{omega,s}. Balance rows are pi_{T2} = sum over
/// (T1, s) of P(T2 | T1, s) sum_omega alpha_omega x_{T1}^{omega,s}; coupling rows
/// force sum_s x^{omega,s} to be equal across omega; one redundant balance row
/// is dropped in favor of the normalization row.
LpProblem assemble_lp(const TransitionKernel& kernel, const ChannelModel& channel, const PowerTable& power,
                      const LpOptions& options = {});
LpProblem assemble_lp(const TransitionKernel& kernel, const ChannelModel& channel, const PowerTable& power,
                      double power_cap);

struct OccupationSolution {
    SimplexStatus status = SimplexStatus::numerical_failure;
    std::vector<double> x;
    std::vector<double> pi;
    double aoi = 0.0;
    double power = 0.0;
    /// Shadow price of the power budget, -dA/dP_c >= 0; zero without a power row.
    double power_dual = 0.0;
    double primal_residual = 0.0;
    double dual_infeasibility = 0.0;
    int iterations = 0;
    std::string message;

    bool optimal() const noexcept { return status == SimplexStatus::optimal; }
};

OccupationSolution solve_lp(const LpProblem& problem, const SimplexOptions& options = {});

/// Mass below this is treated as unreachable when recovering a policy.
inline constexpr double pi_tolerance = 1e-9;

/// f = x / pi where pi exceeds the tolerance, max feasible rate elsewhere.
Policy recover_policy(const OccupationSolution& solution, const LpProblem& problem);

struct Performance {
    double aoi = 0.0;
    double power = 0.0;
};

/// Average receiver-AoI and power of a policy given its stationary distribution.
Performance evaluate(const TransitionKernel& kernel, const std::vector<double>& pi, const Policy& policy,
                     const ChannelModel& channel, const PowerTable& power);

/// stationary_distribution followed by evaluate.
Performance evaluate_policy(const TransitionKernel& kernel, const Policy& policy, const ChannelModel& channel,
                            const PowerTable& power);

}  // namespace aoi
