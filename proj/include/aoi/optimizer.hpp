#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aoi/kernel.hpp"
#include "aoi/lp.hpp"
#include "aoi/model.hpp"
#include "aoi/policy.hpp"

namespace aoi {

enum class SolveStatus { optimal, infeasible, not_converged, solver_failure };

std::string to_string(SolveStatus status);

/// One round of the order loop.
struct OrderIterate {
    int order = 0;
    SimplexStatus status = SimplexStatus::numerical_failure;
    double aoi = 0.0;  // +inf when infeasible at this order
    double power = 0.0;
};

struct OptimalPolicyResult {
    SolveStatus status = SolveStatus::solver_failure;
    double aoi = 0.0;
    double power = 0.0;
    int order = 0;
    /// |A_M - A_{M-1}| at termination; +inf if fewer than two feasible orders.
    double last_increment = 0.0;
    /// A_M never rose by more than 1e-8 between feasible orders.
    bool monotone = true;
    std::vector<OrderIterate> history;
    std::string message;

    std::shared_ptr<const TransitionKernel> kernel;
    std::shared_ptr<const LpProblem> problem;
    OccupationSolution solution;
    std::optional<Policy> policy;
};

struct OrderLoopOptions {
    int first_order = 2;
    int max_order = 30;
};

/// Grows the threshold order M and solves the order-M LP each round until two
/// consecutive feasible optima differ by at most `epsilon`. Orders where the
/// budget is infeasible count as A_M = +inf and the loop continues.
OptimalPolicyResult optimal_policy(const ValidatedModel& model, double power_cap, double epsilon,
                                   const OrderLoopOptions& options = {});
inline OptimalPolicyResult optimal_policy(const ValidatedModel& model) {
    return optimal_policy(model, model.config.power_constraint, model.config.epsilon,
                          {2, model.config.max_order});
}

struct FeasibilityBounds {
    double p0 = 0.0;  // least average power of any policy in the class
    double pm = 0.0;  // least power among AoI-optimal policies
    double aoi_at_pm = 0.0;
    double aoi_at_p0 = 0.0;
    int order = 0;
    bool converged = false;
};

/// Grows M until both P_0 and P_m move by less than `tol` watts.
FeasibilityBounds feasibility_bounds(const ValidatedModel& model, double tol = 1e-6,
                                     const OrderLoopOptions& options = {});

/// The three LP solves at a fixed order: minimum power, minimum AoI, and
/// minimum power subject to the minimum AoI.
struct OrderBounds {
    SimplexStatus status = SimplexStatus::numerical_failure;
    double p0 = 0.0;
    double aoi_at_p0 = 0.0;
    double a_min = 0.0;
    double pm = 0.0;
};
OrderBounds bounds_at_order(const TransitionKernel& kernel, const ValidatedModel& model);

struct TradeoffPoint {
    double power_cap = 0.0;
    SolveStatus status = SolveStatus::solver_failure;
    double aoi = 0.0;
    double power = 0.0;
    int order = 0;
    double power_dual = 0.0;
};

/// One optimal_policy run per budget. Points are independent and solved on up
/// to `threads` workers; the result order follows `power_caps`.
std::vector<TradeoffPoint> tradeoff_sweep(const ValidatedModel& model, const std::vector<double>& power_caps,
                                          double epsilon, const OrderLoopOptions& options = {},
                                          unsigned threads = 0);

}  // namespace aoi
