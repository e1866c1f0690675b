#include "aoi/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace aoi {

std::string to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::not_converged: return "not-converged";
    case SolveStatus::solver_failure: return "solver-failure";
    }
    return "unknown";
}

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

void check_loop(const OrderLoopOptions& o) {
    if (o.first_order < 1 || o.max_order < o.first_order)
        throw std::invalid_argument("order loop: need 1 <= first_order <= max_order");
}

std::shared_ptr<const TransitionKernel> kernel_at(const ValidatedModel& model, int order) {
    auto space = std::make_shared<const StateSpace>(order, model.config.max_rate);
    return std::make_shared<const TransitionKernel>(space, model.config.lambda);
}

}  // namespace

OptimalPolicyResult optimal_policy(const ValidatedModel& model, double power_cap, double epsilon,
                                   const OrderLoopOptions& options) {
    check_loop(options);
    if (!(epsilon > 0.0)) throw std::invalid_argument("optimal_policy: epsilon must be positive");
    if (!(power_cap > 0.0)) throw std::invalid_argument("optimal_policy: power budget must be positive");

    OptimalPolicyResult out;
    out.last_increment = inf;
    double previous = inf;
    double best_feasible = inf;

    for (int m = options.first_order; m <= options.max_order; ++m) {
        auto kernel = kernel_at(model, m);
        LpOptions lo;
        lo.power_cap = power_cap;
        auto problem = std::make_shared<const LpProblem>(assemble_lp(*kernel, model.channel, model.power, lo));
        auto sol = solve_lp(*problem);

        OrderIterate it{m, sol.status, sol.optimal() ? sol.aoi : inf, sol.optimal() ? sol.power : 0.0};
        out.history.push_back(it);

        if (sol.status != SimplexStatus::optimal && sol.status != SimplexStatus::infeasible) {
            out.status = SolveStatus::solver_failure;
            out.order = m;
            out.message = "LP at order " + std::to_string(m) + ": " + to_string(sol.status) + " " + sol.message;
            return out;
        }

        out.order = m;
        out.kernel = kernel;
        out.problem = problem;
        out.solution = sol;
        if (!sol.optimal()) {
            out.aoi = inf;
            out.power = 0.0;
            out.policy.reset();
            previous = inf;
            continue;
        }
        out.aoi = sol.aoi;
        out.power = sol.power;
        out.policy = recover_policy(sol, *problem);
        if (sol.aoi > best_feasible + 1e-8) out.monotone = false;
        best_feasible = std::min(best_feasible, sol.aoi);

        if (std::isfinite(previous)) {
            out.last_increment = std::abs(sol.aoi - previous);
            if (out.last_increment <= epsilon) {
                out.status = SolveStatus::optimal;
                return out;
            }
        }
        previous = sol.aoi;
    }

    if (!out.policy) {
        out.status = SolveStatus::infeasible;
        out.message = "power budget is below the minimum feasible average power up to order " +
                      std::to_string(options.max_order);
    } else {
        out.status = SolveStatus::not_converged;
        out.message = "order limit " + std::to_string(options.max_order) + " reached; last AoI change " +
                      std::to_string(out.last_increment);
    }
    return out;
}

OrderBounds bounds_at_order(const TransitionKernel& kernel, const ValidatedModel& model) {
    OrderBounds b;
    LpOptions lo;
    lo.objective = LpObjective::power;
    const auto min_power = solve_lp(assemble_lp(kernel, model.channel, model.power, lo));
    if (!min_power.optimal()) {
        b.status = min_power.status;
        return b;
    }
    b.p0 = min_power.power;
    b.aoi_at_p0 = min_power.aoi;

    const auto min_aoi = solve_lp(assemble_lp(kernel, model.channel, model.power, LpOptions{}));
    if (!min_aoi.optimal()) {
        b.status = min_aoi.status;
        return b;
    }
    b.a_min = min_aoi.aoi;

    // Lexicographic second stage: least power among AoI-optimal solutions.
    lo.aoi_cap = min_aoi.aoi + 1e-9 * std::max(1.0, min_aoi.aoi);
    const auto lex = solve_lp(assemble_lp(kernel, model.channel, model.power, lo));
    if (!lex.optimal()) {
        b.status = lex.status;
        return b;
    }
    b.pm = std::max(lex.power, b.p0);
    b.status = SimplexStatus::optimal;
    return b;
}

FeasibilityBounds feasibility_bounds(const ValidatedModel& model, double tol, const OrderLoopOptions& options) {
    check_loop(options);
    FeasibilityBounds out;
    double prev_p0 = inf, prev_pm = inf;
    for (int m = options.first_order; m <= options.max_order; ++m) {
        const auto b = bounds_at_order(*kernel_at(model, m), model);
        if (b.status != SimplexStatus::optimal)
            throw std::runtime_error("feasibility_bounds: LP at order " + std::to_string(m) + " ended " +
                                     to_string(b.status));
        out.p0 = b.p0;
        out.pm = b.pm;
        out.aoi_at_p0 = b.aoi_at_p0;
        out.aoi_at_pm = b.a_min;
        out.order = m;
        if (std::abs(b.p0 - prev_p0) < tol && std::abs(b.pm - prev_pm) < tol) {
            out.converged = true;
            break;
        }
        prev_p0 = b.p0;
        prev_pm = b.pm;
    }
    return out;
}

std::vector<TradeoffPoint> tradeoff_sweep(const ValidatedModel& model, const std::vector<double>& power_caps,
                                          double epsilon, const OrderLoopOptions& options, unsigned threads) {
    if (power_caps.empty()) throw std::invalid_argument("tradeoff_sweep: empty budget list");
    std::vector<TradeoffPoint> points(power_caps.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < power_caps.size(); i = next++) {
            auto& pt = points[i];
            pt.power_cap = power_caps[i];
            try {
                const auto r = optimal_policy(model, power_caps[i], epsilon, options);
                pt.status = r.status;
                pt.aoi = r.aoi;
                pt.power = r.power;
                pt.order = r.order;
                pt.power_dual = r.solution.power_dual;
            } catch (const std::invalid_argument&) {
                pt.status = SolveStatus::infeasible;
                pt.aoi = inf;
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(power_caps.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return points;
}

}  // namespace aoi
