#include "aoi/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aoi {

double aoi_coefficient(const StateSpace& space, std::size_t index, double lambda) {
    if (space.kind(index) == StateKind::regular) return space.level(index);
    if (!(lambda > 0.0)) throw std::invalid_argument("aoi_coefficient: tail weight needs lambda > 0");
    return space.order() + 1.0 / lambda;
}

namespace {

bool fixed_action(const StateSpace& sp, std::size_t i) {
    return sp.kind(i) != StateKind::regular || sp.occupancy(i) == 0 || sp.level(i) >= sp.order();
}

void check_inputs(const TransitionKernel& kernel, const ChannelModel& channel, const PowerTable& power) {
    require_no_outage(channel, "assemble_lp");
    if (channel.states < 1 || static_cast<int>(channel.alpha.size()) != channel.states)
        throw std::invalid_argument("assemble_lp: malformed channel model");
    if (power.channel_states() != channel.states || power.max_rate() != kernel.space().rate_cap())
        throw std::invalid_argument("assemble_lp: power table is " + std::to_string(power.channel_states()) + "x" +
                                    std::to_string(power.max_rate() + 1) + ", expected " +
                                    std::to_string(channel.states) + "x" +
                                    std::to_string(kernel.space().rate_cap() + 1));
}

}  // namespace

LpProblem assemble_lp(const TransitionKernel& kernel, const ChannelModel& channel, const PowerTable& power,
                      const LpOptions& options) {
    check_inputs(kernel, channel, power);
    if (!(options.power_cap > 0.0)) throw std::invalid_argument("assemble_lp: power cap must be positive");
    if (!(options.aoi_cap > 0.0)) throw std::invalid_argument("assemble_lp: AoI cap must be positive");

    const auto& sp = kernel.space();
    const int W = channel.states;
    const std::size_t n = sp.size();

    LpProblem p;
    p.space = kernel.space_ptr();
    p.lambda = kernel.lambda();
    p.channel_states = W;
    p.options = options;
    p.state_columns.resize(n);
    p.aoi_coef.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.aoi_coef[i] = aoi_coefficient(sp, i, kernel.lambda());

    auto& lp = p.program;
    // Balance rows for states 0..n-2; the last one is implied by the others.
    std::vector<int> balance_row(n, -1);
    for (std::size_t i = 0; i + 1 < n; ++i) balance_row[i] = lp.add_row(0.0, RowSense::equal);
    p.normalization_row = lp.add_row(1.0, RowSense::equal);
    if (std::isfinite(options.power_cap)) p.power_row = lp.add_row(options.power_cap, RowSense::less_equal);
    if (std::isfinite(options.aoi_cap)) p.aoi_row = lp.add_row(options.aoi_cap, RowSense::less_equal);

    // Coupling rows (i, omega) for omega >= 1 on free states.
    std::vector<int> coupling_base(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (fixed_action(sp, i) || W == 1) continue;
        coupling_base[i] = lp.rows();
        for (int w = 1; w < W; ++w) lp.add_row(0.0, RowSense::equal);
    }

    auto add = [&](std::size_t state, int omega, int action, double weight, double power_coef,
                   const ActionRow& row) {
        const double obj = options.objective == LpObjective::aoi ? weight * p.aoi_coef[state] : power_coef;
        const int col = lp.add_column(obj);
        for (const auto& t : row.transitions) {
            if (balance_row[t.target] >= 0 && t.prob != 0.0) lp.set(balance_row[t.target], col, weight * t.prob);
        }
        if (balance_row[state] >= 0) {
            // merge with a self-loop entry if present
            auto& entries = lp.columns[col];
            auto it = std::find_if(entries.begin(), entries.end(),
                                   [&](const auto& e) { return e.first == balance_row[state]; });
            if (it != entries.end()) it->second -= weight;
            else lp.set(balance_row[state], col, -weight);
        }
        lp.set(p.normalization_row, col, weight);
        if (p.power_row >= 0 && power_coef != 0.0) lp.set(p.power_row, col, power_coef);
        if (p.aoi_row >= 0 && p.aoi_coef[state] != 0.0) lp.set(p.aoi_row, col, weight * p.aoi_coef[state]);
        if (omega >= 0 && coupling_base[state] >= 0) {
            if (omega >= 1) lp.set(coupling_base[state] + omega - 1, col, 1.0);
            if (omega + 1 < W) lp.set(coupling_base[state] + omega, col, -1.0);
        }
        p.variables.push_back({state, omega, action});
        p.pi_weight.push_back(weight);
        p.power_coef.push_back(power_coef);
        p.state_columns[state].push_back(col);
    };

    for (std::size_t i = 0; i < n; ++i) {
        const auto rows = kernel.rows(i);
        if (fixed_action(sp, i)) {
            if (rows.size() != 1) throw std::logic_error("assemble_lp: fixed-action state with several kernel rows");
            const int a = rows.front().action;
            double pw = 0.0;
            for (int w = 0; w < W; ++w) pw += channel.alpha[w] * power(w, a);
            add(i, -1, a, 1.0, pw, rows.front());
            continue;
        }
        for (int w = 0; w < W; ++w)
            for (const auto& row : rows)
                add(i, w, row.action, channel.alpha[w], channel.alpha[w] * power(w, row.action), row);
    }
    return p;
}

LpProblem assemble_lp(const TransitionKernel& kernel, const ChannelModel& channel, const PowerTable& power,
                      double power_cap) {
    LpOptions o;
    o.power_cap = power_cap;
    return assemble_lp(kernel, channel, power, o);
}

OccupationSolution solve_lp(const LpProblem& problem, const SimplexOptions& options) {
    const auto r = solve_simplex(problem.program, options);
    OccupationSolution sol;
    sol.status = r.status;
    sol.iterations = r.iterations;
    sol.message = r.message;
    sol.primal_residual = r.primal_residual;
    sol.dual_infeasibility = r.dual_infeasibility;
    if (r.status != SimplexStatus::optimal) return sol;

    sol.x = r.x;
    for (double& v : sol.x)
        if (v < 0.0) v = 0.0;
    sol.pi.assign(problem.space->size(), 0.0);
    for (std::size_t c = 0; c < sol.x.size(); ++c) {
        sol.pi[problem.variables[c].state] += problem.pi_weight[c] * sol.x[c];
        sol.power += problem.power_coef[c] * sol.x[c];
    }
    for (std::size_t i = 0; i < sol.pi.size(); ++i) sol.aoi += problem.aoi_coef[i] * sol.pi[i];
    if (problem.power_row >= 0) sol.power_dual = std::max(0.0, -r.duals[problem.power_row]);
    return sol;
}

Policy recover_policy(const OccupationSolution& solution, const LpProblem& problem) {
    if (!solution.optimal()) throw std::invalid_argument("recover_policy: solution is not optimal");
    const auto& sp = *problem.space;
    Policy policy(problem.space, problem.channel_states);
    const int S = sp.rate_cap();
    for (std::size_t i = 0; i < sp.size(); ++i) {
        if (policy.is_forced(i) || solution.pi[i] <= pi_tolerance) continue;
        std::vector<std::vector<double>> f(problem.channel_states, std::vector<double>(S + 1, 0.0));
        for (int c : problem.state_columns[i]) {
            const auto& v = problem.variables[c];
            f[v.omega][v.action] += solution.x[c];
        }
        for (int w = 0; w < problem.channel_states; ++w) {
            double total = 0.0;
            for (double v : f[w]) total += v;
            if (total <= 0.0) continue;  // keep the default rule
            for (double& v : f[w]) v /= total;
            policy.set_distribution(i, w, f[w]);
        }
    }
    return policy;
}

Performance evaluate(const TransitionKernel& kernel, const std::vector<double>& pi, const Policy& policy,
                     const ChannelModel& channel, const PowerTable& power) {
    const auto& sp = kernel.space();
    if (pi.size() != sp.size()) throw std::invalid_argument("evaluate: distribution has the wrong length");
    double total = 0.0;
    for (double v : pi) total += v;
    if (std::abs(total - 1.0) > 1e-8) throw std::invalid_argument("evaluate: distribution is not normalized");

    Performance out;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        if (pi[i] == 0.0) continue;
        out.aoi += pi[i] * aoi_coefficient(sp, i, kernel.lambda());
        for (int w = 0; w < channel.states; ++w)
            for (int s = 1; s <= policy.rate_cap(); ++s)
                out.power += pi[i] * channel.alpha[w] * policy.prob(i, w, s) * power(w, s);
    }
    return out;
}

Performance evaluate_policy(const TransitionKernel& kernel, const Policy& policy, const ChannelModel& channel,
                            const PowerTable& power) {
    return evaluate(kernel, stationary_distribution(kernel, policy, channel), policy, channel, power);
}

}  // namespace aoi
