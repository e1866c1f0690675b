// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "aoi/cli.hpp"
#include "aoi/kernel.hpp"
#include "aoi/lp.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/oracle.hpp"
#include "aoi/sim.hpp"
#include "support.hpp"

using namespace aoi;
namespace fs = std::filesystem;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

ValidatedModel load(const std::string& name) {
    return validate_config(load_config((fs::path(AOI_SOURCE_DIR) / "configs" / name).string()));
}

ValidatedModel with_lambda(const ValidatedModel& m, double lambda) {
    auto cfg = m.config;
    cfg.lambda = lambda;
    return validate_config(cfg);
}

// 1. Every kernel row sums to one.
Outcome kernel_rows() {
    double worst = 0.0;
    std::size_t rows = 0;
    std::string where;
    for (int S = 1; S <= 3; ++S)
        for (int M = 1; M <= 8; ++M)
            for (double lambda : {0.1, 0.25, 0.5, 0.75, 0.9}) {
                const TransitionKernel k(std::make_shared<const StateSpace>(M, S), lambda);
                for (std::size_t i = 0; i < k.space().size(); ++i) {
                    if (k.rows(i).empty()) {
                        worst = inf;
                        where = "state without rows";
                    }
                    for (const auto& row : k.rows(i)) {
                        double sum = 0.0;
                        for (const auto& t : row.transitions) sum += t.prob;
                        ++rows;
                        if (std::abs(sum - 1.0) > worst) {
                            worst = std::abs(sum - 1.0);
                            where = "M=" + std::to_string(M) + " S=" + std::to_string(S);
                        }
                    }
                }
            }
    return {worst <= 1e-12, std::to_string(rows) + " rows, max |sum-1| = " + fmt(worst) + " (" + where + ")"};
}

// 2. Full-buffer law against exhaustive exact enumeration.
Outcome case3_brute() {
    double worst = 0.0;
    std::size_t compared = 0;
    for (int S = 1; S <= 3; ++S) {
        // Buffers with newest age a_S <= 10 and older ages within six slots of it.
        std::vector<std::vector<int>> buffers;
        std::function<void(std::vector<int>, int)> extend = [&](std::vector<int> ages, int lo) {
            if (static_cast<int>(ages.size()) == S) {
                buffers.push_back(ages);
                return;
            }
            for (int a = lo; a <= ages.front() + 6; ++a) {
                auto next = ages;
                next.push_back(a);
                extend(next, a + 1);
            }
        };
        for (int newest = 0; newest <= 10; ++newest) extend({newest}, newest + 1);
        for (const auto& ages : buffers)
            for (int gap : {1, 5}) {
                SystemState st;
                st.buffer = ages;  // newest first
                st.receiver_aoi = ages.back() + gap;
                for (double lambda : {0.1, 0.25, 0.5, 0.75, 0.9}) {
                    const Rational exact_lambda(lambda);
                    for (int s = 0; s <= S; ++s) {
                        std::unordered_map<SystemState, double, SystemStateHash> fast;
                        for (const auto& e : transitions_case3(st, s, lambda)) fast[e.state] += e.prob;
                        double dev = 0.0;
                        std::size_t matched = 0;
                        for (const auto& e : brute_case3(st, s, exact_lambda)) {
                            const auto it = fast.find(e.state);
                            const double p = it == fast.end() ? 0.0 : it->second;
                            matched += it != fast.end();
                            dev = std::max(dev, std::abs(p - e.prob.convert_to<double>()));
                        }
                        std::size_t nonzero = 0;
                        for (const auto& [state, p] : fast) nonzero += p != 0.0;
                        if (matched < nonzero) dev = std::max(dev, 1.0);
                        worst = std::max(worst, dev);
                        ++compared;
                    }
                }
            }
    }
    return {worst <= 1e-14, std::to_string(compared) + " (state, rate, lambda) laws, max deviation " + fmt(worst)};
}

// Pools the smallest expected cells until every cell expects at least five.
double chi_square_p(std::vector<std::pair<double, double>> cells, int& dof) {
    std::sort(cells.begin(), cells.end());
    std::vector<std::pair<double, double>> merged;
    double e = 0.0, o = 0.0;
    for (const auto& [exp, obs] : cells) {
        e += exp;
        o += obs;
        if (e >= 5.0) {
            merged.emplace_back(e, o);
            e = o = 0.0;
        }
    }
    if (e > 0.0) {
        if (merged.empty()) merged.emplace_back(e, o);
        else {
            merged.back().first += e;
            merged.back().second += o;
        }
    }
    dof = static_cast<int>(merged.size()) - 1;
    if (dof < 1) return 1.0;
    double stat = 0.0;
    for (const auto& [exp, obs] : merged) stat += (obs - exp) * (obs - exp) / exp;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

// 3. Simulated transition frequencies against the kernel.
Outcome chi_square() {
    const auto model = test::shannon_model(0.5, 1, 3);
    const auto sp = test::space(6, 1);
    const TransitionKernel k(sp, 0.5);
    const auto policy = test::random_policy(sp, 3, 20240601);
    SimOptions o;
    o.slots = 10'000'000;
    o.seed = 7;
    o.count_transitions = true;
    const auto st = simulate(model, policy, o);

    int tests = 0, failed = 0, states = 0;
    double min_p = 1.0;
    for (std::size_t i = 0; i < sp->size(); ++i) {
        if (st.visits[i] < 10'000) continue;
        ++states;
        for (int a = 0; a <= 1; ++a) {
            const auto found = st.transitions.find(i * 2 + a);
            if (found == st.transitions.end()) continue;
            const auto* row = k.row(i, a);
            if (!row) {
                ++failed;
                continue;
            }
            double n = 0.0;
            for (const auto& [t, c] : found->second) n += static_cast<double>(c);
            std::map<std::size_t, double> expected;
            for (const auto& t : row->transitions) expected[t.target] += t.prob * n;
            std::vector<std::pair<double, double>> cells;
            for (const auto& [t, e] : expected) {
                const auto it = found->second.find(t);
                cells.emplace_back(e, it == found->second.end() ? 0.0 : static_cast<double>(it->second));
            }
            // Any observed target the kernel forbids is an outright failure.
            for (const auto& [t, c] : found->second)
                if (!expected.count(t)) ++failed;
            int dof = 0;
            const double p = chi_square_p(cells, dof);
            if (dof < 1) continue;
            ++tests;
            min_p = std::min(min_p, p);
            if (p < 0.001) ++failed;
        }
    }
    return {failed == 0 && tests > 0, std::to_string(states) + " states visited >= 1e4, " + std::to_string(tests) +
                                          " chi-square tests, min p = " + fmt(min_p) + ", " +
                                          std::to_string(failed) + " rejected at 0.1%"};
}

// 4. Unconstrained LP optimum against relative value iteration.
Outcome lp_vs_vi() {
    double worst = 0.0;
    int configs = 0;
    for (int S : {1, 2})
        for (int W : {1, 3})
            for (double lambda : {0.4, 0.5, 0.6}) {
                const auto model = test::shannon_model(lambda, S, W);
                const TransitionKernel k(test::space(6, S), lambda);
                const auto lp = solve_lp(assemble_lp(k, model.channel, model.power, inf));
                const auto vi = value_iteration_unconstrained(k, model.channel, model.power);
                if (!lp.optimal() || !vi.converged) return {false, "solver did not finish"};
                worst = std::max(worst, std::abs(lp.aoi - vi.gain));
                ++configs;
            }
    return {worst <= 1e-6 && configs >= 5,
            std::to_string(configs) + " configs at M=6, max |A_LP - g_VI| = " + fmt(worst)};
}

// 5. No random policy within the budget beats the LP.
Outcome dominance() {
    const auto model = load("fig3.json");
    const TransitionKernel k(test::space(6, model.config.max_rate), model.config.lambda);
    const auto scatter = random_policy_scatter(k, model.channel, model.power, inf, 1000, 99);
    std::vector<double> powers;
    for (const auto& s : scatter.samples) powers.push_back(s.power);
    std::sort(powers.begin(), powers.end());
    std::string detail = std::to_string(scatter.samples.size()) + " policies;";
    bool ok = scatter.samples.size() + scatter.rejected == 1000 && !scatter.samples.empty();
    for (double q : {0.25, 0.5, 0.75}) {
        const double cap = powers[static_cast<std::size_t>(q * (powers.size() - 1))];
        const auto lp = solve_lp(assemble_lp(k, model.channel, model.power, cap));
        if (!lp.optimal()) return {false, "LP not optimal at P_c=" + fmt(cap)};
        int feasible = 0, below = 0;
        double margin = inf;
        for (const auto& s : scatter.samples) {
            if (s.power > cap) continue;
            ++feasible;
            margin = std::min(margin, s.aoi - lp.aoi);
            if (s.aoi < lp.aoi - 1e-6) ++below;
        }
        ok = ok && below == 0 && feasible > 0;
        detail += " P_c=" + fmt(cap) + ": " + std::to_string(feasible) + " feasible, " + std::to_string(below) +
                  " below A_LP=" + fmt(lp.aoi) + " (min gap " + fmt(margin) + ");";
    }
    return {ok, detail};
}

// 6. LP optimum against Monte Carlo across the tradeoff curve.
Outcome lp_vs_monte_carlo() {
    const auto base = load("fig5.json");
    bool ok = true;
    std::string detail;
    for (double lambda : {0.4, 0.5, 0.6}) {
        const auto model = with_lambda(base, lambda);
        const OrderLoopOptions loop{2, model.config.max_order};
        const auto b = feasibility_bounds(model, 1e-6, loop);
        const double p_ref = std::sqrt(b.pm / 2.9 * b.p0 / 0.7);
        const bool brackets = 0.7 * p_ref <= b.p0 && 2.9 * p_ref >= b.pm;
        ok = ok && brackets;
        detail += "lambda=" + fmt(lambda) + " P_0=" + fmt(b.p0) + " P_m=" + fmt(b.pm) + (brackets ? "" : " (not bracketed)");
        double prev = inf, worst_a = 0.0, worst_p = 0.0;
        int compared = 0, saturated = 0;
        for (int j = 0; j < 5; ++j) {
            const double cap = p_ref * (0.7 + 0.55 * j);
            const auto r = optimal_policy(model, cap, model.config.epsilon, loop);
            if (r.status == SolveStatus::infeasible) {
                // Only budgets under the least feasible power may be infeasible.
                if (cap >= b.p0 * (1 + 1e-9)) ok = false;
                detail += " [" + fmt(cap) + ": infeasible]";
                continue;
            }
            if (!r.policy) {
                ok = false;
                detail += " [" + fmt(cap) + ": " + to_string(r.status) + "]";
                continue;
            }
            if (r.status != SolveStatus::optimal) detail += " [" + fmt(cap) + ": " + to_string(r.status) + " at M=" + std::to_string(r.order) + "]";
            SimOptions o;
            o.slots = 1'250'000;
            const auto sim = replicate(model, *r.policy, 8, 1000 + j, o);
            const double ea = std::abs(sim.aoi_mean - r.aoi) / r.aoi;
            const double ep = std::abs(sim.power_mean - r.power) / std::max(r.power, b.p0);
            worst_a = std::max(worst_a, ea);
            worst_p = std::max(worst_p, ep);
            ++compared;
            if (ea > 0.02 || ep > 0.02) ok = false;
            if (r.aoi > prev + 1e-8) ok = false;
            prev = r.aoi;
            if (cap >= b.pm) {
                ++saturated;
                if (std::abs(r.aoi - b.aoi_at_pm) > 1e-6 * b.aoi_at_pm || r.power > b.pm * (1 + 1e-6)) ok = false;
            }
        }
        if (saturated == 0 || compared < 3) ok = false;
        detail += " -> " + std::to_string(compared) + " simulated, max rel err A " + fmt(worst_a) + " P " +
                  fmt(worst_p) + ", " + std::to_string(saturated) + " saturated; ";
    }
    return {ok, detail};
}

// 7. Order loop on the reference scenario.
Outcome order_loop() {
    const auto model = load("fig4.json");
    const auto r = optimal_policy(model);
    if (!r.policy) return {false, "no policy: " + to_string(r.status)};
    bool ok = r.status == SolveStatus::optimal && r.order <= 20 && r.policy->check().empty();
    const auto& p = *r.policy;
    const auto& sp = p.space();
    const int W = model.channel.states;
    int violations = 0;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        // Semi-threshold: forced states transmit at the max feasible rate.
        if (p.is_forced(i) && p.prob(i, 0, p.max_feasible_rate(i)) != 1.0) ++violations;
        for (int w = 1; w < W; ++w)
            if ((1.0 - p.prob(i, w, 0)) < (1.0 - p.prob(i, w - 1, 0)) - 1e-9) ++violations;
    }
    double prev = inf;
    bool monotone = true;
    for (const auto& h : r.history) {
        if (!std::isfinite(h.aoi)) continue;
        if (h.aoi > prev + 1e-8) monotone = false;
        prev = h.aoi;
    }
    ok = ok && violations == 0 && monotone;
    std::string at45 = "state (4,5) not in space";
    SystemState s45;
    s45.buffer = {4};
    s45.receiver_aoi = 5;
    if (const auto idx = sp.index_of(s45)) {
        at45 = "transmit prob at (4,5) by channel:";
        for (int w = 0; w < W; ++w) at45 += " " + fmt(1.0 - p.prob(*idx, w, 0));
        at45 += ", aggregated " + fmt(1.0 - p.aggregated(*idx, 0, model.channel));
    }
    return {ok, "M*=" + std::to_string(r.order) + " (reference 13), A*=" + fmt(r.aoi, 10) + " P=" + fmt(r.power, 6) +
                    ", " + std::to_string(violations) + " structure violations, A_M " +
                    (monotone ? "non-increasing" : "NOT monotone") + "; " + at45 + " (reference 0.609)"};
}

// 8. Aggregate tails against a hard truncation far above the order.
Outcome tail_exactness() {
    struct Case {
        ValidatedModel model;
        int order;
        std::string name;
        std::function<Policy(std::shared_ptr<const StateSpace>)> make;
    };
    std::vector<Case> cases;
    cases.push_back({test::shannon_model(0.5, 1, 3), 6, "always S=1",
                     [](auto sp) { return Policy::always_transmit(sp, 3); }});
    cases.push_back({test::shannon_model(0.5, 1, 3), 6, "random S=1",
                     [](auto sp) { return test::random_policy(sp, 3, 31); }});
    cases.push_back({test::shannon_model(0.4, 2, 3), 5, "random S=2",
                     [](auto sp) { return test::random_policy(sp, 3, 32); }});
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        const auto sp = test::space(c.order, c.model.config.max_rate);
        const TransitionKernel k(sp, c.model.config.lambda);
        const auto policy = c.make(sp);
        const auto pi = stationary_distribution(k, policy, c.model.channel);
        const auto perf = evaluate(k, pi, policy, c.model.channel, c.model.power);
        const auto hard =
            test::hard_truncation(policy, c.model.channel, c.model.power, c.model.config.lambda, c.order + 60);
        const double tv = test::tail_tv_distance(hard, *sp, pi);
        const double da = std::abs(hard.aoi - perf.aoi), dp = std::abs(hard.power - perf.power);
        ok = ok && tv <= 1e-9 && da <= 1e-8 && dp <= 1e-8;
        detail += c.name + ": TV " + fmt(tv, 3) + " |dA| " + fmt(da, 3) + " |dP| " + fmt(dp, 3) + " (" +
                  std::to_string(hard.states.size()) + " states); ";
    }
    return {ok, detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 9. Repeated sweeps write identical bytes.
Outcome reproducible_sweep() {
    const auto dir = test::temp_dir("acceptance-sweep");
    const auto cfg = (fs::path(AOI_SOURCE_DIR) / "configs" / "fig5.json").string();
    auto sweep = [&](const std::string& out, const std::string& threads) {
        const std::vector<std::string> args{"aoi", "sweep", cfg, "--pc-grid", "0.8:2.0:0.2", "--lambda-list",
                                            "0.4,0.6", "--seed", "5", "--threads", threads, "--out", out};
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream sink_out, sink_err;
        return run_cli(static_cast<int>(argv.size()), argv.data(), sink_out, sink_err);
    };
    if (sweep((dir / "a").string(), "4") != 0 || sweep((dir / "b").string(), "1") != 0)
        return {false, "sweep exited nonzero"};
    int files = 0, differing = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        if (e.path().extension() != ".csv") continue;
        ++files;
        if (slurp(e.path()) != slurp(dir / "b" / e.path().filename())) ++differing;
    }
    fs::remove_all(dir);
    return {files >= 4 && differing == 0,
            std::to_string(files) + " CSV files compared across two runs, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"kernel rows stochastic", 10, kernel_rows},
        {"full-buffer law equals exact enumeration", 30, case3_brute},
        {"simulated transitions pass chi-square", 120, chi_square},
        {"LP optimum equals value iteration", 60, lp_vs_vi},
        {"LP dominates random policies", 300, dominance},
        {"LP agrees with Monte Carlo", 900, lp_vs_monte_carlo},
        {"order loop on the reference scenario", 120, order_loop},
        {"aggregate tails equal hard truncation", 30, tail_exactness},
        {"sweep output reproducible", inf, reproducible_sweep},
    };
    int failures = 0;
    for (std::size_t n = 0; n < criteria.size(); ++n) {
        const auto& c = criteria[n];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.passed && in_time;
        failures += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " [" << n + 1 << "] " << c.name << ": " << o.detail << " ("
                  << fmt(secs, 3) << " s" << (in_time ? "" : ", over the time budget") << ")" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
    return failures == 0 ? 0 : 1;
}
