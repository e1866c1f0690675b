#include "aoi/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "aoi/io.hpp"
#include "aoi/kernel.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/sim.hpp"

namespace aoi {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw std::invalid_argument("grid '" + spec + "': '" + item + "' is not a number");
        }
    }
    if (parts.size() == 1) return parts;
    if (parts.size() != 3) throw std::invalid_argument("grid '" + spec + "' must be start:stop:step or a single value");
    const double start = parts[0], stop = parts[1], step = parts[2];
    if (!(step > 0.0)) throw std::invalid_argument("grid '" + spec + "': step must be positive");
    if (stop < start) throw std::invalid_argument("grid '" + spec + "': stop is below start");
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (n > 100000) throw std::invalid_argument("grid '" + spec + "' has more than 100000 points");
    std::vector<double> grid;
    for (long i = 0; i < n; ++i) {
        // Round to 12 significant digits so 0.7 + 3 * 0.1 prints as 1.
        const double v = start + static_cast<double>(i) * step;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        grid.push_back(std::strtod(buf, nullptr));
    }
    return grid;
}

namespace {

class Log {
public:
    explicit Log(std::ostream& err) : err_(err) {
        if (const char* v = std::getenv("AOI_LOG")) {
            const std::string s = v;
            if (s == "quiet" || s == "0") level_ = 0;
            else if (s == "debug" || s == "2") level_ = 2;
        }
    }
    void info(const std::string& msg) const {
        if (level_ >= 1) err_ << "aoi: " << msg << '\n';
    }
    void debug(const std::string& msg) const {
        if (level_ >= 2) err_ << "aoi: " << msg << '\n';
    }
    void warn(const std::string& msg) const { err_ << "aoi: warning: " << msg << '\n'; }

private:
    std::ostream& err_;
    int level_ = 1;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int report_config_error(const ConfigError& e, std::ostream& err) {
    json issues = json::array();
    for (const auto& i : e.issues()) issues.push_back({{"field", i.field}, {"message", i.message}});
    err << json{{"error", "config"}, {"issues", issues}}.dump() << '\n';
    return exit_usage;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

struct Common {
    std::string config_path;
    fs::path out_dir = "aoi-out";
    std::optional<std::uint64_t> seed;
};

SystemConfig read_config(const Common& c) {
    auto cfg = load_config(c.config_path);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
    Common common;
    std::optional<double> pc;
    std::optional<double> epsilon;
    std::optional<int> max_order;
};

int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err, const Log& log) {
    auto cfg = read_config(a.common);
    if (a.pc) cfg.power_constraint = *a.pc;
    if (a.epsilon) cfg.epsilon = *a.epsilon;
    if (a.max_order) cfg.max_order = *a.max_order;
    const auto model = validate_config(cfg);
    for (const auto& w : model.warnings) log.warn(w);

    json snapshot;
    to_json(snapshot, cfg);
    Manifest manifest("solve", snapshot);
    manifest.add_seed(cfg.seed);

    log.info("solving with P_c=" + format_number(cfg.power_constraint) + ", epsilon=" + format_number(cfg.epsilon));
    const auto res = optimal_policy(model);
    for (const auto& it : res.history)
        log.debug("M=" + std::to_string(it.order) + " " + to_string(it.status) + " A=" + format_number(it.aoi) +
                  " P=" + format_number(it.power));

    const fs::path dir = a.common.out_dir;
    std::ostringstream orders;
    orders << "order,status,A,P\n";
    for (const auto& it : res.history)
        orders << it.order << ',' << to_string(it.status) << ',' << format_number(it.aoi) << ','
               << format_number(it.power) << '\n';
    write_atomic(dir / "orders.csv", orders.str());
    manifest.add_output(dir / "orders.csv");

    if (res.policy) {
        write_atomic(dir / "policy.csv", policy_csv(*res.policy));
        write_atomic(dir / "solution.csv", solution_csv(*res.problem, res.solution, *res.policy));
        manifest.add_output(dir / "policy.csv");
        manifest.add_output(dir / "solution.csv");
    }
    const bool has_value = res.status == SolveStatus::optimal || res.status == SolveStatus::not_converged;
    json summary{{"status", to_string(res.status)},
                 {"power_cap", cfg.power_constraint},
                 {"epsilon", cfg.epsilon},
                 {"M_star", res.order},
                 {"monotone", res.monotone},
                 {"message", res.message}};
    if (has_value) {
        summary["A_star"] = res.aoi;
        summary["P_achieved"] = res.power;
        summary["power_dual"] = res.solution.power_dual;
        if (std::isfinite(res.last_increment)) summary["last_increment"] = res.last_increment;
    }
    write_atomic(dir / "summary.json", summary.dump(2) + "\n");
    manifest.add_output(dir / "summary.json");
    manifest.set("result", summary);
    manifest.write(dir, to_string(res.status));

    if (has_value)
        out << "status=" << to_string(res.status) << " A*=" << format_number(res.aoi)
            << " P=" << format_number(res.power) << " M*=" << res.order << '\n';
    if (res.status != SolveStatus::optimal) {
        err << json{{"error", to_string(res.status)}, {"message", res.message}, {"M", res.order}}.dump() << '\n';
        return exit_check_failed;
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
    Common common;
    std::string grid;
    std::vector<double> lambdas;
    std::optional<double> epsilon;
    std::optional<int> max_order;
    unsigned threads = 0;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream&, const Log& log) {
    auto cfg = read_config(a.common);
    if (a.epsilon) cfg.epsilon = *a.epsilon;
    if (a.max_order) cfg.max_order = *a.max_order;
    std::vector<double> caps;
    try {
        caps = parse_grid(a.grid);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto lambdas = a.lambdas.empty() ? std::vector<double>{cfg.lambda} : a.lambdas;

    json snapshot;
    to_json(snapshot, cfg);
    Manifest manifest("sweep", snapshot);
    manifest.add_seed(cfg.seed);
    manifest.set("pc_grid", caps);
    manifest.set("lambdas", lambdas);

    const fs::path dir = a.common.out_dir;
    std::vector<SweepRow> rows;
    std::map<double, std::vector<TradeoffPoint>> curves;
    for (double lambda : lambdas) {
        auto c = cfg;
        c.lambda = lambda;
        const auto model = validate_config(c);
        log.info("lambda=" + format_number(lambda) + ": " + std::to_string(caps.size()) + " budgets");
        auto points = tradeoff_sweep(model, caps, cfg.epsilon, {2, cfg.max_order}, a.threads);
        for (const auto& p : points) rows.push_back({lambda, p});

        std::ostringstream plot;
        plot << "P_c,A_star\n";
        for (const auto& p : points)
            if (p.status == SolveStatus::optimal || p.status == SolveStatus::not_converged)
                plot << format_number(p.power_cap) << ',' << format_number(p.aoi) << '\n';
        const auto path = dir / ("tradeoff_lambda_" + format_number(lambda) + ".csv");
        write_atomic(path, plot.str());
        manifest.add_output(path);

        double prev = std::numeric_limits<double>::infinity();
        for (const auto& p : points) {
            if (p.status != SolveStatus::optimal) continue;
            if (p.aoi > prev + 1e-8)
                log.warn("lambda=" + format_number(lambda) + ": A* rises at P_c=" + format_number(p.power_cap));
            prev = p.aoi;
        }
        curves[lambda] = std::move(points);
    }
    write_atomic(dir / "sweep.csv", sweep_csv(rows));
    manifest.add_output(dir / "sweep.csv");

    // Crossings between curves: sign changes of A*_i - A*_j over budgets where both are optimal.
    std::ostringstream crossings;
    crossings << "lambda_a,lambda_b,P_c_low,P_c_high\n";
    json crossing_list = json::array();
    for (auto i = curves.begin(); i != curves.end(); ++i) {
        for (auto j = std::next(i); j != curves.end(); ++j) {
            int last_sign = 0;
            double last_cap = 0.0;
            for (std::size_t k = 0; k < caps.size(); ++k) {
                const auto& p = i->second[k];
                const auto& q = j->second[k];
                if (p.status != SolveStatus::optimal || q.status != SolveStatus::optimal) continue;
                const double d = p.aoi - q.aoi;
                const int sign = d > 1e-9 ? 1 : (d < -1e-9 ? -1 : 0);
                if (sign == 0) continue;
                if (last_sign != 0 && sign != last_sign) {
                    crossings << format_number(i->first) << ',' << format_number(j->first) << ','
                              << format_number(last_cap) << ',' << format_number(caps[k]) << '\n';
                    crossing_list.push_back({i->first, j->first, last_cap, caps[k]});
                    out << "crossing: lambda=" << format_number(i->first) << " and lambda=" << format_number(j->first)
                        << " between P_c=" << format_number(last_cap) << " and " << format_number(caps[k]) << '\n';
                }
                last_sign = sign;
                last_cap = caps[k];
            }
        }
    }
    write_atomic(dir / "crossings.csv", crossings.str());
    manifest.add_output(dir / "crossings.csv");
    manifest.set("crossings", crossing_list);

    std::size_t optimal = 0, infeasible = 0, other = 0;
    for (const auto& r : rows) {
        if (r.point.status == SolveStatus::optimal) ++optimal;
        else if (r.point.status == SolveStatus::infeasible) ++infeasible;
        else ++other;
    }
    out << rows.size() << " points: " << optimal << " optimal, " << infeasible << " infeasible, " << other
        << " other\n";
    if (optimal == 0) log.warn("no budget in the grid is feasible; every row is " +
                               (rows.empty() ? std::string("empty") : to_string(rows.front().point.status)));
    manifest.write(dir, optimal == 0 ? "no_feasible_point" : "ok");
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string policy_file;
    std::string builtin;
    std::optional<int> order;
    std::uint64_t slots = 1'000'000;
    int reps = 1;
    unsigned threads = 0;
    std::string trace;
};

Policy builtin_policy(const std::string& spec, std::optional<int> order, int S, int W) {
    if (spec == "always" || spec == "never") {
        const int m = order.value_or(10);
        if (m < 1) throw UsageError("--order must be at least 1");
        auto space = std::make_shared<const StateSpace>(m, S);
        return spec == "always" ? Policy::always_transmit(space, W) : Policy::never_transmit(space, W);
    }
    if (spec.rfind("threshold:", 0) == 0) {
        int t = 0;
        try {
            std::size_t used = 0;
            t = std::stoi(spec.substr(10), &used);
            if (used != spec.size() - 10) throw std::invalid_argument(spec);
        } catch (const std::exception&) {
            throw UsageError("--builtin " + spec + ": threshold must be an integer");
        }
        const int m = order.value_or(t);
        if (t < 1 || t > m) throw UsageError("--builtin threshold must lie in 1..order");
        return Policy::threshold(std::make_shared<const StateSpace>(m, S), W, t);
    }
    throw UsageError("--builtin must be always, never or threshold:M (got '" + spec + "')");
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream&, const Log& log) {
    const auto cfg = read_config(a.common);
    const auto model = validate_config(cfg);
    for (const auto& w : model.warnings) log.warn(w);
    const int S = cfg.max_rate, W = model.channel.states;

    std::optional<Policy> policy;
    if (!a.policy_file.empty()) {
        try {
            policy.emplace(read_policy_csv(a.policy_file, W));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (policy->rate_cap() != S)
            throw UsageError("policy file has S=" + std::to_string(policy->rate_cap()) + " but the config has S=" +
                             std::to_string(S));
    } else {
        policy.emplace(builtin_policy(a.builtin, a.order, S, W));
    }
    if (a.reps < 1) throw UsageError("--reps must be at least 1");
    if (!a.trace.empty() && a.reps != 1) throw UsageError("--trace needs --reps 1");

    json snapshot;
    to_json(snapshot, cfg);
    Manifest manifest("simulate", snapshot);
    for (int i = 0; i < a.reps; ++i) manifest.add_seed(cfg.seed + static_cast<std::uint64_t>(i));
    manifest.set("policy", a.policy_file.empty() ? "builtin:" + a.builtin : a.policy_file);
    manifest.set("order", policy->order());

    const fs::path dir = a.common.out_dir;
    SimOptions so;
    so.slots = a.slots;
    so.seed = cfg.seed;
    std::ofstream trace;
    std::optional<fs::path> trace_tmp;
    if (!a.trace.empty()) {
        // Streamed to a temporary sibling, renamed once complete.
        const fs::path target = a.trace;
        if (target.has_parent_path()) fs::create_directories(target.parent_path());
        trace_tmp = target;
        *trace_tmp += ".partial";
        trace.open(*trace_tmp, std::ios::binary | std::ios::trunc);
        if (!trace) throw std::runtime_error("cannot write trace " + a.trace);
        so.trace = &trace;
    }
    log.info("simulating " + std::to_string(a.reps) + " x " + std::to_string(a.slots) + " slots");
    const auto st = replicate(model, *policy, a.reps, cfg.seed, so, a.threads);
    if (trace_tmp) {
        trace.close();
        fs::rename(*trace_tmp, a.trace);
        manifest.add_output(a.trace);
    }

    write_atomic(dir / "stats.csv", stats_csv({st}));
    manifest.add_output(dir / "stats.csv");
    manifest.set("channel_counts", st.channel_counts);
    if (model.channel.alpha_outage == 0.0) {
        try {
            TransitionKernel kernel(policy->space_ptr(), cfg.lambda);
            const auto perf = evaluate_policy(kernel, *policy, model.channel, model.power);
            manifest.set("analytic", {{"A", perf.aoi}, {"P", perf.power}});
            log.info("analytic A=" + format_number(perf.aoi) + " P=" + format_number(perf.power));
        } catch (const ReducibleChainError& e) {
            log.warn(std::string("no analytic reference: ") + e.what());
        }
    }
    manifest.write(dir, "ok");
    out << "A=" << format_number(st.aoi_mean) << " +- " << format_number(st.aoi_ci)
        << " P=" << format_number(st.power_mean) << " +- " << format_number(st.power_ci) << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
    Common common;
    std::string level = "quick";
    double fault = 1.0;
    unsigned threads = 0;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream&, const Log& log) {
    const auto cfg = read_config(a.common);
    const auto model = validate_config(cfg);
    for (const auto& w : model.warnings) log.warn(w);

    ValidationOptions opt;
    opt.level = a.level == "full" ? ValidationLevel::full : ValidationLevel::quick;
    opt.fault_factor = a.fault;
    opt.seed = cfg.seed;
    opt.threads = a.threads;
    opt.artifact_dir = a.common.out_dir;

    json snapshot;
    to_json(snapshot, cfg);
    Manifest manifest("validate", snapshot);
    manifest.add_seed(cfg.seed);
    manifest.set("level", a.level);

    const auto report = run_validation(model, opt, &out);
    std::ostringstream csv;
    csv << "check,status,measured,tolerance,detail\n";
    json checks = json::array();
    for (const auto& c : report.checks) {
        csv << c.name << ',' << (c.passed ? "pass" : "fail") << ',' << format_number(c.measured) << ','
            << format_number(c.tolerance) << ',' << csv_quote(c.detail) << '\n';
        checks.push_back({{"check", c.name}, {"passed", c.passed}, {"measured", c.measured}});
    }
    const fs::path dir = a.common.out_dir;
    write_atomic(dir / "report.csv", csv.str());
    for (const auto& p : report.outputs) manifest.add_output(p);
    manifest.add_output(dir / "report.csv");
    manifest.set("checks", checks);
    manifest.write(dir, report.passed() ? "pass" : "fail");
    out << (report.passed() ? "all checks passed" : "validation FAILED") << '\n';
    return report.passed() ? exit_ok : exit_check_failed;
}

// ---------------------------------------------------------------------------

struct StatespaceArgs {
    int order = 0;
    int rate = 0;
    std::optional<double> lambda;
    fs::path out_dir = "aoi-out";
};

int cmd_statespace(const StatespaceArgs& a, std::ostream& out, std::ostream&, const Log&) {
    if (a.order < 0 || a.rate < 1) throw UsageError("--M must be >= 0 and --S >= 1");
    auto space = std::make_shared<const StateSpace>(a.order, a.rate);
    json params{{"M", a.order}, {"S", a.rate}};
    if (a.lambda) params["lambda"] = *a.lambda;
    Manifest manifest("statespace", params);
    write_atomic(a.out_dir / "states.csv", states_csv(*space));
    manifest.add_output(a.out_dir / "states.csv");
    if (a.lambda) {
        if (!(*a.lambda >= 0.0 && *a.lambda <= 1.0)) throw UsageError("--lambda must lie in [0, 1]");
        const TransitionKernel kernel(space, *a.lambda);
        write_atomic(a.out_dir / "kernel.csv", kernel_csv(kernel));
        manifest.add_output(a.out_dir / "kernel.csv");
    }
    manifest.write(a.out_dir, "ok");
    out << space->size() << " states (" << space->regular_count() << " regular + 2 tail)\n";
    return exit_ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Age-of-information optimal scheduling under an average power budget", "aoi"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);

    auto add_common = [](CLI::App* sub, Common& c) {
        sub->add_option("config", c.config_path, "JSON configuration file")->required();
        sub->add_option("--out", c.out_dir, "Output directory");
        sub->add_option("--seed", c.seed, "Override the configured seed");
    };

    SolveArgs solve;
    auto* s = app.add_subcommand("solve", "Optimal policy for one power budget");
    add_common(s, solve.common);
    s->add_option("--pc", solve.pc, "Average power budget in watts");
    s->add_option("--epsilon", solve.epsilon, "Order-loop stopping tolerance in slots");
    s->add_option("--max-order", solve.max_order, "Largest threshold order tried");

    SweepArgs sweep;
    auto* w = app.add_subcommand("sweep", "AoI-power tradeoff over a budget grid");
    add_common(w, sweep.common);
    w->add_option("--pc-grid", sweep.grid, "start:stop:step in watts")->required();
    w->add_option("--lambda-list", sweep.lambdas, "Comma-separated arrival rates")->delimiter(',');
    w->add_option("--epsilon", sweep.epsilon, "Order-loop stopping tolerance in slots");
    w->add_option("--max-order", sweep.max_order, "Largest threshold order tried");
    w->add_option("--threads", sweep.threads, "Worker threads (0 = all cores)");

    SimulateArgs sim;
    auto* m = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
    add_common(m, sim.common);
    auto* pf = m->add_option("--policy", sim.policy_file, "Policy CSV written by solve");
    auto* bi = m->add_option("--builtin", sim.builtin, "always | never | threshold:M");
    pf->excludes(bi);
    bi->excludes(pf);
    m->add_option("--order", sim.order, "Threshold order for builtin policies");
    m->add_option("--slots", sim.slots, "Slots per replication");
    m->add_option("--reps", sim.reps, "Independent replications");
    m->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");
    m->add_option("--trace", sim.trace, "Per-slot trace CSV");

    ValidateArgs val;
    auto* v = app.add_subcommand("validate", "Self-consistency checks");
    add_common(v, val.common);
    v->add_option("--level", val.level, "quick | full")->check(CLI::IsMember({"quick", "full"}));
    v->add_option("--threads", val.threads, "Worker threads (0 = all cores)");
    v->add_option("--inject-fault", val.fault, "Scale one kernel transition")->group("");

    StatespaceArgs ss;
    auto* t = app.add_subcommand("statespace", "Dump the ordered truncated state space");
    t->add_option("--M", ss.order, "Threshold order")->required();
    t->add_option("--S", ss.rate, "Maximum transmission rate")->required();
    t->add_option("--lambda", ss.lambda, "Also dump the transition kernel at this arrival rate");
    t->add_option("--out", ss.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? exit_ok : exit_usage;
    }

    const Log log(err);
    try {
        if (*s) return cmd_solve(solve, out, err, log);
        if (*w) return cmd_sweep(sweep, out, err, log);
        if (*m) {
            if (sim.policy_file.empty() && sim.builtin.empty()) throw UsageError("simulate needs --policy or --builtin");
            return cmd_simulate(sim, out, err, log);
        }
        if (*v) return cmd_validate(val, out, err, log);
        if (*t) return cmd_statespace(ss, out, err, log);
    } catch (const ConfigError& e) {
        return report_config_error(e, err);
    } catch (const UsageError& e) {
        err << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
        return exit_check_failed;
    }
    return exit_usage;
}

}  // namespace aoi
