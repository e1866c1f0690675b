#include "aoi/io.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace aoi {

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace {

void age_header(std::ostream& os, int S) {
    for (int k = S; k >= 1; --k) os << ",A_" << k;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

int parse_int(const std::string& s, const std::string& what) {
    int v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::invalid_argument("policy file: bad " + what + " '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(what);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("policy file: bad " + what + " '" + s + "'");
    }
}

}  // namespace

std::string policy_csv(const Policy& policy) {
    const auto& sp = policy.space();
    const int S = sp.rate_cap();
    std::ostringstream os;
    os << "state";
    age_header(os, S);
    os << ",A_r,omega,action,prob\n";
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const auto& st = sp.state_at(i);
        const int kmax = policy.max_feasible_rate(i);
        for (int w = 0; w < policy.channel_states(); ++w) {
            for (int s = 0; s <= kmax; ++s) {
                os << i;
                for (int a : st.buffer) os << ',' << a;
                os << ',' << st.receiver_aoi << ',' << w + 1 << ',' << s << ',' << format_number(policy.prob(i, w, s))
                   << '\n';
            }
        }
    }
    return os.str();
}

Policy read_policy_csv(const std::filesystem::path& path, int channel_states) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open policy file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("policy file is empty");
    const auto header = split(line);
    const int S = static_cast<int>(header.size()) - 5;
    if (S < 1 || header.front() != "state" || header[header.size() - 4] != "A_r" ||
        header[header.size() - 3] != "omega" || header[header.size() - 2] != "action" || header.back() != "prob")
        throw std::invalid_argument("policy file: unexpected header '" + line + "'");

    struct Row {
        SystemState state;
        int omega, action;
        double prob;
    };
    std::vector<Row> rows;
    int max_receiver = 0;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw std::invalid_argument("policy file line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " columns");
        Row r;
        for (int k = 0; k < S; ++k) r.state.buffer.push_back(parse_int(cells[1 + k], "age"));
        r.state.receiver_aoi = parse_int(cells[1 + S], "receiver age");
        r.omega = parse_int(cells[2 + S], "omega") - 1;
        r.action = parse_int(cells[3 + S], "action");
        r.prob = parse_double(cells[4 + S], "probability");
        if (r.omega < 0 || r.omega >= channel_states)
            throw std::invalid_argument("policy file line " + std::to_string(lineno) + ": omega " +
                                        std::to_string(r.omega + 1) + " outside 1.." + std::to_string(channel_states));
        if (r.action < 0 || r.action > S)
            throw std::invalid_argument("policy file line " + std::to_string(lineno) + ": action out of range");
        max_receiver = std::max(max_receiver, r.state.receiver_aoi);
        rows.push_back(std::move(r));
    }
    const int order = max_receiver - 1;
    if (order < 1) throw std::invalid_argument("policy file: cannot infer the threshold order");

    auto space = std::make_shared<const StateSpace>(order, S);
    std::vector<std::vector<double>> f(space->size() * channel_states, std::vector<double>(S + 1, 0.0));
    std::vector<char> seen(space->size() * channel_states, 0);
    for (const auto& r : rows) {
        std::optional<std::size_t> idx;
        if (r.state.receiver_aoi == order + 1) {
            const int k = buffer_occupancy(r.state);
            idx = k == 0 ? space->tail_empty() : space->tail_one();
        } else {
            idx = space->index_of(r.state);
        }
        if (!idx) throw std::invalid_argument("policy file: state " + to_string(r.state) + " is not in the order-" +
                                              std::to_string(order) + " space");
        f[*idx * channel_states + r.omega][r.action] += r.prob;
        seen[*idx * channel_states + r.omega] = 1;
    }

    Policy policy(space, channel_states);
    for (std::size_t i = 0; i < space->size(); ++i) {
        for (int w = 0; w < channel_states; ++w) {
            if (!seen[i * channel_states + w])
                throw std::invalid_argument("policy file: no rows for state " + to_string(space->state_at(i)) +
                                            " omega " + std::to_string(w + 1));
            if (policy.is_forced(i)) continue;
            policy.set_distribution(i, w, f[i * channel_states + w]);
        }
    }
    return policy;
}

std::string solution_csv(const LpProblem& problem, const OccupationSolution& solution, const Policy& policy) {
    const auto& sp = *problem.space;
    std::vector<std::vector<double>> x(sp.size() * problem.channel_states, std::vector<double>(sp.rate_cap() + 1, 0.0));
    for (std::size_t c = 0; c < problem.variables.size(); ++c) {
        const auto& v = problem.variables[c];
        if (v.omega >= 0) {
            x[v.state * problem.channel_states + v.omega][v.action] = solution.x[c];
        } else {
            for (int w = 0; w < problem.channel_states; ++w)
                x[v.state * problem.channel_states + w][v.action] = solution.x[c];
        }
    }
    std::ostringstream os;
    os << "state_index,omega,action,x,pi,f\n";
    for (std::size_t i = 0; i < sp.size(); ++i) {
        for (int w = 0; w < problem.channel_states; ++w) {
            for (int s = 0; s <= policy.max_feasible_rate(i); ++s) {
                os << i << ',' << w + 1 << ',' << s << ',' << format_number(x[i * problem.channel_states + w][s])
                   << ',' << format_number(solution.pi[i]) << ',' << format_number(policy.prob(i, w, s)) << '\n';
            }
        }
    }
    return os.str();
}

std::string states_csv(const StateSpace& space) {
    std::ostringstream os;
    os << "index,level";
    age_header(os, space.rate_cap());
    os << ",receiver_aoi\n";
    for (std::size_t i = 0; i < space.size(); ++i) {
        const auto& st = space.state_at(i);
        os << i << ',';
        if (space.kind(i) == StateKind::regular) os << space.level(i);
        else os << (space.kind(i) == StateKind::tail_empty ? "tail_empty" : "tail_one");
        for (int a : st.buffer) os << ',' << a;
        os << ',' << st.receiver_aoi << '\n';
    }
    return os.str();
}

std::string kernel_csv(const TransitionKernel& kernel) {
    std::ostringstream os;
    os << "src_index,action,dst_index,prob\n";
    for (std::size_t i = 0; i < kernel.space().size(); ++i)
        for (const auto& row : kernel.rows(i))
            for (const auto& t : row.transitions)
                os << i << ',' << row.action << ',' << t.target << ',' << format_number(t.prob) << '\n';
    return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "lambda,P_c,status,A_star,P_achieved,M_star\n";
    for (const auto& r : rows) {
        const auto& p = r.point;
        const bool ok = p.status == SolveStatus::optimal || p.status == SolveStatus::not_converged;
        os << format_number(r.lambda) << ',' << format_number(p.power_cap) << ',' << to_string(p.status) << ','
           << (ok ? format_number(p.aoi) : "") << ',' << (ok ? format_number(p.power) : "") << ',' << p.order
           << '\n';
    }
    return os.str();
}

std::string stats_csv(const std::vector<SimStats>& stats) {
    std::ostringstream os;
    os << "seed,slots,aoi_mean,aoi_ci,power_mean,power_ci\n";
    for (const auto& s : stats)
        os << s.seed << ',' << s.slots << ',' << format_number(s.aoi_mean) << ',' << format_number(s.aoi_ci) << ','
           << format_number(s.power_mean) << ',' << format_number(s.power_ci) << '\n';
    return os.str();
}

std::string scatter_csv(const ScatterResult& scatter) {
    std::ostringstream os;
    os << "sample_id,kind,A,P,feasible\n";
    for (const auto& s : scatter.samples)
        os << s.id << ',' << s.kind << ',' << format_number(s.aoi) << ',' << format_number(s.power) << ','
           << (s.feasible ? 1 : 0) << '\n';
    return os.str();
}

namespace {

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

Manifest::Manifest(std::string command, const nlohmann::json& config) {
    doc_ = {{"tool", "aoi"},
            {"version", tool_version},
            {"command", std::move(command)},
            {"started", utc_now()},
            {"config", config},
            {"seeds", nlohmann::json::array()},
            {"outputs", nlohmann::json::array()}};
}

void Manifest::add_output(const std::filesystem::path& path) { doc_["outputs"].push_back(path.string()); }
void Manifest::add_seed(std::uint64_t seed) { doc_["seeds"].push_back(seed); }
void Manifest::set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }

void Manifest::write(const std::filesystem::path& dir, const std::string& status) {
    doc_["status"] = status;
    doc_["finished"] = utc_now();
    const auto path = dir / "manifest.json";
    doc_["outputs"].push_back(path.string());
    write_atomic(path, doc_.dump(2) + "\n");
}

}  // namespace aoi
