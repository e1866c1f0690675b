#include "aoi/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace aoi {

namespace {

std::string join_issues(const std::vector<FieldIssue>& issues) {
    std::ostringstream os;
    os << "invalid configuration";
    for (const auto& issue : issues) os << "; " << issue.field << ": " << issue.message;
    return os.str();
}

double survival(double x, double mean) {
    if (std::isinf(x)) return 0.0;
    return std::exp(-x / mean);
}

// E[G; a <= G < b] for G ~ Exp(mean).
double partial_mean(double a, double b, double mean) {
    const double lower = (a + mean) * std::exp(-a / mean);
    const double upper = std::isinf(b) ? 0.0 : (b + mean) * std::exp(-b / mean);
    return lower - upper;
}

}  // namespace

ConfigError::ConfigError(std::vector<FieldIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

std::string to_string(QuantizationScheme scheme) {
    switch (scheme) {
    case QuantizationScheme::equal_probability: return "equal-probability";
    case QuantizationScheme::explicit_thresholds: return "explicit-thresholds";
    }
    return "unknown";
}

QuantizationScheme parse_scheme(const std::string& name) {
    if (name == "equal-probability") return QuantizationScheme::equal_probability;
    if (name == "explicit-thresholds") return QuantizationScheme::explicit_thresholds;
    throw ConfigError("channel.scheme", "unknown quantization scheme '" + name + "'");
}

double dbm_per_hz_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// ---------------------------------------------------------------------------
// PowerTable

PowerTable::PowerTable(int channel_states, int max_rate)
    : channel_states_(channel_states), max_rate_(max_rate),
      data_(static_cast<std::size_t>(channel_states) * (max_rate + 1), 0.0) {}

PowerTable::PowerTable(std::vector<std::vector<double>> rows) {
    if (rows.empty() || rows.front().size() < 2)
        throw ConfigError("power_table", "need at least one row with two columns");
    channel_states_ = static_cast<int>(rows.size());
    max_rate_ = static_cast<int>(rows.front().size()) - 1;
    data_.reserve(rows.size() * rows.front().size());
    for (const auto& row : rows) {
        if (row.size() != rows.front().size())
            throw ConfigError("power_table", "rows have different lengths");
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

std::vector<FieldIssue> PowerTable::check() const {
    std::vector<FieldIssue> issues;
    auto where = [](int w, int s) {
        return "power_table[" + std::to_string(w) + "][" + std::to_string(s) + "]";
    };
    for (int w = 0; w < channel_states_; ++w) {
        if ((*this)(w, 0) != 0.0) issues.push_back({where(w, 0), "rate 0 must cost 0 W"});
        for (int s = 1; s <= max_rate_; ++s) {
            const double p = (*this)(w, s);
            if (!std::isfinite(p)) {
                issues.push_back({where(w, s), "not finite"});
                continue;
            }
            if (!(p > (*this)(w, s - 1)))
                issues.push_back({where(w, s), "must increase strictly in the rate"});
            if (w > 0 && !(p < (*this)(w - 1, s)))
                issues.push_back({where(w, s), "must decrease strictly in the channel state"});
            if (s >= 2) {
                const double step = p - (*this)(w, s - 1);
                const double prev = (*this)(w, s - 1) - (*this)(w, s - 2);
                if (step < prev * (1.0 - 1e-12))
                    issues.push_back({where(w, s), "must be convex in the rate"});
            }
        }
    }
    return issues;
}

double PowerTable::max_entry() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, v);
    return m;
}

// ---------------------------------------------------------------------------
// Channel quantization

ChannelModel quantize_channel(const FadingSpec& fading) {
    std::vector<FieldIssue> issues;
    if (fading.family != "rayleigh")
        issues.push_back({"channel.family", "only 'rayleigh' fading is supported"});
    if (fading.states < 1) issues.push_back({"channel.states", "need at least one channel state"});
    if (!(fading.mean_gain > 0.0) || !std::isfinite(fading.mean_gain))
        issues.push_back({"channel.mean_gain", "must be positive and finite"});
    if (!(fading.delta >= 0.0) || !std::isfinite(fading.delta))
        issues.push_back({"channel.delta", "must be non-negative and finite"});
    if (!issues.empty()) throw ConfigError(std::move(issues));

    const int W = fading.states;
    const double mean = fading.mean_gain;
    std::vector<double> h(W + 1);
    h[0] = fading.delta;
    h[W] = std::numeric_limits<double>::infinity();

    if (fading.scheme == QuantizationScheme::equal_probability) {
        for (int k = 1; k < W; ++k)
            h[k] = fading.delta - mean * std::log1p(-static_cast<double>(k) / W);
    } else {
        if (static_cast<int>(fading.thresholds.size()) != W - 1) {
            throw ConfigError({{"channel.thresholds",
                                "expected " + std::to_string(W - 1) + " interior thresholds"}});
        }
        for (int k = 1; k < W; ++k) h[k] = fading.thresholds[k - 1];
        for (int k = 1; k < W; ++k) {
            if (!(h[k] > h[k - 1])) {
                if (k == 1 && !(fading.thresholds.front() > fading.delta)) {
                    issues.push_back({"channel.delta", "cutoff must lie below every threshold"});
                } else {
                    issues.push_back({"channel.thresholds[" + std::to_string(k - 1) + "]",
                                      "thresholds must increase strictly"});
                }
            }
        }
        if (!issues.empty()) throw ConfigError(std::move(issues));
    }

    ChannelModel ch;
    ch.states = W;
    ch.thresholds = h;
    ch.alpha_outage = -std::expm1(-fading.delta / mean);
    ch.alpha.resize(W);
    ch.rep_gain.resize(W);
    for (int w = 0; w < W; ++w) {
        const double mass = survival(h[w], mean) - survival(h[w + 1], mean);
        if (!(mass > 0.0))
            throw ConfigError({{"channel.thresholds", "channel state " + std::to_string(w + 1) +
                                                          " has zero probability"}});
        ch.alpha[w] = mass;
        ch.rep_gain[w] = partial_mean(h[w], h[w + 1], mean) / mass;
    }
    return ch;
}

// ---------------------------------------------------------------------------
// Power table

PowerTable build_power_table(const SystemConfig& cfg, const ChannelModel& channel) {
    if (cfg.power_table) {
        PowerTable table(*cfg.power_table);
        if (table.channel_states() != channel.states || table.max_rate() != cfg.max_rate) {
            throw ConfigError({{"power_table", "expected " + std::to_string(channel.states) + " x " +
                                                   std::to_string(cfg.max_rate + 1) + " entries"}});
        }
        if (auto issues = table.check(); !issues.empty()) throw ConfigError(std::move(issues));
        return table;
    }

    const double rho = cfg.packet_size / (cfg.bandwidth * cfg.slot_length);
    if (!(rho > 0.0) || !std::isfinite(rho))
        throw ConfigError("packet_size", "spectral load must be positive and finite");
    const double noise = cfg.noise_density * cfg.bandwidth;

    PowerTable table(channel.states, cfg.max_rate);
    for (int w = 0; w < channel.states; ++w) {
        const double g = channel.rep_gain[w];
        if (!(g > 0.0))
            throw ConfigError({{"channel", "representative gain of state " + std::to_string(w + 1) +
                                               " must be positive"}});
        for (int s = 1; s <= cfg.max_rate; ++s) {
            const double p = std::expm1(s * rho * std::log(2.0)) * noise / g;
            if (!std::isfinite(p))
                throw ConfigError({{"packet_size", "power for rate " + std::to_string(s) +
                                                       " overflows; reduce packet size or rate"}});
            table(w, s) = p;
        }
    }
    if (auto issues = table.check(); !issues.empty()) throw ConfigError(std::move(issues));
    return table;
}

// ---------------------------------------------------------------------------
// Validation

ValidatedModel validate_config(const SystemConfig& cfg) {
    std::vector<FieldIssue> issues;
    auto positive = [&](double v, const char* field) {
        if (!(v > 0.0) || !std::isfinite(v)) issues.push_back({field, "must be positive and finite"});
    };
    if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0))
        issues.push_back({"lambda", "arrival probability must lie in (0, 1)"});
    if (cfg.max_rate < 1) issues.push_back({"max_rate", "must be at least 1"});
    positive(cfg.epsilon, "epsilon");
    positive(cfg.power_constraint, "power_constraint");
    positive(cfg.slot_length, "slot_length");
    positive(cfg.bandwidth, "bandwidth");
    positive(cfg.noise_density, "noise_density");
    positive(cfg.packet_size, "packet_size");
    if (cfg.max_order < 2) issues.push_back({"max_order", "must be at least 2"});

    ValidatedModel model;
    model.config = cfg;
    try {
        model.channel = quantize_channel(cfg.channel);
    } catch (const ConfigError& e) {
        issues.insert(issues.end(), e.issues().begin(), e.issues().end());
    }
    if (issues.empty()) {
        try {
            model.power = build_power_table(cfg, model.channel);
        } catch (const ConfigError& e) {
            issues.insert(issues.end(), e.issues().begin(), e.issues().end());
        }
    }
    if (!issues.empty()) throw ConfigError(std::move(issues));

    const double capacity = cfg.max_rate * (1.0 - model.channel.alpha_outage);
    if (cfg.lambda > capacity) {
        std::ostringstream os;
        os << "offered load " << cfg.lambda << " exceeds maximum service capacity " << capacity
           << "; no stabilizing policy exists";
        model.warnings.push_back(os.str());
    }
    return model;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const SystemConfig& cfg) {
    nlohmann::json channel = {
        {"family", cfg.channel.family},
        {"mean_gain", cfg.channel.mean_gain},
        {"states", cfg.channel.states},
        {"scheme", to_string(cfg.channel.scheme)},
        {"delta", cfg.channel.delta},
    };
    if (!cfg.channel.thresholds.empty()) channel["thresholds"] = cfg.channel.thresholds;
    j = {
        {"lambda", cfg.lambda},
        {"max_rate", cfg.max_rate},
        {"slot_length", cfg.slot_length},
        {"bandwidth", cfg.bandwidth},
        {"noise_density", cfg.noise_density},
        {"packet_size", cfg.packet_size},
        {"channel", channel},
        {"power_constraint", cfg.power_constraint},
        {"epsilon", cfg.epsilon},
        {"max_order", cfg.max_order},
        {"seed", cfg.seed},
    };
    if (cfg.power_table) j["power_table"] = *cfg.power_table;
}

namespace {

class FieldReader {
public:
    FieldReader(const nlohmann::json& obj, std::string prefix, std::vector<FieldIssue>& issues)
        : obj_(obj), prefix_(std::move(prefix)), issues_(issues) {}

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            if constexpr (std::is_same_v<T, int>) {
                if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (!it->is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw std::invalid_argument("expected a string");
            }
            out = it->template get<T>();
        } catch (const std::exception& e) {
            issues_.push_back({path(key), e.what()});
        }
    }

    bool has(const char* key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    void reject_unknown() {
        for (const auto& item : obj_.items())
            if (!seen_.count(item.key())) issues_.push_back({path(item.key()), "unknown field"});
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

private:
    const nlohmann::json& obj_;
    std::string prefix_;
    std::vector<FieldIssue>& issues_;
    std::set<std::string> seen_;
};

}  // namespace

SystemConfig config_from_json(const nlohmann::json& j) {
    std::vector<FieldIssue> issues;
    if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");

    SystemConfig cfg;
    FieldReader top(j, "", issues);
    top.read("lambda", cfg.lambda);
    top.read("max_rate", cfg.max_rate);
    top.read("slot_length", cfg.slot_length);
    top.read("bandwidth", cfg.bandwidth);
    top.read("noise_density", cfg.noise_density);
    if (top.has("noise_density_dbm_hz")) {
        double dbm = 0.0;
        top.read("noise_density_dbm_hz", dbm);
        if (j.contains("noise_density"))
            issues.push_back({"noise_density_dbm_hz", "give either noise_density or noise_density_dbm_hz"});
        cfg.noise_density = dbm_per_hz_to_watts(dbm);
    }
    top.read("packet_size", cfg.packet_size);
    top.read("power_constraint", cfg.power_constraint);
    top.read("epsilon", cfg.epsilon);
    top.read("max_order", cfg.max_order);
    top.read("seed", cfg.seed);

    if (top.has("power_table")) {
        const auto& pt = j.at("power_table");
        try {
            cfg.power_table = pt.get<std::vector<std::vector<double>>>();
        } catch (const std::exception&) {
            issues.push_back({"power_table", "expected an array of numeric rows"});
        }
    }

    if (top.has("channel")) {
        const auto& ch = j.at("channel");
        if (!ch.is_object()) {
            issues.push_back({"channel", "expected an object"});
        } else {
            FieldReader cr(ch, "channel", issues);
            cr.read("family", cfg.channel.family);
            cr.read("mean_gain", cfg.channel.mean_gain);
            if (cr.has("mean_gain_db")) {
                double db = 0.0;
                cr.read("mean_gain_db", db);
                if (ch.contains("mean_gain"))
                    issues.push_back({"channel.mean_gain_db", "give either mean_gain or mean_gain_db"});
                cfg.channel.mean_gain = db_to_linear(db);
            }
            cr.read("states", cfg.channel.states);
            std::string scheme = to_string(cfg.channel.scheme);
            cr.read("scheme", scheme);
            try {
                cfg.channel.scheme = parse_scheme(scheme);
            } catch (const ConfigError& e) {
                issues.insert(issues.end(), e.issues().begin(), e.issues().end());
            }
            cr.read("delta", cfg.channel.delta);
            if (cr.has("thresholds")) {
                try {
                    cfg.channel.thresholds = ch.at("thresholds").get<std::vector<double>>();
                } catch (const std::exception&) {
                    issues.push_back({"channel.thresholds", "expected an array of numbers"});
                }
            }
            cr.reject_unknown();
        }
    }
    top.reject_unknown();
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open configuration file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

}  // namespace aoi
