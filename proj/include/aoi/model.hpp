#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace aoi {

/// One violated invariant, addressed by a dotted field path ("channel.states").
struct FieldIssue {
    std::string field;
    std::string message;
};

/// Thrown when a configuration cannot be used. Carries every violated invariant.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<FieldIssue> issues);
    ConfigError(std::string field, std::string message)
        : ConfigError(std::vector<FieldIssue>{{std::move(field), std::move(message)}}) {}
    const std::vector<FieldIssue>& issues() const noexcept { return issues_; }

private:
    std::vector<FieldIssue> issues_;
};

enum class QuantizationScheme { equal_probability, explicit_thresholds };

std::string to_string(QuantizationScheme scheme);
QuantizationScheme parse_scheme(const std::string& name);

/// Fading description fed to quantize_channel. Only Rayleigh block fading is
/// supported: the power gain is exponentially distributed with mean `mean_gain`.
struct FadingSpec {
    std::string family = "rayleigh";
    double mean_gain = 2.2908676527677725e-14;  // linear, -136.4 dB
    int states = 3;                             // W
    QuantizationScheme scheme = QuantizationScheme::equal_probability;
    double delta = 0.0;  // outage cutoff gain, linear
    /// Explicit cell boundaries h_1 < ... < h_{W-1} (h_0 = delta, h_W = inf are implicit).
    std::vector<double> thresholds;
};

struct SystemConfig {
    double lambda = 0.4;
    int max_rate = 1;               // S, packets per slot
    double slot_length = 1.25e-4;   // seconds
    double bandwidth = 1500.0;      // Hz
    double noise_density = 1e-18;   // W/Hz
    double packet_size = 1.0;       // bits
    FadingSpec channel;
    double power_constraint = 0.848;  // W
    double epsilon = 0.1;           // slots
    int max_order = 30;
    std::uint64_t seed = 1;
    /// Optional explicit W x (S+1) power table in watts; bypasses Shannon inversion.
    std::optional<std::vector<std::vector<double>>> power_table;
};

/// Quantized channel. Channel states are indexed 0..W-1 internally (0 is the worst).
struct ChannelModel {
    int states = 1;
    std::vector<double> alpha;
    double alpha_outage = 0.0;
    std::vector<double> rep_gain;
    /// h_0 = delta, h_1, ..., h_W = +inf (size W+1).
    std::vector<double> thresholds;
};

/// P[omega][s] in watts, omega in 0..W-1, s in 0..S.
class PowerTable {
public:
    PowerTable() = default;
    PowerTable(int channel_states, int max_rate);
    PowerTable(std::vector<std::vector<double>> rows);

    int channel_states() const noexcept { return channel_states_; }
    int max_rate() const noexcept { return max_rate_; }

    double operator()(int omega, int rate) const { return data_[index(omega, rate)]; }
    double& operator()(int omega, int rate) { return data_[index(omega, rate)]; }

    /// Violations of the zero-column, monotonicity and convexity requirements.
    std::vector<FieldIssue> check() const;
    double max_entry() const;

private:
    std::size_t index(int omega, int rate) const {
        return static_cast<std::size_t>(omega) * (max_rate_ + 1) + rate;
    }
    int channel_states_ = 0;
    int max_rate_ = 0;
    std::vector<double> data_;
};

ChannelModel quantize_channel(const FadingSpec& fading);

/// Shannon inversion P = (2^{s rho} - 1) N0 B / g with rho = packet_size / (B T).
PowerTable build_power_table(const SystemConfig& cfg, const ChannelModel& channel);

struct ValidatedModel {
    SystemConfig config;
    ChannelModel channel;
    PowerTable power;
    std::vector<std::string> warnings;
};

ValidatedModel validate_config(const SystemConfig& cfg);

double dbm_per_hz_to_watts(double dbm);
double db_to_linear(double db);

void to_json(nlohmann::json& j, const SystemConfig& cfg);
/// Parses a configuration document; unknown or mistyped fields raise ConfigError.
SystemConfig config_from_json(const nlohmann::json& j);
SystemConfig load_config(const std::string& path);

}  // namespace aoi
