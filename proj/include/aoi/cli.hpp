#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "aoi/model.hpp"

namespace aoi {

enum ExitCode : int { exit_ok = 0, exit_check_failed = 1, exit_usage = 2 };

/// Entry point of the `aoi` tool; never calls std::exit.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

enum class ValidationLevel { quick, full };

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct ValidationOptions {
    ValidationLevel level = ValidationLevel::quick;
    /// Scales one transition of the stochasticity kernel; 1 leaves it intact.
    double fault_factor = 1.0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    /// Scatter CSVs go here when non-empty.
    std::filesystem::path artifact_dir;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    std::vector<std::filesystem::path> outputs;
    bool passed() const;
};

/// Row stochasticity, case-3 versus exact brute force, LP versus value
/// iteration, LP versus simulation and random-policy dominance.
ValidationReport run_validation(const ValidatedModel& model, const ValidationOptions& options,
                               std::ostream* log = nullptr);

/// `start:stop:step`, inclusive of stop up to rounding.
std::vector<double> parse_grid(const std::string& spec);

}  // namespace aoi
