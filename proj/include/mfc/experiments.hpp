#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace mfc {

/// Flat experiment configuration. Keys absent from the input are filled
/// with the documented defaults and tracked in `defaulted`, so experiments
/// can substitute their own canonical values for untouched knobs.
struct ExperimentConfig {
    std::string experiment;
    double T = 1.0;
    double K = 0.0;
    double delta = 0.0;
    double dt = 1e-2;
    int n_particles = 10000;
    std::uint64_t seed = 0;
    double beta_forward = 0.0;    // 0: from the declared Lipschitz constant
    double beta_backward = 0.0;   // 0: the contraction-weight formula
    int basis_degree = 0;         // 0: experiment default
    double picard_tol = 1e-6;
    int picard_max_iter = 25;
    int interaction_budget = 128;
    double opt_step = 0.0;        // 0: experiment default
    int opt_iterations = 0;       // 0: experiment default
    int n_probes = 64;
    std::string output_dir = "out";

    std::set<std::string> defaulted;
    bool was_defaulted(const std::string& key) const {
        return defaulted.count(key) > 0;
    }

    /// Stable-order serialization of the resolved values (defaulted set is
    /// bookkeeping, not configuration).
    nlohmann::ordered_json to_json() const;
};

struct ValidationResult {
    ExperimentConfig config;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

/// Parse and fully validate a raw JSON config text. Every violation is
/// reported; malformed text yields an error entry, never a crash.
ValidationResult validate_config(const std::string& raw_text);

/// Recognized experiment names.
const std::vector<std::string>& experiment_names();

/// Run one experiment: writes result.json (headline numbers and pass
/// flags), per-series CSV files and manifest.json (the resolved config
/// plus library version) into config.output_dir.
/// Exit status: 0 ok, 2 unknown experiment, 3 solver non-convergence
/// (diagnostics.json written), 4 numerical divergence.
int run_experiment(const ExperimentConfig& config);

} // namespace mfc
