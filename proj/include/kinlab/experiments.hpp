#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "kinlab/common.hpp"
#include "kinlab/potential.hpp"

namespace kinlab::experiments {

using json = nlohmann::json;

constexpr int kSchemaVersion = 1;

// One checked statement. `acceptance` is the acceptance criterion number it
// belongs to (0 for supporting checks).
struct Check {
    std::string id;
    int acceptance = 0;
    bool pass = false;
    std::string detail;  // deterministic text: values and tolerances
};

struct Timing {
    std::string label;
    double seconds = 0;
};

// Extra output file written under the run directory.
struct Artifact {
    std::string name;
    std::string bytes;
};

struct ExperimentResult {
    std::string experiment;
    std::vector<Check> checks;
    std::vector<std::string> columns;             // results.csv header
    std::vector<std::vector<std::string>> rows;  // results.csv body
    std::vector<Artifact> artifacts;
    std::vector<std::string> exported;  // files written by module exporters
    std::vector<Timing> timings;

    bool pass() const;
    // all checks of one acceptance criterion pass (false when there are none)
    bool criterion_pass(int n) const;
};

struct Config {
    int schema_version = kSchemaVersion;
    std::string experiment;
    std::uint64_t seed = 1;
    json params = json::object();

    json to_json() const;
    // hex FNV-1a of the canonical dump
    std::string hash() const;
};

const std::vector<std::string>& experiment_ids();

// Full parameter set with defaults; throws on an unknown id.
json default_params(const std::string& experiment);

// Validates the versioned document {schema_version, experiment, seed, params},
// rejects unknown keys and wrong types, fills defaults.
Config parse_config(const json& doc);
Config default_config(const std::string& experiment, std::uint64_t seed = 1);

// Sets one parameter from text, converted to the type of its default
// (comma-separated lists for arrays). Key dashes are read as underscores.
void apply_override(Config& c, const std::string& key, const std::string& value);

// Constraint check on all parameters (positivity, nonempty lists).
void validate(const Config& c);

// Runs the experiment. When out_dir is nonempty, module exporters write
// binary arrays with JSON sidecars there.
ExperimentResult run(const Config& c, const std::string& out_dir = "");

// Deterministic summary; timing lines start with "timing".
std::string summary_text(const Config& c, const ExperimentResult& r);
std::string results_csv(const ExperimentResult& r);

struct RunFiles {
    std::string manifest, results, summary;
};

// Writes results.csv, the artifacts, summary.txt and manifest.json (last,
// exactly once).
RunFiles write_run(const Config& c, const ExperimentResult& r, const std::string& out_dir, double wall_seconds,
                   const std::string& started_utc);

std::string version();

// m_t(p) of the dual Boltzmann flow started from e^{i kappa x} p_x, on the
// M-node energy shell of p with node 0 at p. Exact matrix exponential of the
// circulant collision generator plus the diagonal phase i kappa.q.
cplx dual_multiplier(const RVec& p, const RVec& kappa, double eps, double t, int M,
                     const potential::CorrelationProfile& R);

}  // namespace kinlab::experiments
