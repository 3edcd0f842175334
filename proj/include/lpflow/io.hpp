#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpflow/pipeline.hpp"

namespace lpflow {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Everything a CLI run needs. Parsed strictly: unknown keys are configuration errors.
struct RunConfig {
    PipelineSettings pipeline;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = ".";

    std::vector<int> exterior_powers;  // extra compound spectra reported by `spectrum`
    DominationOptions domination;
    int cone_samples = 200;

    double compare_eps = 0.1;
    double weak_eps = 0.05;
    std::string measure_file = "spectrum.json";
    std::vector<std::string> orbit_files;  // empty: every orbit_*.json in the output directory
    std::vector<double> period_tiers = {4.0, 7.0, 10.0};
};

/// {"family": "lorenz", "params": {"sigma": .., "rho": .., "beta": ..}} and friends;
/// every parameter of a family is required.
VectorField field_from_json(const Json& j);
Json field_to_json(const VectorField& f);

IntegratorConfig integrator_from_json(const Json& j);
Json integrator_to_json(const IntegratorConfig& c);

RunConfig config_from_json(const Json& j);
RunConfig load_config(const std::filesystem::path& path);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);
Json matrix_to_json(const Matrix& m);  // row-major nested arrays
Matrix matrix_from_json(const Json& j);

Json spectrum_to_json(const LyapunovSpectrum& s);
/// Reads "exponents" at top level or under "spectrum".
std::vector<double> exponents_from_json(const Json& j);

/// {"T": .., "blocks": [..], "meta": {"points", "speeds", "singularity_distances"}}
Json cocycle_to_json(const CocycleSequence& c);
CocycleSequence cocycle_from_json(const Json& j);

Json domination_to_json(const DominationReport& r);
Json certificate_to_json(const StringCertificate& c);
Json candidate_to_json(const ReturnCandidate& c, std::size_t id, const Trajectory& traj);
ReturnCandidate candidate_from_json(const Json& j);
Json orbit_to_json(const PeriodicOrbit& o);
Json shadowing_to_json(const ShadowingReport& r);
Json comparison_to_json(const ComparisonReport& r);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace lpflow
