#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lpflow/field.hpp"
#include "lpflow/flow.hpp"
#include "lpflow/measures.hpp"
#include "lpflow/orbits.hpp"
#include "lpflow/pesin.hpp"
#include "lpflow/spectra.hpp"

namespace lpflow {

/// Parameters of the long-run to periodic-orbit pipeline. Times are in
/// flow time units unless marked as samples or blocks.
struct PipelineSettings {
    VectorField field = VectorField::lorenz();
    IntegratorConfig integrator;
    Vector initial;            // empty selects (1, 1, ..., 1)
    double transient = 20.0;
    double duration = 5000.0;
    double sample_dt = 0.05;
    double block_time = 1.0;   // cocycle step, a whole multiple of sample_dt

    BenettinOptions benettin;
    FiltrationOptions filtration;
    PesinBlockParams pesin;
    double string_eta = 0.3;   // per unit time
    double string_gap = 1.0;   // partition gap, a whole multiple of block_time

    double D_rel = 0.05;
    double min_return_time = 3.0;   // near returns closer in time are ignored
    double max_return_time = 10.0;  // and so are longer ones
    std::size_t max_candidates = 2000;

    std::size_t max_closures = 12;  // distinct candidates handed to the closing step
    ClosingOptions closing;
    FitOptions fit;
    double shadow_eps = 0.1;

    std::size_t family_size = 20;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
    std::size_t stride() const;  // samples per block
};

/// Transient discarded, then duration sampled every sample_dt.
Trajectory simulate(const PipelineSettings& s);

struct MeasureSpectrum {
    CocycleSequence cocycle;
    LyapunovSpectrum spectrum;
    SplittingEstimate split;
    int split_group = 0;  // number of stable exponent groups
};

/// Benettin spectrum of psi* along the stored trajectory and its Oseledec splitting.
MeasureSpectrum measure_spectrum(const PipelineSettings& s, const Trajectory& traj);

struct ScanResult {
    std::vector<BlockTestResult> blocks;
    std::vector<std::size_t> members;  // trajectory sample indices of Pesin block members
    std::vector<StringCertificate> certificates;
    std::vector<ReturnCandidate> candidates;
    std::size_t certificate_failures = 0;  // certificates failing independent re-verification
    std::size_t candidate_failures = 0;
};

ScanResult scan_returns(const PipelineSettings& s, const Trajectory& traj, const MeasureSpectrum& ms);
NearReturnOptions return_options(const PipelineSettings& s);

/// Up to `limit` candidates, best first, skipping any whose (i, j) lie within
/// `separation` samples of an already selected one.
std::vector<std::size_t> distinct_candidates(const std::vector<ReturnCandidate>& cands, std::size_t separation,
                                             std::size_t limit);

/// distinct_candidates applied separately to the return-time bands
/// (0, tiers[0]], (tiers[0], tiers[1]], ..., `per_tier` from each band.
/// Returned indices are in band order, best first within a band.
std::vector<std::size_t> select_by_period(const std::vector<ReturnCandidate>& cands, const Trajectory& traj,
                                          const std::vector<double>& tiers, std::size_t separation,
                                          std::size_t per_tier);

struct ClosureAttempt {
    ReturnCandidate candidate;
    bool closed = false;
    std::string failure;
    PeriodicOrbit orbit;
    Reparametrization theta;
    ShadowingReport shadowing;
    PeriodicSpectrum spectrum;
};

/// Closes the segment [i, j], fits theta, validates shadowing and computes the
/// orbit's spectrum. Closing and fitting failures are recorded, not thrown.
ClosureAttempt close_candidate(const PipelineSettings& s, const Trajectory& traj, const ReturnCandidate& cand);

}  // namespace lpflow
