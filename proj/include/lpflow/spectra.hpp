#pragma once

#include <cstdint>
#include <cstddef>
#include <optional>
#include <vector>

#include "lpflow/field.hpp"
#include "lpflow/poincare.hpp"

namespace lpflow {

/// Blocks A_i = psi*_T (or psi_T) along an orbit, each expressed in the
/// transported normal frames at phi_{iT}(x) and phi_{(i+1)T}(x).
struct CocycleSequence {
    double step = 1.0;
    std::vector<Matrix> blocks;

    // Base-point metadata. Empty for synthetic cocycles.
    std::vector<Vector> points;   // n + 1 points
    std::vector<double> speeds;   // |X| at the points
    std::vector<double> singularity_distances;
    std::vector<NormalFrame> frames;  // n + 1 frames: input frame of block i, frames[n] = output of last

    std::size_t size() const { return blocks.size(); }
    int dim() const { return blocks.empty() ? 0 : static_cast<int>(blocks.front().rows()); }
    bool has_points() const { return points.size() == blocks.size() + 1; }

    /// Throws NumericalError for singular or non-finite blocks, ConfigError for bad shapes.
    void validate() const;

    static CocycleSequence constant(const Matrix& a, double step, std::size_t n);
};

/// n blocks of length T chained from x0.
CocycleSequence build_cocycle(const VectorField& f, const Vector& x0, double T, std::size_t n,
                              const PoincareConfig& cfg, bool scaled = true);

/// Blocks starting at trajectory samples 0, stride, 2*stride, ...; each block
/// is integrated from the stored sample so the cocycle follows the stored orbit.
CocycleSequence build_cocycle_along(const VectorField& f, const Trajectory& traj, std::size_t stride,
                                    const PoincareConfig& cfg, bool scaled = true);

/// Product A_{first+count-1} ... A_first.
Matrix cocycle_product(const CocycleSequence& c, std::size_t first, std::size_t count);

/// Exponents sorted ascending, grouped into distinct values with multiplicities.
struct LyapunovSpectrum {
    std::vector<double> exponents;
    std::vector<double> std_errors;
    std::vector<double> values;
    std::vector<int> multiplicities;
    double min_gap = 0.0;
    double tolerance = 1e-3;

    std::size_t size() const { return exponents.size(); }
    std::size_t groups() const { return values.size(); }

    /// Adjacent exponents are merged when closer than max(min_tol, 5 * standard error).
    static LyapunovSpectrum from_exponents(std::vector<double> exponents, std::vector<double> std_errors = {},
                                           double min_tol = 1e-3);
};

struct BenettinOptions {
    /// Leading blocks discarded from the averages. -1 selects n/10 for n >= 50, else 0.
    long burn_in = -1;
    double min_tolerance = 1e-3;
};

/// QR (Benettin) estimate: Q <- qr(A_i Q), exponents = average log|diag R| / T.
LyapunovSpectrum benettin_spectrum(const CocycleSequence& c, const BenettinOptions& opts = {});

/// Per-sample Oseledec subspaces in frame coordinates, one orthonormal block per exponent group.
struct SplittingEstimate {
    std::vector<int> dims;
    std::vector<std::vector<Matrix>> bases;  // [sample][group]
    std::size_t reliable_begin = 0;          // samples with full past and future windows
    std::size_t reliable_end = 0;
    double equivariance_residual = 0.0;

    std::size_t samples() const { return bases.size(); }
    int groups() const { return static_cast<int>(dims.size()); }
    int ambient_dim() const;
    /// Orthonormal basis of E_{g_begin} + ... + E_{g_end - 1} at a sample.
    Matrix subspace(std::size_t sample, int g_begin, int g_end) const;
    /// Columns are the concatenated group bases (not orthonormal across groups).
    Matrix adapted_basis(std::size_t sample) const;

    /// Same bases at every sample.
    static SplittingEstimate uniform(std::size_t samples, const std::vector<Matrix>& group_bases);
};

struct FiltrationOptions {
    std::size_t window = 20;
};

SplittingEstimate oseledec_filtration(const CocycleSequence& c, const LyapunovSpectrum& spectrum,
                                      const FiltrationOptions& opts = {});
SplittingEstimate oseledec_filtration(const CocycleSequence& c, const FiltrationOptions& opts = {});

/// Principal-angle residual of psi* E_g(x_j) against E_g(x_{j+1}) over samples [first, last).
double equivariance_residual(const CocycleSequence& c, const SplittingEstimate& split, std::size_t first,
                             std::size_t last);

struct DominationReport {
    bool satisfied = false;
    double lambda = 0.0;     // fitted rate
    double constant = 1.0;   // minimal C >= 1 for the fitted rate
    double tail_rate = 0.0;  // decay rate over the second half of the windows
    std::vector<double> window_times;
    std::vector<double> worst_log_ratio;  // max over starts of log(|psi_t|E(x)| / m(psi_t|F(x)))
};

struct DominationOptions {
    std::size_t max_window = 20;
    double slack = 0.1;
};

/// E = groups [0, split_group), F = groups [split_group, k). Windows are taken
/// inside the reliable sample range of the splitting.
DominationReport check_domination(const CocycleSequence& c, const SplittingEstimate& split, int split_group,
                                  const DominationOptions& opts = {});

struct ConeParams {
    double rho = 2.0;
    double gamma = 0.75;
    void validate() const;
};

/// Samples the boundary of C_{gamma rho} at every block of the reliable range
/// and tests that the images lie in C_rho, using the max-of-blocks norm of the
/// splitting.
bool check_cone_invariance(const CocycleSequence& c, const SplittingEstimate& split, const ConeParams& cone,
                           int samples_per_block = 1000, std::uint64_t seed = 1);

/// First (rho, gamma) on a fixed grid (rho in {1.5, 2, 4, 8, 16, 64}, gamma in
/// {0.9, 0.75, 0.5, 0.25}, gamma * rho > 1) whose cone is invariant.
std::optional<ConeParams> search_invariant_cone(const CocycleSequence& c, const SplittingEstimate& split,
                                                int samples_per_block = 200, std::uint64_t seed = 1);

/// Products of `factor` consecutive blocks (trailing blocks that do not fill a
/// group are dropped); base-point metadata keeps every factor-th entry.
CocycleSequence coarsen(const CocycleSequence& c, std::size_t factor);
SplittingEstimate coarsen(const SplittingEstimate& split, std::size_t factor);

/// Smallest block multiple N with C e^{-lambda N step} <= 1/4, the contraction
/// at which the coarsest cone on the search grid (gamma = 1/4) can close up.
/// Throws DegenerateError when the report is not dominated.
std::size_t cone_block_multiple(const DominationReport& d, double step);

/// Compound matrix of n x n minors over lexicographically ordered index sets.
Matrix exterior_power(const Matrix& a, int n);
CocycleSequence exterior_cocycle(const CocycleSequence& c, int n);
LyapunovSpectrum exterior_spectrum(const CocycleSequence& c, int n, const BenettinOptions& opts = {});

/// {-lambda_{d-i}} ascending, multiplicities reversed.
LyapunovSpectrum time_reversal_spectrum(const LyapunovSpectrum& s);
/// {A_{n-1}^{-1}, ..., A_0^{-1}}.
CocycleSequence reversed_inverse_cocycle(const CocycleSequence& c);

/// Total multiplicity of negative exponent groups (groups within tolerance of zero count as zero).
int index_of(const LyapunovSpectrum& s);

/// sigma_3 = m(A)/|A| (1 - e^{-eps1}); |B - I| <= sigma_3 implies |ABv| >= e^{-eps1}|Av|.
double perturbation_margin(const Matrix& a, double eps1);

double operator_norm(const Matrix& a);
double co_norm(const Matrix& a);

}  // namespace lpflow
