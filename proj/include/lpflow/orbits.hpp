#pragma once

#include <cstddef>
#include <vector>

#include "lpflow/flow.hpp"
#include "lpflow/poincare.hpp"
#include "lpflow/spectra.hpp"

namespace lpflow {

/// A closed orbit found by multiple shooting. nodes[0] is the base point p and
/// node k flies for flight_times[k] to (approximately) node k + 1 mod m.
struct PeriodicOrbit {
    Vector point;
    double period = 0.0;
    std::vector<Vector> nodes;
    std::vector<double> flight_times;
    Trajectory samples;              // one period starting at p, t in [0, period]
    double closure_residual = 0.0;   // |phi_period(p) - p| from a single integration
    double shooting_defect = 0.0;    // max_k |phi_{tau_k}(z_k) - z_{k+1}|
    double diameter = 0.0;           // max pairwise distance of the samples
    int iterations = 0;
    std::vector<double> residual_history;  // Newton residual norm at each accepted iterate

    /// Orbit point at time s (taken modulo the period).
    Vector state_at(double s) const;
};

struct ClosingOptions {
    std::size_t nodes = 0;  // 0 selects max(8, duration / 2)
    int max_iter = 50;
    /// Convergence when the residual norm is below tolerance * segment diameter.
    double tolerance = 1e-11;
    /// Accepted closure |phi_period(p) - p| relative to the orbit diameter.
    double closure_tolerance = 1e-8;
    /// Accepted relative deviation of the period from the segment duration.
    double period_window = 0.2;
    IntegratorConfig integrator = tight_integrator();

    static IntegratorConfig tight_integrator();
};

/// Multiple-shooting Newton on (z_0..z_{m-1}, tau_0..tau_{m-1}) with residuals
/// phi_{tau_k}(z_k) - z_{k+1 mod m} and the phase condition
/// <z_0 - x(0), X(x(0))> = 0. The system has more unknowns than equations
/// (time can be traded between neighbouring nodes), so each step is the
/// minimum-norm Gauss-Newton correction, damped by Armijo backtracking.
/// Throws ClosingError on non-convergence or when the result violates the
/// closure or period contracts.
PeriodicOrbit close_orbit(const VectorField& f, const Trajectory& segment, const ClosingOptions& opts = {});

/// Same orbit with base point phi_s(p); nodes are advanced along the flow.
PeriodicOrbit shift_phase(const VectorField& f, const PeriodicOrbit& orbit, double s,
                          const IntegratorConfig& integrator = ClosingOptions::tight_integrator());

/// theta sampled at the segment's sample times. `phase` is the orbit time
/// matched to x(0), so the shadowing point is orbit.state_at(phase + theta(t)).
struct Reparametrization {
    double phase = 0.0;
    std::vector<double> t;
    std::vector<double> theta;
    std::vector<double> distances;  // |x(t) - orbit(phase + theta(t))|
    double min_slope = 0.0;
    double max_slope = 0.0;

    /// Piecewise-linear theta(t).
    double operator()(double time) const;
};

struct FitOptions {
    double block_time = 1.0;   // matching window is +/- half a block time around the prediction
    double max_relative_distance = 1.0;  // FitError beyond this multiple of |X(x(t))|
    int coarse_points = 25;
};

Reparametrization fit_reparametrization(const Trajectory& segment, const PeriodicOrbit& orbit,
                                        const FitOptions& opts = {});

struct ShadowingReport {
    double max_relative_distance = 0.0;  // max_t d(x(t), orbit(theta(t))) / |X(x(t))|
    double min_slope = 0.0;
    double max_slope = 0.0;
    double eps = 0.0;
    std::size_t grid_points = 0;
    bool distance_ok = false;
    bool slope_ok = false;
    bool pass = false;
};

/// Evaluated on the segment samples refined to at least 10 points per block time.
ShadowingReport validate_shadowing(const Trajectory& segment, const PeriodicOrbit& orbit,
                                   const Reparametrization& theta, double eps, double block_time = 1.0);

/// psi (or psi*) over one period: blocks between consecutive shooting nodes,
/// subdivided to at most `block_time`. Frames are carried across nodes by
/// projection, and the frame holonomy is folded into the last block, so the
/// block product is the monodromy in the canonical frame at p. Integration
/// tolerances are tightened to at least those used for closing.
CocycleSequence periodic_cocycle(const VectorField& f, const PeriodicOrbit& orbit, const PoincareConfig& cfg,
                                 bool scaled = true, double block_time = 1.0);
Matrix monodromy(const VectorField& f, const PeriodicOrbit& orbit, const PoincareConfig& cfg, bool scaled = true);

struct PeriodicSpectrum {
    LyapunovSpectrum spectrum;
    bool hyperbolic = false;       // every |lambda_i| above the grouping tolerance
    bool schur_converged = false;  // periodic QR sweeps converged (else direct eigenvalues)
    int sweeps = 0;
};

/// lambda_i(p) = log(nu_i) / period from the Floquet multipliers of psi* over
/// one period. Magnitudes come from repeated QR sweeps around the period, which
/// keeps widely separated multipliers (e.g. e^{-100} next to e^{5}) resolved.
PeriodicSpectrum periodic_spectrum(const VectorField& f, const PeriodicOrbit& orbit, const PoincareConfig& cfg,
                                   double block_time = 1.0);

}  // namespace lpflow
