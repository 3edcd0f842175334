#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "lpflow/field.hpp"

namespace lpflow {

enum class Method { RK4, RK45 };

struct IntegratorConfig {
    Method method = Method::RK45;
    /// Fixed step for RK4, initial step guess for RK45.
    double step = 1e-2;
    double abs_tol = 1e-10;
    double rel_tol = 1e-9;
    Box box;
    long max_steps = 50'000'000;

    void validate() const;
};

/// Time-stamped samples of an orbit. Between samples the orbit is
/// reconstructed by cubic Hermite interpolation using the stored velocities,
/// so the interpolation error scales like h^4 |x''''| / 384.
class Trajectory {
public:
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> velocities;
    std::vector<Vector> accelerations;  // DX(x) X(x), optional

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }
    int dimension() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
    double start_time() const { return times.front(); }
    double end_time() const { return times.back(); }
    double duration() const { return times.back() - times.front(); }

    double field_norm(std::size_t i) const { return velocities[i].norm(); }
    std::vector<double> field_norms() const;

    /// Hermite interpolation, t clamped to [start_time, end_time].
    Vector state_at(double t) const;

    /// Samples [first, last] inclusive; time stamps shifted so the slice starts at 0.
    Trajectory slice(std::size_t first, std::size_t last) const;

    /// CSV: a "# schema_version=1" line, then columns t, x1..xd, |X|.
    void write_csv(std::ostream& os) const;
    static Trajectory read_csv(std::istream& is, const VectorField& field);
};

/// Explicit Runge-Kutta driver for autonomous systems y' = f(y).
/// The first `box_dim` components of y are checked against the working box
/// after each accepted step.
class OdeSolver {
public:
    using Rhs = std::function<void(const Vector& y, Vector& dy)>;
    /// Called with (elapsed time, y, f(y)) at t = 0, every multiple of the
    /// sample interval, and at the final time.
    using Observer = std::function<void(double, const Vector&, const Vector&)>;

    OdeSolver(const IntegratorConfig& cfg, int box_dim);

    /// Advances y in place by `duration` >= 0. sample_dt <= 0 reports every accepted step.
    void advance(const Rhs& rhs, Vector& y, double duration, double sample_dt,
                 const Observer& observer = {});

    long steps_taken() const { return steps_; }

private:
    bool dopri_step(const Rhs& rhs, const Vector& y, const Vector& k1, double h,
                    Vector& y_new, Vector& k7, double& err);
    void rk4_step(const Rhs& rhs, const Vector& y, const Vector& k1, double h, Vector& y_new);
    bool in_box(const Vector& y) const;

    IntegratorConfig cfg_;
    int box_dim_;
    long steps_ = 0;
    double h_ = 0.0;
    Vector k2_, k3_, k4_, k5_, k6_, tmp_, err_;
};

/// phi_t(x0) sampled on [t_a, t_b]. t_a == t_b gives a single sample.
/// sample_dt > 0 places samples exactly on t_a + k*sample_dt; otherwise every step is kept.
Trajectory integrate_flow(const VectorField& field, const Vector& x0, double t_a, double t_b,
                          const IntegratorConfig& cfg, double sample_dt = 0.0);

/// Endpoint phi_t(x0) for t >= 0.
Vector flow_map(const VectorField& field, const Vector& x0, double t, const IntegratorConfig& cfg);

struct TangentState {
    Vector state;  // phi_t(x0)
    Matrix phi;    // Phi_t(x0)
};

/// Jointly integrates the orbit and the variational equation M' = DX(phi_t x0) M, M(0) = I.
/// Negative t integrates -X forward. The observer (if any) sees the augmented
/// state [x; vec(M)] at the requested sample interval.
TangentState propagate_tangent(const VectorField& field, const Vector& x0, double t,
                               const IntegratorConfig& cfg, double sample_dt = 0.0,
                               const OdeSolver::Observer& observer = {});

/// Phi_t(x0) = d phi_t at x0.
Matrix tangent_flow(const VectorField& field, const Vector& x0, double t, const IntegratorConfig& cfg);

/// v / |v|; throws DegenerateError on a zero vector.
Vector unit_tangent(const Vector& v);

}  // namespace lpflow
