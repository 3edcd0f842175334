#pragma once

#include <utility>

#include "lpflow/field.hpp"
#include "lpflow/flow.hpp"

namespace lpflow {

/// Orthonormal basis of the normal space N_x = X(x)^perp at a regular point.
struct NormalFrame {
    Vector base;
    Vector field;
    Matrix basis;  // d x (d-1), columns orthonormal and orthogonal to `field`

    /// Canonical frame built from a Householder reflection of X(x).
    static NormalFrame at(const VectorField& f, const Vector& x);
    static NormalFrame at(const Vector& x, const Vector& field_value);

    /// Projects this frame onto N at the new point and re-orthonormalizes
    /// (modified Gram-Schmidt, so column orientation is kept).
    NormalFrame transported_to(const Vector& x, const Vector& field_value) const;

    /// Max deviation from orthonormality and from orthogonality to X.
    double defect() const;
};

struct SectionSpec {
    Vector anchor;
    double radius = 0.0;
    NormalFrame frame;

    Vector normal() const { return frame.field.normalized(); }
};

struct PoincareConfig {
    IntegratorConfig integrator;
    /// Section radius relative to |X(anchor)|.
    double section_beta = 0.05;
    /// Orbit points with |X| below this abort normal-bundle operations.
    double singular_threshold = 1e-8;
    /// Frames are re-projected at least this often along an orbit.
    double frame_dt = 0.01;

    /// Threshold set to 1e-8 * K0 over the integrator box (absolute 1e-8 if unbounded).
    static PoincareConfig for_field(const VectorField& f, const IntegratorConfig& integrator);
};

SectionSpec make_section(const VectorField& f, const Vector& anchor, const PoincareConfig& cfg);

/// v - <v, X>/|X|^2 X.
Vector normal_projection(const Vector& field_value, const Vector& v);

/// Tangent flow over [0, t] together with frames transported along the orbit.
struct FramedTangent {
    Vector start;
    Vector end;
    Matrix phi;
    NormalFrame start_frame;
    NormalFrame end_frame;

    double start_speed() const { return start_frame.field.norm(); }
    double end_speed() const { return end_frame.field.norm(); }
    /// psi_t in the two frames.
    Matrix lpf() const;
    /// psi*_t = |X(x)| / |X(phi_t x)| psi_t.
    Matrix scaled_lpf() const { return (start_speed() / end_speed()) * lpf(); }
};

/// t >= 0. Starts from `start_frame` (canonical frame if omitted).
FramedTangent transport_along(const VectorField& f, const Vector& x, double t, const PoincareConfig& cfg);
FramedTangent transport_along(const VectorField& f, const NormalFrame& start_frame, double t,
                              const PoincareConfig& cfg);

/// psi_t expressed in the given frames at x and phi_t(x): P[j,i] = <n_j^out, proj Phi_t n_i^in>.
Matrix linear_poincare(const VectorField& f, const Vector& x, double t,
                       const std::pair<NormalFrame, NormalFrame>& frames, const PoincareConfig& cfg);
Matrix scaled_linear_poincare(const VectorField& f, const Vector& x, double t,
                              const std::pair<NormalFrame, NormalFrame>& frames, const PoincareConfig& cfg);

/// Theta_t(v1, v2) = (Phi_t v1, Phi_t v2 - <Phi_t v1, Phi_t v2>/|Phi_t v1|^2 Phi_t v1).
std::pair<Vector, Vector> extended_lpf(const VectorField& f, const Vector& x, double t, const Vector& v1,
                                       const Vector& v2, const PoincareConfig& cfg);

struct Crossing {
    double time = 0.0;
    Vector point;
    bool ambiguous = false;
};

/// Time in (0, 2*nominal) at which the orbit of y crosses the section disk
/// along the flow direction. The section is normally anchored at phi_nominal(x)
/// for y near x. When the disk is crossed several times, the crossing closest
/// to `nominal` is returned and flagged as ambiguous.
Crossing section_crossing(const VectorField& f, const SectionSpec& section, const Vector& y,
                          const PoincareConfig& cfg, double nominal = 1.0);

/// Holonomy N_x -> N_{phi_T x}: offsets are coordinates in the canonical frame at x
/// and in the transported frame at phi_T(x) (the frames used by transport_along).
Vector sectional_poincare_map(const VectorField& f, const Vector& x, double T, const Vector& y_offset,
                              const PoincareConfig& cfg);

}  // namespace lpflow
