#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "lpflow/errors.hpp"
#include "lpflow/orbits.hpp"
#include "support.hpp"

using namespace lpflow;
using namespace testing_support;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const PeriodicOrbit& hopf_orbit()
{
    static const PeriodicOrbit orbit = [] {
        const auto f = VectorField::hopf_cylinder();
        const Trajectory seg = integrate_flow(f, vec({1.05, 0.0, 0.01}), 0.0, kTwoPi, {}, 0.05);
        return close_orbit(f, seg);
    }();
    return orbit;
}

// The best near return of a Lorenz orbit with duration in [1.4, 1.7].
Trajectory lorenz_near_return()
{
    const auto f = VectorField::lorenz();
    const Trajectory tr = integrate_flow(f, lorenz_attractor_point(), 0.0, 60.0, {}, 0.01);
    std::size_t bi = 0, bj = 0;
    double best = 1e300;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        for (std::size_t j = i + 140; j <= i + 170 && j < tr.size(); ++j) {
            const double d = (tr.states[i] - tr.states[j]).norm();
            if (d < best) {
                best = d;
                bi = i;
                bj = j;
            }
        }
    }
    return tr.slice(bi, bj);
}

const PeriodicOrbit& lorenz_orbit()
{
    static const PeriodicOrbit orbit = close_orbit(VectorField::lorenz(), lorenz_near_return());
    return orbit;
}

// Floquet exponents from a single variational integration over the whole
// period, projected onto the canonical normal frame at p.
std::vector<double> direct_floquet(const VectorField& f, const PeriodicOrbit& orbit)
{
    const Matrix phi = tangent_flow(f, orbit.point, orbit.period, ClosingOptions::tight_integrator());
    const NormalFrame fr = NormalFrame::at(f, orbit.point);
    const Vector u = fr.field.normalized();
    Matrix img = phi * fr.basis;
    img -= u * (u.transpose() * img);
    const Matrix m = fr.basis.transpose() * img;
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Matrix>(m, false).eigenvalues();
    std::vector<double> out;
    for (int j = 0; j < ev.size(); ++j) out.push_back(std::log(std::abs(ev(j))) / orbit.period);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("Hopf cylinder segment closes onto the unit circle with period 2 pi")
{
    const PeriodicOrbit& o = hopf_orbit();
    CHECK(std::abs(o.period - kTwoPi) <= 1e-6);
    CHECK(o.closure_residual <= 1e-8 * o.diameter);
    CHECK(std::abs(o.point.head(2).norm() - 1.0) <= 1e-8);
    CHECK(std::abs(o.point(2)) <= 1e-8);
    for (std::size_t i = 1; i < o.residual_history.size(); ++i) {
        CHECK(o.residual_history[i] < o.residual_history[i - 1]);
    }
}

TEST_CASE("Hopf cylinder periodic spectrum is {-2, -1}")
{
    const auto f = VectorField::hopf_cylinder();
    const PeriodicSpectrum ps = periodic_spectrum(f, hopf_orbit(), {});
    REQUIRE(ps.spectrum.size() == 2);
    CHECK(std::abs(ps.spectrum.exponents[0] + 2.0) <= 1e-3);
    CHECK(std::abs(ps.spectrum.exponents[1] + 1.0) <= 1e-3);
    CHECK(ps.hyperbolic);
    CHECK(ps.schur_converged);

    const auto direct = direct_floquet(f, hopf_orbit());
    CHECK(std::abs(direct[0] - ps.spectrum.exponents[0]) <= 1e-6);
    CHECK(std::abs(direct[1] - ps.spectrum.exponents[1]) <= 1e-6);
}

TEST_CASE("planar Hopf cycle has exponent -2")
{
    const auto f = VectorField::planar_hopf();
    const Trajectory seg = integrate_flow(f, vec({1.1, 0.0}), 0.0, kTwoPi, {}, 0.05);
    const PeriodicOrbit o = close_orbit(f, seg);
    CHECK(std::abs(o.period - kTwoPi) <= 1e-6);
    const PeriodicSpectrum ps = periodic_spectrum(f, o, {});
    REQUIRE(ps.spectrum.size() == 1);
    CHECK(std::abs(ps.spectrum.exponents[0] + 2.0) <= 1e-3);
}

TEST_CASE("an exactly periodic segment converges in at most two iterations and is unchanged")
{
    const auto f = VectorField::hopf_cylinder();
    const Trajectory seg = integrate_flow(f, vec({1.0, 0.0, 0.0}), 0.0, kTwoPi, ClosingOptions::tight_integrator(), 0.05);
    const PeriodicOrbit o = close_orbit(f, seg);
    CHECK(o.iterations <= 2);
    CHECK((o.point - vec({1.0, 0.0, 0.0})).norm() <= 1e-8);
    CHECK(std::abs(o.period - kTwoPi) <= 1e-8);
}

TEST_CASE("period does not depend on the number of shooting nodes")
{
    const auto f = VectorField::lorenz();
    const Trajectory seg = lorenz_near_return();
    ClosingOptions a;
    a.nodes = 8;
    ClosingOptions b;
    b.nodes = 16;
    const PeriodicOrbit oa = close_orbit(f, seg, a);
    const PeriodicOrbit ob = close_orbit(f, seg, b);
    CHECK(std::abs(oa.period - ob.period) <= 1e-9 * oa.period);
}

TEST_CASE("a Lorenz near return closes to a saddle orbit obeying Liouville's formula")
{
    const auto f = VectorField::lorenz();
    const PeriodicOrbit& o = lorenz_orbit();
    CHECK(o.closure_residual <= 1e-8 * o.diameter);
    CHECK(o.period > 1.0);
    const PeriodicSpectrum ps = periodic_spectrum(f, o, {});
    REQUIRE(ps.spectrum.size() == 2);
    CHECK(ps.hyperbolic);
    CHECK(ps.spectrum.exponents[0] < 0.0);
    CHECK(ps.spectrum.exponents[1] > 0.0);
    // the multipliers of psi multiply to the flow's volume change over the period
    const double divergence = -(10.0 + 1.0 + 8.0 / 3.0);
    CHECK(std::abs(ps.spectrum.exponents[0] + ps.spectrum.exponents[1] - divergence) <= 1e-6);
}

TEST_CASE("periodic spectrum does not depend on the base point")
{
    const auto f = VectorField::lorenz();
    const PeriodicOrbit& o = lorenz_orbit();
    const PeriodicSpectrum a = periodic_spectrum(f, o, {});
    for (double frac : {0.21, 0.5, 0.83}) {
        const PeriodicOrbit r = shift_phase(f, o, frac * o.period);
        CHECK(std::abs(r.period - o.period) <= 1e-12 * o.period);
        const PeriodicSpectrum b = periodic_spectrum(f, r, {});
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(std::abs(a.spectrum.exponents[i] - b.spectrum.exponents[i]) <= 1e-6);
        }
    }
}

TEST_CASE("scaled and unscaled monodromy agree over a closed orbit")
{
    const auto f = VectorField::lorenz();
    const PeriodicOrbit& o = lorenz_orbit();
    const Matrix m = monodromy(f, o, {}, false);
    const Matrix ms = monodromy(f, o, {}, true);
    CHECK((m - ms).norm() <= 1e-10 * m.norm());
}

TEST_CASE("fitted theta recovers a uniform time dilation")
{
    const PeriodicOrbit& o = hopf_orbit();
    const auto f = VectorField::hopf_cylinder();
    const double a = 0.05;
    Trajectory seg;
    for (double t = 0.0; t <= o.period / (1.0 + a) + 1e-12; t += 0.05) {
        seg.times.push_back(t);
        const Vector x = o.state_at((1.0 + a) * t);
        seg.states.push_back(x);
        seg.velocities.push_back((1.0 + a) * f.value(x));
    }
    const Reparametrization th = fit_reparametrization(seg, o);
    CHECK(std::abs(th.min_slope - (1.0 + a)) <= 1e-3);
    CHECK(std::abs(th.max_slope - (1.0 + a)) <= 1e-3);
    CHECK(validate_shadowing(seg, o, th, 0.1).pass);
    CHECK_FALSE(validate_shadowing(seg, o, th, 0.04).slope_ok);
}

TEST_CASE("shadowing fails once the orbit is translated by ten tolerances")
{
    // a true orbit started 1e-3 off the closed orbit shadows it closely for one period
    const auto f = VectorField::lorenz();
    const PeriodicOrbit& o = lorenz_orbit();
    const NormalFrame fr = NormalFrame::at(f, o.point);
    const Trajectory seg = integrate_flow(f, o.point + 1e-3 * fr.basis.col(0), 0.0, o.period, {}, 0.01);
    const double eps = 0.1;
    const Reparametrization th = fit_reparametrization(seg, o);
    const ShadowingReport ok = validate_shadowing(seg, o, th, eps);
    CHECK(ok.pass);
    CHECK(ok.grid_points >= 10 * static_cast<std::size_t>(seg.duration()));

    double min_speed = 1e300;
    for (std::size_t i = 0; i < seg.size(); ++i) min_speed = std::min(min_speed, seg.field_norm(i));
    PeriodicOrbit moved = o;
    const Vector shift = vec({1.0, 0.0, 0.0}) * (10.0 * eps * min_speed);
    for (auto& s : moved.samples.states) s += shift;
    moved.point += shift;
    const ShadowingReport bad = validate_shadowing(seg, moved, th, eps);
    CHECK_FALSE(bad.pass);
    CHECK(bad.max_relative_distance >= 9.0 * eps);
}

TEST_CASE("fit fails when the orbit is far from the segment")
{
    const PeriodicOrbit& o = hopf_orbit();
    const auto f = VectorField::hopf_cylinder();
    Trajectory seg;
    for (double t = 0.0; t <= 3.0; t += 0.05) {
        seg.times.push_back(t);
        const Vector x = o.state_at(t) + vec({0.0, 0.0, 5.0});
        seg.states.push_back(x);
        seg.velocities.push_back(o.samples.velocities.front().normalized());
    }
    CHECK_THROWS_AS(fit_reparametrization(seg, o), FitError);
}

TEST_CASE("a segment far from any closed orbit of similar period is rejected")
{
    const auto f = VectorField::hopf_cylinder();
    const Trajectory seg = integrate_flow(f, vec({1.05, 0.0, 0.01}), 0.0, std::numbers::pi, {}, 0.05);
    CHECK_THROWS_AS(close_orbit(f, seg), ClosingError);
}
