#include "lpflow/orbits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <boost/math/tools/minima.hpp>

#include "lpflow/errors.hpp"

namespace lpflow {

namespace {

double wrap(double s, double period)
{
    double r = std::fmod(s, period);
    if (r < 0.0) r += period;
    return r;
}

// Max pairwise distance, thinned to at most ~400 points.
double diameter_of(const std::vector<Vector>& pts)
{
    const std::size_t stride = std::max<std::size_t>(1, pts.size() / 400);
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); i += stride) {
        for (std::size_t j = i + stride; j < pts.size(); j += stride) {
            best = std::max(best, (pts[i] - pts[j]).norm());
        }
    }
    return best;
}

struct Shooting {
    std::vector<Vector> z;
    std::vector<double> tau;
};

class ShootingProblem {
public:
    ShootingProblem(const VectorField& f, const Vector& anchor, const IntegratorConfig& integ)
        : f_(f), anchor_(anchor), normal_(f.value(anchor).normalized()), integ_(integ)
    {
    }

    Vector residual(const Shooting& u) const
    {
        const std::size_t m = u.z.size();
        const int d = f_.dimension();
        Vector r(static_cast<Eigen::Index>(m) * d + 1);
        for (std::size_t k = 0; k < m; ++k) {
            r.segment(static_cast<Eigen::Index>(k) * d, d) = flow_map(f_, u.z[k], u.tau[k], integ_) - u.z[(k + 1) % m];
        }
        r(r.size() - 1) = normal_.dot(u.z[0] - anchor_);
        return r;
    }

    // Residual and Jacobian together (one variational integration per node).
    void linearize(const Shooting& u, Vector& r, Matrix& jac) const
    {
        const std::size_t m = u.z.size();
        const int d = f_.dimension();
        const Eigen::Index md = static_cast<Eigen::Index>(m) * d;
        r.resize(md + 1);
        jac = Matrix::Zero(md + 1, md + static_cast<Eigen::Index>(m));
        for (std::size_t k = 0; k < m; ++k) {
            const Eigen::Index row = static_cast<Eigen::Index>(k) * d;
            const Eigen::Index next = static_cast<Eigen::Index>((k + 1) % m) * d;
            const TangentState ts = propagate_tangent(f_, u.z[k], u.tau[k], integ_);
            r.segment(row, d) = ts.state - u.z[(k + 1) % m];
            jac.block(row, row, d, d) += ts.phi;
            jac.block(row, next, d, d) -= Matrix::Identity(d, d);
            jac.block(row, md + static_cast<Eigen::Index>(k), d, 1) = f_.value(ts.state);
        }
        r(md) = normal_.dot(u.z[0] - anchor_);
        jac.block(md, 0, 1, d) = normal_.transpose();
    }

private:
    const VectorField& f_;
    Vector anchor_;
    Vector normal_;
    IntegratorConfig integ_;
};

Shooting apply_step(const Shooting& u, const Vector& delta, double lambda)
{
    Shooting out = u;
    const std::size_t m = u.z.size();
    const Eigen::Index d = u.z.front().size();
    for (std::size_t k = 0; k < m; ++k) {
        out.z[k] += lambda * delta.segment(static_cast<Eigen::Index>(k) * d, d);
        out.tau[k] += lambda * delta(static_cast<Eigen::Index>(m) * d + static_cast<Eigen::Index>(k));
    }
    return out;
}

// Samples, diameter, closure and defect for converged nodes.
PeriodicOrbit finish_orbit(const VectorField& f, const Shooting& u, const IntegratorConfig& integ)
{
    PeriodicOrbit orbit;
    orbit.nodes = u.z;
    orbit.flight_times = u.tau;
    orbit.point = u.z.front();
    orbit.period = 0.0;
    for (double t : u.tau) orbit.period += t;

    const std::size_t m = u.z.size();
    double offset = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const Trajectory piece = integrate_flow(f, u.z[k], 0.0, u.tau[k], integ);
        const std::size_t first = k == 0 ? 0 : 1;  // node k+1 replaces the end of piece k
        for (std::size_t i = first; i < piece.size(); ++i) {
            orbit.samples.times.push_back(offset + piece.times[i]);
            orbit.samples.states.push_back(piece.states[i]);
            orbit.samples.velocities.push_back(piece.velocities[i]);
            orbit.samples.accelerations.push_back(piece.accelerations[i]);
        }
        orbit.shooting_defect = std::max(orbit.shooting_defect, (piece.states.back() - u.z[(k + 1) % m]).norm());
        offset += u.tau[k];
    }
    orbit.samples.times.back() = orbit.period;
    orbit.diameter = diameter_of(orbit.samples.states);
    orbit.closure_residual = (flow_map(f, orbit.point, orbit.period, integ) - orbit.point).norm();
    return orbit;
}

}  // namespace

IntegratorConfig ClosingOptions::tight_integrator()
{
    IntegratorConfig c;
    c.method = Method::RK45;
    c.step = 1e-3;
    c.abs_tol = 1e-13;
    c.rel_tol = 1e-12;
    return c;
}

Vector PeriodicOrbit::state_at(double s) const { return samples.state_at(wrap(s, period)); }

PeriodicOrbit close_orbit(const VectorField& f, const Trajectory& segment, const ClosingOptions& opts)
{
    if (segment.size() < 2 || !(segment.duration() > 0.0)) throw ConfigError("closing needs a segment of positive duration");
    if (opts.max_iter < 1) throw ConfigError("closing needs max_iter >= 1");
    const double duration = segment.duration();
    const std::size_t m = opts.nodes > 0 ? opts.nodes
                                         : std::max<std::size_t>(8, static_cast<std::size_t>(std::lround(duration / 2.0)));

    Shooting u;
    for (std::size_t k = 0; k < m; ++k) {
        u.z.push_back(segment.state_at(segment.start_time() + duration * static_cast<double>(k) / static_cast<double>(m)));
        u.tau.push_back(duration / static_cast<double>(m));
    }
    const double scale = std::max(diameter_of(segment.states), std::numeric_limits<double>::min());
    const double target = opts.tolerance * scale;

    const ShootingProblem problem(f, segment.states.front(), opts.integrator);
    Vector r;
    Matrix jac;
    problem.linearize(u, r, jac);
    std::vector<double> history{r.norm()};
    int iterations = 0;

    while (r.norm() > target) {
        if (iterations >= opts.max_iter) throw ClosingError("multiple shooting did not converge");
        const Vector delta = Eigen::CompleteOrthogonalDecomposition<Matrix>(jac).solve(-r);
        const double r2 = r.squaredNorm();
        double lambda = 1.0;
        bool accepted = false;
        Shooting trial;
        while (lambda >= 1.0 / 1024.0) {
            trial = apply_step(u, delta, lambda);
            const bool times_ok =
                std::all_of(trial.tau.begin(), trial.tau.end(), [](double t) { return t > 0.0; });
            if (times_ok) {
                try {
                    const Vector rt = problem.residual(trial);
                    if (rt.allFinite() && rt.squaredNorm() <= (1.0 - 1e-4 * lambda) * r2) {
                        accepted = true;
                        break;
                    }
                } catch (const NumericalError&) {
                    // step left the box or hit a singularity; shorten it
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            // No further decrease: accept only if we are already at the rounding floor.
            if (r.norm() <= 1e3 * target) break;
            throw ClosingError("line search failed to reduce the shooting residual");
        }
        u = std::move(trial);
        problem.linearize(u, r, jac);
        history.push_back(r.norm());
        ++iterations;
    }

    double period = 0.0;
    for (double t : u.tau) period += t;
    if (std::abs(period - duration) > opts.period_window * duration) {
        throw ClosingError("closed orbit period is not within the allowed window of the segment duration");
    }
    PeriodicOrbit orbit = finish_orbit(f, u, opts.integrator);
    orbit.iterations = iterations;
    orbit.residual_history = std::move(history);
    if (orbit.closure_residual > opts.closure_tolerance * orbit.diameter) {
        throw ClosingError("closure residual above tolerance");
    }
    return orbit;
}

PeriodicOrbit shift_phase(const VectorField& f, const PeriodicOrbit& orbit, double s, const IntegratorConfig& integrator)
{
    const double shift = wrap(s, orbit.period);
    Shooting u;
    u.tau = orbit.flight_times;
    for (const auto& z : orbit.nodes) u.z.push_back(flow_map(f, z, shift, integrator));
    PeriodicOrbit out = finish_orbit(f, u, integrator);
    out.iterations = orbit.iterations;
    out.residual_history = orbit.residual_history;
    return out;
}

double Reparametrization::operator()(double time) const
{
    if (t.empty()) throw ConfigError("empty reparametrization");
    if (time <= t.front()) return theta.front();
    if (time >= t.back()) return theta.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
    const double w = (time - t[i]) / (t[i + 1] - t[i]);
    return (1.0 - w) * theta[i] + w * theta[i + 1];
}

Reparametrization fit_reparametrization(const Trajectory& segment, const PeriodicOrbit& orbit, const FitOptions& opts)
{
    if (segment.size() < 2) throw ConfigError("fit needs at least two segment samples");
    if (!(opts.block_time > 0.0) || opts.coarse_points < 3) throw ConfigError("invalid fit options");
    const double period = orbit.period;

    // Distance from x to the orbit point at orbit time s: coarse grid, then Brent.
    auto closest = [&](const Vector& x, double lo, double hi, int grid, double base) {
        auto dist = [&](double s) { return (orbit.state_at(base + s) - x).norm(); };
        double best_s = lo;
        double best_d = std::numeric_limits<double>::infinity();
        const double h = (hi - lo) / (grid - 1);
        for (int j = 0; j < grid; ++j) {
            const double s = lo + h * j;
            const double d = dist(s);
            if (d < best_d) {
                best_d = d;
                best_s = s;
            }
        }
        const auto res = boost::math::tools::brent_find_minima(dist, std::max(lo, best_s - h), std::min(hi, best_s + h), 40);
        if (res.second < best_d) return std::make_pair(res.first, res.second);
        return std::make_pair(best_s, best_d);
    };

    Reparametrization rep;
    const Vector& x0 = segment.states.front();
    const int phase_grid = std::max<int>(200, static_cast<int>(orbit.samples.size()));
    rep.phase = wrap(closest(x0, 0.0, period, phase_grid, 0.0).first, period);

    const double t0 = segment.start_time();
    for (std::size_t i = 0; i < segment.size(); ++i) {
        const Vector& x = segment.states[i];
        double th = 0.0;
        double d = 0.0;
        if (i == 0) {
            d = (orbit.state_at(rep.phase) - x).norm();
        } else {
            const double prev = rep.theta.back();
            const double pred = prev + (segment.times[i] - segment.times[i - 1]);
            const double lo = std::max(prev, pred - 0.5 * opts.block_time);
            const double hi = pred + 0.5 * opts.block_time;
            std::tie(th, d) = closest(x, lo, hi, opts.coarse_points, rep.phase);
        }
        if (d > opts.max_relative_distance * segment.field_norm(i)) {
            throw FitError("no orbit point within the matching window");
        }
        rep.t.push_back(segment.times[i] - t0);
        rep.theta.push_back(th);
        rep.distances.push_back(d);
    }
    rep.min_slope = std::numeric_limits<double>::infinity();
    rep.max_slope = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < rep.t.size(); ++i) {
        const double slope = (rep.theta[i + 1] - rep.theta[i]) / (rep.t[i + 1] - rep.t[i]);
        rep.min_slope = std::min(rep.min_slope, slope);
        rep.max_slope = std::max(rep.max_slope, slope);
    }
    return rep;
}

ShadowingReport validate_shadowing(const Trajectory& segment, const PeriodicOrbit& orbit, const Reparametrization& theta,
                                   double eps, double block_time)
{
    if (!(eps > 0.0) || !(block_time > 0.0)) throw ConfigError("shadowing check needs eps > 0 and block_time > 0");
    if (theta.t.size() != segment.size()) throw ConfigError("reparametrization does not match the segment samples");
    ShadowingReport rep;
    rep.eps = eps;
    const double t0 = segment.start_time();
    const double max_dt = block_time / 10.0;
    auto visit = [&](double t, double speed) {
        const Vector x = segment.state_at(t0 + t);
        const double d = (orbit.state_at(theta.phase + theta(t)) - x).norm();
        rep.max_relative_distance = std::max(rep.max_relative_distance, d / speed);
        ++rep.grid_points;
    };
    for (std::size_t i = 0; i + 1 < segment.size(); ++i) {
        const double a = theta.t[i];
        const double b = theta.t[i + 1];
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / max_dt - 1e-9)));
        const double sa = segment.field_norm(i);
        const double sb = segment.field_norm(i + 1);
        for (int j = 0; j < pieces; ++j) {
            const double w = static_cast<double>(j) / pieces;
            visit(a + w * (b - a), (1.0 - w) * sa + w * sb);
        }
    }
    visit(theta.t.back(), segment.field_norm(segment.size() - 1));

    rep.min_slope = theta.min_slope;
    rep.max_slope = theta.max_slope;
    rep.distance_ok = rep.max_relative_distance < eps;
    rep.slope_ok = rep.min_slope > 1.0 - eps && rep.max_slope < 1.0 + eps;
    rep.pass = rep.distance_ok && rep.slope_ok;
    return rep;
}

CocycleSequence periodic_cocycle(const VectorField& f, const PeriodicOrbit& orbit, const PoincareConfig& cfg, bool scaled,
                                 double block_time)
{
    if (!(block_time > 0.0)) throw ConfigError("block_time must be positive");
    // Loose tolerances would let the block chain drift off the closed orbit.
    PoincareConfig local = cfg;
    const IntegratorConfig tight = ClosingOptions::tight_integrator();
    local.integrator.abs_tol = std::min(cfg.integrator.abs_tol, tight.abs_tol);
    local.integrator.rel_tol = std::min(cfg.integrator.rel_tol, tight.rel_tol);
    CocycleSequence c;
    const NormalFrame start = NormalFrame::at(f, orbit.point);
    NormalFrame frame = start;
    std::size_t total = 0;
    for (double tau : orbit.flight_times) total += static_cast<std::size_t>(std::max(1.0, std::ceil(tau / block_time - 1e-9)));
    c.step = orbit.period / static_cast<double>(total);

    auto push_point = [&](const NormalFrame& fr) {
        c.points.push_back(fr.base);
        c.speeds.push_back(fr.field.norm());
        c.singularity_distances.push_back(f.singularity_distance(fr.base));
        c.frames.push_back(fr);
    };
    for (std::size_t k = 0; k < orbit.nodes.size(); ++k) {
        if (k > 0) frame = frame.transported_to(orbit.nodes[k], f.value(orbit.nodes[k]));
        const double tau = orbit.flight_times[k];
        const int pieces = static_cast<int>(std::max(1.0, std::ceil(tau / block_time - 1e-9)));
        for (int j = 0; j < pieces; ++j) {
            push_point(frame);
            const FramedTangent ft = transport_along(f, frame, tau / pieces, local);
            c.blocks.push_back(scaled ? ft.scaled_lpf() : ft.lpf());
            frame = ft.end_frame;
        }
    }
    // Re-express the last output in the starting frame at p.
    const Matrix holonomy = start.basis.transpose() * frame.basis;
    c.blocks.back() = holonomy * c.blocks.back();
    push_point(start);
    return c;
}

Matrix monodromy(const VectorField& f, const PeriodicOrbit& orbit, const PoincareConfig& cfg, bool scaled)
{
    const CocycleSequence c = periodic_cocycle(f, orbit, cfg, scaled);
    return cocycle_product(c, 0, c.size());
}

PeriodicSpectrum periodic_spectrum(const VectorField& f, const PeriodicOrbit& orbit, const PoincareConfig& cfg,
                                   double block_time)
{
    constexpr int kMaxSweeps = 500;
    constexpr double kHyperbolicTol = 1e-6;
    const CocycleSequence c = periodic_cocycle(f, orbit, cfg, true, block_time);
    const int n = c.dim();
    const double period = orbit.period;

    PeriodicSpectrum out;
    Matrix q = Matrix::Identity(n, n);
    Vector prev = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    Vector est(n);
    for (int sweep = 1; sweep <= kMaxSweeps; ++sweep) {
        Vector sums = Vector::Zero(n);
        for (const auto& a : c.blocks) {
            Eigen::HouseholderQR<Matrix> qr(a * q);
            const Matrix rr = qr.matrixQR().triangularView<Eigen::Upper>();
            q = qr.householderQ() * Matrix::Identity(n, n);
            for (int j = 0; j < n; ++j) sums(j) += std::log(std::abs(rr(j, j)));
        }
        est = sums / period;
        out.sweeps = sweep;
        if (sweep > 1 && ((est - prev).cwiseAbs().array() <= 1e-12 * est.cwiseAbs().array().max(1.0)).all()) {
            out.schur_converged = true;
            break;
        }
        prev = est;
    }

    std::vector<double> exps(est.data(), est.data() + n);
    if (!out.schur_converged) {
        // Multipliers of equal modulus (a complex pair) make the sweeps rotate
        // forever; read the moduli from the eigenvalues of the rescaled product.
        Matrix prod = Matrix::Identity(n, n);
        double log_scale = 0.0;
        for (const auto& a : c.blocks) {
            prod = a * prod;
            const double s = prod.norm();
            prod /= s;
            log_scale += std::log(s);
        }
        const Eigen::VectorXcd ev = Eigen::EigenSolver<Matrix>(prod, false).eigenvalues();
        for (int j = 0; j < n; ++j) exps[static_cast<std::size_t>(j)] = (std::log(std::abs(ev(j))) + log_scale) / period;
    }
    out.spectrum = LyapunovSpectrum::from_exponents(exps, {}, kHyperbolicTol);
    out.hyperbolic = std::all_of(exps.begin(), exps.end(), [](double l) { return std::abs(l) > kHyperbolicTol; });
    return out;
}

}  // namespace lpflow
