#include "lpflow/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lpflow/errors.hpp"

namespace lpflow {

namespace {

// Modified Gram-Schmidt in place; throws if the columns are (nearly) dependent.
void orthonormalize(Matrix& m)
{
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index k = 0; k < j; ++k) {
            m.col(j) -= m.col(k).dot(m.col(j)) * m.col(k);
        }
        const double n = m.col(j).norm();
        if (!(n > 1e-12)) throw DegenerateError("frame transport lost rank");
        m.col(j) /= n;
    }
}

}  // namespace

NormalFrame NormalFrame::at(const VectorField& f, const Vector& x) { return at(x, f.value(x)); }

NormalFrame NormalFrame::at(const Vector& x, const Vector& field_value)
{
    if (!(field_value.norm() > 0.0)) throw SingularityError("normal frame requested at a singularity");
    const Eigen::Index d = x.size();
    const Matrix column = field_value;
    Eigen::HouseholderQR<Matrix> qr(column);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    return {x, field_value, q.rightCols(d - 1)};
}

NormalFrame NormalFrame::transported_to(const Vector& x, const Vector& field_value) const
{
    if (!(field_value.norm() > 0.0)) throw SingularityError("frame transported onto a singularity");
    const Vector u = field_value.normalized();
    Matrix b = basis - u * (u.transpose() * basis);
    orthonormalize(b);
    // second pass removes the residual component along X left by rounding
    b -= u * (u.transpose() * b);
    orthonormalize(b);
    return {x, field_value, std::move(b)};
}

double NormalFrame::defect() const
{
    const Eigen::Index m = basis.cols();
    const double gram = (basis.transpose() * basis - Matrix::Identity(m, m)).cwiseAbs().maxCoeff();
    const double perp = (basis.transpose() * field.normalized()).cwiseAbs().maxCoeff();
    return std::max(gram, perp);
}

PoincareConfig PoincareConfig::for_field(const VectorField& f, const IntegratorConfig& integrator)
{
    PoincareConfig cfg;
    cfg.integrator = integrator;
    if (integrator.box.bounded()) cfg.singular_threshold = 1e-8 * field_bound(f, integrator.box);
    return cfg;
}

SectionSpec make_section(const VectorField& f, const Vector& anchor, const PoincareConfig& cfg)
{
    NormalFrame frame = NormalFrame::at(f, anchor);
    const double r = cfg.section_beta * frame.field.norm();
    return {anchor, r, std::move(frame)};
}

Vector normal_projection(const Vector& field_value, const Vector& v)
{
    const double n2 = field_value.squaredNorm();
    if (!(n2 > 0.0)) throw SingularityError("projection onto the normal space of a singularity");
    return v - (field_value.dot(v) / n2) * field_value;
}

Matrix FramedTangent::lpf() const
{
    const Vector u = end_frame.field.normalized();
    Matrix img = phi * start_frame.basis;
    img -= u * (u.transpose() * img);
    return end_frame.basis.transpose() * img;
}

FramedTangent transport_along(const VectorField& f, const Vector& x, double t, const PoincareConfig& cfg)
{
    return transport_along(f, NormalFrame::at(f, x), t, cfg);
}

FramedTangent transport_along(const VectorField& f, const NormalFrame& start_frame, double t,
                              const PoincareConfig& cfg)
{
    if (t < 0.0) throw ConfigError("transport_along needs t >= 0; reverse the field for backward time");
    const int d = f.dimension();
    if (start_frame.field.norm() < cfg.singular_threshold) {
        throw SingularityError("start point is within the singularity threshold");
    }
    NormalFrame frame = start_frame;
    const double nsub = std::max(1.0, std::ceil(t / cfg.frame_dt - 1e-9));
    const double sample_dt = t > 0.0 ? t / nsub : 0.0;
    auto observer = [&](double, const Vector& y, const Vector& dy) {
        const Vector xv = y.head(d);
        const Vector fx = dy.head(d);
        if (fx.norm() < cfg.singular_threshold) {
            throw SingularityError("orbit passed within the singularity threshold");
        }
        frame = frame.transported_to(xv, fx);
    };
    TangentState ts = propagate_tangent(f, start_frame.base, t, cfg.integrator, sample_dt, observer);
    return {start_frame.base, ts.state, ts.phi, start_frame, frame};
}

namespace {

Matrix project_in_frames(const Vector& x_end_field, const Matrix& phi,
                         const std::pair<NormalFrame, NormalFrame>& frames)
{
    const Vector u = x_end_field.normalized();
    Matrix img = phi * frames.first.basis;
    img -= u * (u.transpose() * img);
    return frames.second.basis.transpose() * img;
}

void check_frames(const std::pair<NormalFrame, NormalFrame>& frames, const Vector& x, const Vector& fx,
                  const Vector& y, const Vector& fy)
{
    const double tol = 1e-6;
    if (frames.first.basis.rows() != x.size() || frames.second.basis.rows() != x.size() ||
        frames.first.basis.cols() != x.size() - 1 || frames.second.basis.cols() != x.size() - 1) {
        throw ConfigError("frame has wrong shape");
    }
    auto perp = [](const Matrix& b, const Vector& v) {
        return (b.transpose() * v.normalized()).cwiseAbs().maxCoeff();
    };
    if (perp(frames.first.basis, fx) > tol) throw ConfigError("input frame is not normal to X(x)");
    if (perp(frames.second.basis, fy) > tol) throw ConfigError("output frame is not normal to X(phi_t x)");
    (void)y;
}

}  // namespace

Matrix linear_poincare(const VectorField& f, const Vector& x, double t,
                       const std::pair<NormalFrame, NormalFrame>& frames, const PoincareConfig& cfg)
{
    const FramedTangent ft = transport_along(f, NormalFrame::at(f, x), t, cfg);
    check_frames(frames, x, ft.start_frame.field, ft.end, ft.end_frame.field);
    return project_in_frames(ft.end_frame.field, ft.phi, frames);
}

Matrix scaled_linear_poincare(const VectorField& f, const Vector& x, double t,
                              const std::pair<NormalFrame, NormalFrame>& frames, const PoincareConfig& cfg)
{
    const FramedTangent ft = transport_along(f, NormalFrame::at(f, x), t, cfg);
    check_frames(frames, x, ft.start_frame.field, ft.end, ft.end_frame.field);
    return (ft.start_speed() / ft.end_speed()) * project_in_frames(ft.end_frame.field, ft.phi, frames);
}

std::pair<Vector, Vector> extended_lpf(const VectorField& f, const Vector& x, double t, const Vector& v1,
                                       const Vector& v2, const PoincareConfig& cfg)
{
    if (std::abs(v1.norm() - 1.0) > 1e-10) throw ConfigError("extended_lpf needs a unit first vector");
    if (std::abs(v1.dot(v2)) > 1e-10 * std::max(1.0, v2.norm())) {
        throw ConfigError("extended_lpf needs orthogonal input vectors");
    }
    const Matrix phi = tangent_flow(f, x, t, cfg.integrator);
    Vector w1 = phi * v1;
    Vector w2 = phi * v2;
    const double n2 = w1.squaredNorm();
    if (!(n2 > 1e-300)) throw DegenerateError("Phi_t v1 vanished");
    w2 -= (w1.dot(w2) / n2) * w1;
    return {std::move(w1), std::move(w2)};
}

Crossing section_crossing(const VectorField& f, const SectionSpec& section, const Vector& y,
                          const PoincareConfig& cfg, double nominal)
{
    if (!(nominal > 0.0)) throw ConfigError("nominal return time must be positive");
    const Vector n = section.normal();
    auto g = [&](const Vector& p) { return (p - section.anchor).dot(n); };

    constexpr int grid = 200;
    const double window = 2.0 * nominal;
    const Trajectory tr = integrate_flow(f, y, 0.0, window, cfg.integrator, window / grid);

    std::vector<Crossing> found;
    for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
        const double ga = g(tr.states[k]);
        const double gb = g(tr.states[k + 1]);
        if (k == 0 && ga == 0.0) continue;  // t = 0 is excluded
        // only crossings in the direction of the flow through the section
        if (!(ga <= 0.0 && gb > 0.0)) continue;

        // refine inside [ta, tb]: bisection, then safeguarded secant
        const Vector& base = tr.states[k];
        const double t0 = tr.times[k];
        double lo = 0.0, hi = tr.times[k + 1] - t0;
        double glo = ga, ghi = gb;
        auto eval = [&](double s) { return flow_map(f, base, s, cfg.integrator); };
        Vector p_lo = base;
        while (hi - lo > 1e-4 * nominal && glo != 0.0 && ghi != 0.0) {
            const double mid = 0.5 * (lo + hi);
            const Vector pm = eval(mid);
            const double gm = g(pm);
            if ((gm <= 0.0) == (glo <= 0.0) && gm != 0.0) {
                lo = mid;
                glo = gm;
                p_lo = pm;
            } else {
                hi = mid;
                ghi = gm;
            }
        }
        double s = glo == 0.0 ? lo : (ghi == 0.0 ? hi : lo - glo * (hi - lo) / (ghi - glo));
        Vector ps = eval(s);
        for (int it = 0; it < 60; ++it) {
            const double gs = g(ps);
            if (gs == 0.0) break;
            if ((gs < 0.0) == (glo < 0.0)) {
                lo = s;
                glo = gs;
            } else {
                hi = s;
                ghi = gs;
            }
            double next = lo - glo * (hi - lo) / (ghi - glo);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            const double step = std::abs(next - s);
            s = next;
            ps = eval(s);
            if (step < 1e-10 || hi - lo < 1e-10) break;
        }
        if ((ps - section.anchor).norm() <= section.radius) {
            found.push_back({t0 + s, ps, false});
        }
    }
    if (found.empty()) throw NoCrossingError("no crossing of the section disk within (0, 2*nominal)");
    // A recurrent orbit can pass through the disk more than once; the
    // crossing nearest the nominal return time is the continuation of x.
    Crossing best = *std::min_element(found.begin(), found.end(), [&](const Crossing& a, const Crossing& b) {
        return std::abs(a.time - nominal) < std::abs(b.time - nominal);
    });
    best.ambiguous = found.size() > 1;
    return best;
}

Vector sectional_poincare_map(const VectorField& f, const Vector& x, double T, const Vector& y_offset,
                              const PoincareConfig& cfg)
{
    if (!(T > 0.0)) throw ConfigError("sectional Poincare map needs T > 0");
    const NormalFrame start = NormalFrame::at(f, x);
    if (y_offset.size() != x.size() - 1) throw ConfigError("offset must have d-1 coordinates");
    if (y_offset.norm() > cfg.section_beta * start.field.norm()) {
        throw ConfigError("offset exceeds the section radius");
    }
    const int hops = std::max(1, static_cast<int>(std::lround(T)));
    const double h = T / hops;

    // reference orbit and target frame
    const Trajectory ref = integrate_flow(f, x, 0.0, T, cfg.integrator, h);
    const FramedTangent ft = transport_along(f, start, T, cfg);

    Vector y = x + start.basis * y_offset;
    for (int j = 1; j <= hops; ++j) {
        const SectionSpec sec = make_section(f, ref.states[static_cast<std::size_t>(j)], cfg);
        y = section_crossing(f, sec, y, cfg, h).point;
    }
    return ft.end_frame.basis.transpose() * (y - ref.states.back());
}

}  // namespace lpflow
