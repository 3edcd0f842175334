#include "lpflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "lpflow/errors.hpp"

namespace lpflow {

void IntegratorConfig::validate() const
{
    if (!(step > 0.0)) throw ConfigError("integrator step must be positive");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw ConfigError("integrator tolerances must be positive");
    if (max_steps <= 0) throw ConfigError("max_steps must be positive");
    if (box.lower.size() != box.upper.size()) throw ConfigError("box bounds have different sizes");
    for (Eigen::Index i = 0; i < box.lower.size(); ++i) {
        if (!(box.lower[i] < box.upper[i])) throw ConfigError("box lower bound must be below upper bound");
    }
}

std::vector<double> Trajectory::field_norms() const
{
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = velocities[i].norm();
    return out;
}

Vector Trajectory::state_at(double t) const
{
    if (empty()) throw InsufficientDataError("interpolation on an empty trajectory");
    if (size() == 1 || t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i1 = static_cast<std::size_t>(it - times.begin());
    const std::size_t i0 = i1 - 1;
    const double h = times[i1] - times[i0];
    const double s = (t - times[i0]) / h;
    if (accelerations.size() == size()) {
        // quintic Hermite with second derivatives
        const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
        const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5, h5 = 10 * s3 - 15 * s4 + 6 * s5;
        const double h1 = s - 6 * s3 + 8 * s4 - 3 * s5, h4 = -4 * s3 + 7 * s4 - 3 * s5;
        const double h2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5), h3 = 0.5 * (s3 - 2 * s4 + s5);
        return h0 * states[i0] + h5 * states[i1] + (h * h1) * velocities[i0] + (h * h4) * velocities[i1] +
               (h * h * h2) * accelerations[i0] + (h * h * h3) * accelerations[i1];
    }
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * states[i0] + (h10 * h) * velocities[i0] + h01 * states[i1] + (h11 * h) * velocities[i1];
}

Trajectory Trajectory::slice(std::size_t first, std::size_t last) const
{
    if (first > last || last >= size()) throw ConfigError("trajectory slice out of range");
    Trajectory out;
    const double t0 = times[first];
    for (std::size_t i = first; i <= last; ++i) {
        out.times.push_back(times[i] - t0);
        out.states.push_back(states[i]);
        out.velocities.push_back(velocities[i]);
        if (accelerations.size() == size()) out.accelerations.push_back(accelerations[i]);
    }
    return out;
}

void Trajectory::write_csv(std::ostream& os) const
{
    const int d = dimension();
    os << "# schema_version=1\n";
    os << "t";
    for (int j = 1; j <= d; ++j) os << ",x" << j;
    os << ",speed\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < size(); ++i) {
        os << times[i];
        for (int j = 0; j < d; ++j) os << ',' << states[i][j];
        os << ',' << velocities[i].norm() << '\n';
    }
}

Trajectory Trajectory::read_csv(std::istream& is, const VectorField& field)
{
    Trajectory out;
    std::string line;
    // optional '#' comment lines, then the header row
    do {
        if (!std::getline(is, line)) throw ConfigError("empty trajectory CSV");
    } while (!line.empty() && line.front() == '#');
    const int d = field.dimension();
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<int>(row.size()) < d + 1) throw ConfigError("trajectory CSV row has too few columns");
        Vector x(d);
        for (int j = 0; j < d; ++j) x[j] = row[j + 1];
        out.times.push_back(row[0]);
        out.velocities.push_back(field.value(x));
        out.accelerations.push_back(field.jacobian(x) * out.velocities.back());
        out.states.push_back(std::move(x));
    }
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (!(out.times[i] > out.times[i - 1])) throw ConfigError("trajectory CSV times not increasing");
    }
    return out;
}

// Dormand-Prince 5(4) tableau.
namespace {
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
}  // namespace

OdeSolver::OdeSolver(const IntegratorConfig& cfg, int box_dim) : cfg_(cfg), box_dim_(box_dim)
{
    cfg_.validate();
}

bool OdeSolver::in_box(const Vector& y) const
{
    if (!cfg_.box.bounded()) {
        return y.head(box_dim_).allFinite();
    }
    for (int i = 0; i < box_dim_; ++i) {
        if (!(y[i] >= cfg_.box.lower[i] && y[i] <= cfg_.box.upper[i])) return false;
    }
    return true;
}

bool OdeSolver::dopri_step(const Rhs& rhs, const Vector& y, const Vector& k1, double h,
                           Vector& y_new, Vector& k7, double& err)
{
    tmp_ = y + (h * a21) * k1;
    rhs(tmp_, k2_);
    tmp_ = y + h * (a31 * k1 + a32 * k2_);
    rhs(tmp_, k3_);
    tmp_ = y + h * (a41 * k1 + a42 * k2_ + a43 * k3_);
    rhs(tmp_, k4_);
    tmp_ = y + h * (a51 * k1 + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs(tmp_, k5_);
    tmp_ = y + h * (a61 * k1 + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs(tmp_, k6_);
    y_new = y + h * (b1 * k1 + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
    rhs(y_new, k7);
    err_ = h * (e1 * k1 + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sc = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
        const double r = err_[i] / sc;
        acc += r * r;
    }
    err = std::sqrt(acc / static_cast<double>(y.size()));
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    return err <= 1.0;
}

void OdeSolver::rk4_step(const Rhs& rhs, const Vector& y, const Vector& k1, double h, Vector& y_new)
{
    tmp_ = y + (0.5 * h) * k1;
    rhs(tmp_, k2_);
    tmp_ = y + (0.5 * h) * k2_;
    rhs(tmp_, k3_);
    tmp_ = y + h * k3_;
    rhs(tmp_, k4_);
    y_new = y + (h / 6.0) * (k1 + 2.0 * k2_ + 2.0 * k3_ + k4_);
}

void OdeSolver::advance(const Rhs& rhs, Vector& y, double duration, double sample_dt,
                        const Observer& observer)
{
    if (!(duration >= 0.0)) throw ConfigError("integration duration must be non-negative");
    const Eigen::Index n = y.size();
    for (Vector* v : {&k2_, &k3_, &k4_, &k5_, &k6_, &tmp_, &err_}) v->resize(n);
    Vector k1(n), k7(n), y_new(n);
    rhs(y, k1);
    if (observer) observer(0.0, y, k1);
    if (duration == 0.0) return;

    const double end_slop = 1e-12 * std::max(1.0, duration);
    long next_k = 1;
    auto next_target = [&]() {
        if (sample_dt <= 0.0) return duration;
        const double t = static_cast<double>(next_k) * sample_dt;
        return t > duration - end_slop ? duration : t;
    };
    if (h_ <= 0.0) h_ = std::min(cfg_.step, duration);

    double t = 0.0;
    while (t < duration) {
        const double target = next_target();
        double h = cfg_.method == Method::RK4 ? cfg_.step : h_;
        bool hits = false;
        if (t + h >= target - 1e-14 * std::max(1.0, target)) {
            h = target - t;
            hits = true;
        }
        if (++steps_ > cfg_.max_steps) throw BudgetError("integrator step budget exceeded");
        if (!(h > 1e-14 * std::max(1.0, std::abs(t)))) {
            if (hits && h >= 0.0) {
                // target coincides with current time up to rounding
                t = target;
                if (observer && sample_dt > 0.0) observer(t, y, k1);
                ++next_k;
                continue;
            }
            throw NumericalError("integrator step size underflow");
        }

        if (cfg_.method == Method::RK4) {
            rk4_step(rhs, y, k1, h, y_new);
            rhs(y_new, k7);
        } else {
            double err = 0.0;
            const bool ok = dopri_step(rhs, y, k1, h, y_new, k7, err);
            const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (!ok) {
                h_ = h * std::min(fac, 0.9);
                continue;
            }
            if (!hits) {
                h_ = h * fac;
            } else if (fac < 1.0) {
                h_ = std::min(h_, h * fac);
            }
        }
        if (!in_box(y_new)) {
            throw EscapeError("orbit left the working box", t, y.head(box_dim_));
        }
        t = hits ? target : t + h;
        y.swap(y_new);
        k1.swap(k7);
        if (hits) {
            if (target < duration) ++next_k;
            if (observer && sample_dt > 0.0) observer(t, y, k1);
            else if (observer && t >= duration) observer(t, y, k1);
        } else if (observer && sample_dt <= 0.0) {
            observer(t, y, k1);
        }
    }
}

Trajectory integrate_flow(const VectorField& field, const Vector& x0, double t_a, double t_b,
                          const IntegratorConfig& cfg, double sample_dt)
{
    if (x0.size() != field.dimension()) throw ConfigError("initial state has wrong dimension");
    if (!x0.allFinite()) throw ConfigError("initial state is not finite");
    if (t_b < t_a) throw ConfigError("t_span must satisfy t_a <= t_b; use time_reverse for backward flow");
    Trajectory traj;
    OdeSolver solver(cfg, field.dimension());
    Vector y = x0;
    solver.advance([&field](const Vector& s, Vector& ds) { field.value(s, ds); }, y, t_b - t_a, sample_dt,
                   [&](double t, const Vector& s, const Vector& ds) {
                       traj.times.push_back(t_a + t);
                       traj.states.push_back(s);
                       traj.velocities.push_back(ds);
                       traj.accelerations.push_back(field.jacobian(s) * ds);
                   });
    return traj;
}

Vector flow_map(const VectorField& field, const Vector& x0, double t, const IntegratorConfig& cfg)
{
    if (t < 0.0) return flow_map(field.reversed(), x0, -t, cfg);
    OdeSolver solver(cfg, field.dimension());
    Vector y = x0;
    solver.advance([&field](const Vector& s, Vector& ds) { field.value(s, ds); }, y, t, 0.0);
    return y;
}

TangentState propagate_tangent(const VectorField& field, const Vector& x0, double t,
                               const IntegratorConfig& cfg, double sample_dt,
                               const OdeSolver::Observer& observer)
{
    if (t < 0.0) return propagate_tangent(field.reversed(), x0, -t, cfg, sample_dt, observer);
    const int d = field.dimension();
    if (x0.size() != d) throw ConfigError("initial state has wrong dimension");
    Vector y(d + d * d);
    y.head(d) = x0;
    Eigen::Map<Matrix>(y.data() + d, d, d).setIdentity();
    Matrix jac(d, d);
    Vector xv(d), fx(d);
    auto rhs = [&](const Vector& s, Vector& ds) {
        xv = s.head(d);
        field.value(xv, fx);
        field.jacobian(xv, jac);
        ds.head(d) = fx;
        Eigen::Map<Matrix>(ds.data() + d, d, d).noalias() =
            jac * Eigen::Map<const Matrix>(s.data() + d, d, d);
    };
    OdeSolver solver(cfg, d);
    solver.advance(rhs, y, t, sample_dt, observer);
    return {y.head(d), Eigen::Map<const Matrix>(y.data() + d, d, d)};
}

Matrix tangent_flow(const VectorField& field, const Vector& x0, double t, const IntegratorConfig& cfg)
{
    return propagate_tangent(field, x0, t, cfg).phi;
}

Vector unit_tangent(const Vector& v)
{
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateError("unit_tangent of a zero or non-finite vector");
    return v / n;
}

}  // namespace lpflow
