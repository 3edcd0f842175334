#include "lpflow/measures.hpp"

#include <algorithm>
#include <cmath>

#include "lpflow/errors.hpp"

namespace lpflow {

std::string to_string(MeasureSource s)
{
    switch (s) {
    case MeasureSource::TrajectoryAverage: return "trajectory-average";
    case MeasureSource::PeriodicOrbit: return "periodic-orbit";
    case MeasureSource::Synthetic: return "synthetic";
    }
    return "unknown";
}

double EmpiricalMeasure::integrate(const std::function<double(const Vector&)>& fn) const
{
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += weights[i] * fn(points[i]);
    return s;
}

void EmpiricalMeasure::validate() const
{
    if (points.empty() || points.size() != weights.size()) throw ConfigError("measure needs one weight per point");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("measure weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("measure weights must sum to 1");
}

EmpiricalMeasure EmpiricalMeasure::point_mass(const Vector& x) { return {{x}, {1.0}, MeasureSource::Synthetic}; }

EmpiricalMeasure empirical_measure(const Trajectory& traj)
{
    if (traj.size() < 2 || !(traj.duration() > 0.0)) throw ConfigError("empirical measure needs a trajectory of positive length");
    EmpiricalMeasure mu;
    mu.source = MeasureSource::TrajectoryAverage;
    mu.points = traj.states;
    mu.weights.assign(traj.size(), 0.0);
    const double total = traj.duration();
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const double h = 0.5 * (traj.times[i + 1] - traj.times[i]) / total;
        mu.weights[i] += h;
        mu.weights[i + 1] += h;
    }
    return mu;
}

double birkhoff_average(const ScalarFunction& fn, const Trajectory& traj)
{
    if (traj.size() < 2 || !(traj.duration() > 0.0)) throw ConfigError("Birkhoff average needs a trajectory of positive length");
    double s = 0.0;
    double prev = fn(traj.states[0]);
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const double next = fn(traj.states[i + 1]);
        s += 0.5 * (traj.times[i + 1] - traj.times[i]) * (prev + next);
        prev = next;
    }
    return s / traj.duration();
}

EmpiricalMeasure periodic_measure(const PeriodicOrbit& orbit, std::size_t points)
{
    if (!(orbit.period > 0.0) || orbit.samples.empty()) throw ConfigError("periodic measure needs a closed orbit");
    const std::size_t n =
        points > 0 ? points : std::max<std::size_t>(200, static_cast<std::size_t>(std::ceil(orbit.period / 0.005)));
    EmpiricalMeasure mu;
    mu.source = MeasureSource::PeriodicOrbit;
    mu.weights.assign(n, 1.0 / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
        mu.points.push_back(orbit.samples.state_at(orbit.period * static_cast<double>(k) / static_cast<double>(n)));
    }
    return mu;
}

namespace {

// Monomials of degree 1 then degree 2 in lexicographic order.
std::vector<std::vector<int>> low_degree_monomials(int d)
{
    std::vector<std::vector<int>> out;
    for (int i = 0; i < d; ++i) {
        std::vector<int> p(static_cast<std::size_t>(d), 0);
        p[static_cast<std::size_t>(i)] = 1;
        out.push_back(p);
    }
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            std::vector<int> p(static_cast<std::size_t>(d), 0);
            ++p[static_cast<std::size_t>(i)];
            ++p[static_cast<std::size_t>(j)];
            out.push_back(p);
        }
    }
    return out;
}

}  // namespace

TestFunctionFamily::TestFunctionFamily(const Box& box, std::size_t n) : box_(box)
{
    if (!box.bounded()) throw ConfigError("test function family needs a bounded box");
    if (n == 0) throw ConfigError("test function family must be nonempty");
    if (!((box.upper - box.lower).array() > 0.0).all()) throw ConfigError("test function box has zero width");
    const auto monomials = low_degree_monomials(static_cast<int>(box.lower.size()));
    for (std::size_t i = 0; i < n; ++i) {
        const double kappa = std::pow(3.0, static_cast<double>(i / monomials.size()));
        functions_.push_back({monomials[i % monomials.size()], kappa, std::tanh(kappa)});
    }
}

TestFunctionFamily TestFunctionFamily::around(const std::vector<Vector>& points, std::size_t n)
{
    if (points.empty()) throw ConfigError("test function family needs points");
    Box b{points.front(), points.front()};
    for (const auto& p : points) {
        b.lower = b.lower.cwiseMin(p);
        b.upper = b.upper.cwiseMax(p);
    }
    const Vector pad = (0.1 * (b.upper - b.lower)).cwiseMax(1e-6);
    b.lower -= pad;
    b.upper += pad;
    return TestFunctionFamily(b, n);
}

double TestFunctionFamily::evaluate(std::size_t i, const Vector& x) const
{
    const Function& fn = functions_.at(i);
    const Vector u = (x - box_.center()).cwiseQuotient(box_.half_widths());
    double m = 1.0;
    for (std::size_t j = 0; j < fn.powers.size(); ++j) {
        for (int k = 0; k < fn.powers[j]; ++k) m *= u[static_cast<Eigen::Index>(j)];
    }
    return std::tanh(fn.kappa * m);
}

TestFunctionFamily TestFunctionFamily::truncated(std::size_t n) const
{
    if (n == 0 || n > functions_.size()) throw ConfigError("truncation size out of range");
    TestFunctionFamily out;
    out.box_ = box_;
    out.functions_.assign(functions_.begin(), functions_.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

double weak_star_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const TestFunctionFamily& fam)
{
    if (fam.size() == 0) throw ConfigError("test function family must be nonempty");
    double total = 0.0;
    double weight = 0.5;
    for (std::size_t i = 0; i < fam.size(); ++i) {
        auto fi = [&](const Vector& x) { return fam.evaluate(i, x); };
        total += weight * std::abs(mu.integrate(fi) - nu.integrate(fi)) / fam.function(i).sup_norm;
        weight *= 0.5;
    }
    return total;
}

ComparisonReport compare_spectra(const LyapunovSpectrum& measure_spectrum, const LyapunovSpectrum& orbit_spectrum,
                                 double eps)
{
    if (measure_spectrum.size() != orbit_spectrum.size()) throw ConfigError("spectra have different lengths");
    if (measure_spectrum.size() == 0) throw ConfigError("spectra are empty");
    if (!(eps > 0.0)) throw ConfigError("comparison eps must be positive");
    ComparisonReport r;
    r.eps = eps;
    r.measure_spectrum = measure_spectrum.exponents;
    r.orbit_spectrum = orbit_spectrum.exponents;
    std::sort(r.measure_spectrum.begin(), r.measure_spectrum.end());
    std::sort(r.orbit_spectrum.begin(), r.orbit_spectrum.end());
    for (std::size_t i = 0; i < r.measure_spectrum.size(); ++i) {
        r.gaps.push_back(std::abs(r.measure_spectrum[i] - r.orbit_spectrum[i]));
    }
    r.spectrum_pass = std::all_of(r.gaps.begin(), r.gaps.end(), [&](double g) { return g < eps; });
    auto extreme = [&](std::size_t i) {
        return ExtremeComparison{r.measure_spectrum[i], r.orbit_spectrum[i], r.gaps[i], r.gaps[i] < eps};
    };
    r.smallest = extreme(0);
    r.largest = extreme(r.gaps.size() - 1);
    return r;
}

void attach_weak_star(ComparisonReport& report, const EmpiricalMeasure& mu, const EmpiricalMeasure& mu_p,
                      const TestFunctionFamily& fam, double weak_eps)
{
    report.weak_star = weak_star_distance(mu, mu_p, fam);
    report.weak_star_eps = weak_eps;
    report.weak_star_pass = *report.weak_star < weak_eps;
}

}  // namespace lpflow
