#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lpflow/field.hpp"
#include "lpflow/flow.hpp"
#include "lpflow/orbits.hpp"
#include "lpflow/spectra.hpp"

namespace lpflow {

enum class MeasureSource { TrajectoryAverage, PeriodicOrbit, Synthetic };

std::string to_string(MeasureSource s);

/// Finitely supported probability measure given by quadrature weights.
struct EmpiricalMeasure {
    std::vector<Vector> points;
    std::vector<double> weights;
    MeasureSource source = MeasureSource::Synthetic;

    std::size_t size() const { return points.size(); }
    double integrate(const std::function<double(const Vector&)>& fn) const;
    /// Throws ConfigError unless weights are nonnegative and sum to 1 (within 1e-12).
    void validate() const;

    static EmpiricalMeasure point_mass(const Vector& x);
};

using ScalarFunction = std::function<double(const Vector&)>;

/// Time average of fn along the trajectory by the trapezoid rule.
double birkhoff_average(const ScalarFunction& fn, const Trajectory& traj);

/// Trapezoid weights over the trajectory samples; integrates fn as birkhoff_average does.
EmpiricalMeasure empirical_measure(const Trajectory& traj);

/// Uniform time grid over one period with equal weights. For a periodic
/// integrand this is the periodic trapezoid rule, which converges spectrally.
/// points = 0 picks max(200, period / 0.005).
EmpiricalMeasure periodic_measure(const PeriodicOrbit& orbit, std::size_t points = 0);

/// f_i(x) = tanh(kappa_i * m_i(u)), u = (x - center) / half_width componentwise,
/// m_i running through the monomials of degree 1 and 2 in a fixed order and
/// kappa_i = 3^k on the k-th pass through that list. On the box |m_i(u)| <= 1,
/// attained at a corner, so the sup-norm over the box is tanh(kappa_i).
class TestFunctionFamily {
public:
    struct Function {
        std::vector<int> powers;
        double kappa = 1.0;
        double sup_norm = 0.0;
    };

    TestFunctionFamily(const Box& box, std::size_t n = 20);
    /// The bounding box of the points, padded by 10% of its widths.
    static TestFunctionFamily around(const std::vector<Vector>& points, std::size_t n = 20);

    std::size_t size() const { return functions_.size(); }
    const Function& function(std::size_t i) const { return functions_[i]; }
    double evaluate(std::size_t i, const Vector& x) const;
    /// Same box, first n functions.
    TestFunctionFamily truncated(std::size_t n) const;

    const Box& box() const { return box_; }

private:
    TestFunctionFamily() = default;
    Box box_;
    std::vector<Function> functions_;
};

/// d_M(mu, nu) = sum_i |int f_i dmu - int f_i dnu| / (2^i |f_i|), i = 1..n.
double weak_star_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const TestFunctionFamily& fam);

struct ExtremeComparison {
    double measure_exponent = 0.0;
    double orbit_exponent = 0.0;
    double gap = 0.0;
    bool pass = false;
};

struct ComparisonReport {
    std::vector<double> measure_spectrum;  // ascending
    std::vector<double> orbit_spectrum;    // ascending
    std::vector<double> gaps;              // |lambda_i(mu) - lambda_i(p)|, index aligned
    double eps = 0.0;
    bool spectrum_pass = false;  // all gaps < eps
    ExtremeComparison largest;
    ExtremeComparison smallest;
    std::optional<double> weak_star;  // d_M(mu, mu_p) when measures were supplied
    std::optional<double> weak_star_eps;
    std::optional<bool> weak_star_pass;
};

/// Throws ConfigError when the spectra have different lengths or eps <= 0.
ComparisonReport compare_spectra(const LyapunovSpectrum& measure_spectrum, const LyapunovSpectrum& orbit_spectrum,
                                 double eps);

/// Adds d_M(mu, mu_p) and its pass/fail at weak_eps to a report.
void attach_weak_star(ComparisonReport& report, const EmpiricalMeasure& mu, const EmpiricalMeasure& mu_p,
                      const TestFunctionFamily& fam, double weak_eps);

}  // namespace lpflow
